#pragma once
// Cube-based retrieval: map a question's entities onto cube dimensions, then
// rank documents by exact lexical match, embedding match above a similarity
// threshold, or both.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cubeqa/index.hpp"

namespace cubeqa {

struct QueryDecomposition {
    // dimension name -> normalized entities placed on that dimension
    std::map<std::string, std::vector<std::string>> per_dimension;
    // entities the backend could not place on any dimension
    std::vector<std::string> unassigned;
    // set to the backend reply when it could not be parsed (decomposition is
    // then empty and the caller may fall back)
    std::string raw_reply;

    bool empty() const { return per_dimension.empty() && unassigned.empty(); }
    std::size_t entity_count() const;
};

enum class MatchKind { exact, semantic };

struct MatchDetail {
    std::string dimension;
    std::string query_entity;
    std::string matched_value;
    MatchKind kind = MatchKind::exact;
    double similarity = 1.0;  // cosine for semantic matches, 1.0 for exact
};

struct RetrievalHit {
    std::string doc_id;
    double score = 0.0;  // sum of per-entity contributions, recomputable from matches
    std::vector<MatchDetail> matches;
};

enum class RetrievalMode { exact_only, semantic_only, hybrid };

std::string_view to_string(RetrievalMode mode);
RetrievalMode retrieval_mode_from_string(std::string_view s);

struct RetrievalConfig {
    int k = 5;
    double tau = 0.80;
    RetrievalMode mode = RetrievalMode::hybrid;
};

// entity string -> unit-norm embedding
using EntityVectors = std::map<std::string, std::vector<float>>;

std::string render_decomposition_prompt(const std::string& query, const CubeSpec& spec);
// Tolerant JSON parse; unknown dimensions fall into unassigned; a reply that
// is not JSON yields an empty decomposition carrying the raw reply.
QueryDecomposition parse_decomposition_reply(const std::string& reply, const CubeSpec& spec);
// Throws BackendError on backend failure.
QueryDecomposition decompose_query(const std::string& query, const CubeSpec& spec,
                                   ChatBackend& chat);

// Count of query entities present verbatim among the document's values.
// A dimension-assigned entity matches only values of that dimension;
// unassigned entities match values of any dimension.
int exact_score(const DimensionTags& tags, const QueryDecomposition& decomp);

// Sum over entities not exactly matched of the best cosine against the
// document's value embeddings (same dimension scoping), counted when the
// similarity reaches tau. Embedding failures make entities contribute 0 and
// are appended to failures when given.
double semantic_score(const DimensionTags& tags, const QueryDecomposition& decomp,
                      const ValueEmbeddings& value_embeddings, double tau,
                      EmbeddingBackend& embed, std::vector<std::string>* failures = nullptr);

// Full per-document scoring with match explanations; exposed for tests and
// trace construction.
struct ScoredDoc {
    double score = 0.0;
    std::vector<MatchDetail> matches;
};
ScoredDoc score_document(const DimensionTags& tags, const QueryDecomposition& decomp,
                         RetrievalMode mode, double tau,
                         const ValueEmbeddings& value_embeddings,
                         const EntityVectors& entity_vectors);

EntityVectors embed_query_entities(const QueryDecomposition& decomp, EmbeddingBackend& embed,
                                   std::vector<std::string>* failures = nullptr);

// Top-k hits, score descending, ties broken by ascending doc_id. Candidates
// come from postings lookups for exact matches plus, in semantic and hybrid
// modes, documents owning any value whose similarity to a query entity
// reaches tau. Pass entity_vectors to keep retrieval free of backend calls;
// otherwise embed is used when semantic scoring is active.
std::vector<RetrievalHit> retrieve(const CubeIndex& index, const QueryDecomposition& decomp,
                                   const RetrievalConfig& cfg,
                                   EmbeddingBackend* embed = nullptr,
                                   const EntityVectors* entity_vectors = nullptr);

// Stable order for merged multi-cube results: score desc, then doc_id asc.
void sort_hits(std::vector<RetrievalHit>& hits);

double cosine(const std::vector<float>& a, const std::vector<float>& b);

}  // namespace cubeqa
