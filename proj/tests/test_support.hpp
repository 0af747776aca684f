#pragma once
// Shared test helpers: fixture paths, random index/decomposition generators,
// and the brute-force scorer used as the retrieval oracle. The oracle applies
// the indicator-sum definition directly to every document and stays
// independent of the postings-based retrieval path it checks.

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "cubeqa/index.hpp"
#include "cubeqa/retriever.hpp"

namespace testsupport {

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(CUBEQA_FIXTURE_DIR) / name;
}

struct OracleHit {
    std::string doc_id;
    int score = 0;
};

// Exact lexical scoring straight from the definition: one point per query
// entity present among the document's values, dimension-scoped for assigned
// entities, any dimension for unassigned ones.
inline int oracle_exact_score(const cubeqa::DimensionTags& tags,
                              const cubeqa::QueryDecomposition& decomp) {
    int score = 0;
    for (const auto& [dim, entities] : decomp.per_dimension) {
        auto it = tags.find(dim);
        for (const auto& e : entities) {
            if (it == tags.end()) continue;
            if (std::find(it->second.begin(), it->second.end(), e) != it->second.end())
                ++score;
        }
    }
    for (const auto& e : decomp.unassigned) {
        for (const auto& [dim, values] : tags) {
            if (std::find(values.begin(), values.end(), e) != values.end()) {
                ++score;
                break;
            }
        }
    }
    return score;
}

// Scores every document, keeps positive scores, sorts score desc then doc_id
// asc, truncates to k.
inline std::vector<OracleHit> oracle_topk(
    const std::map<std::string, cubeqa::DimensionTags>& all_docs,
    const cubeqa::QueryDecomposition& decomp, int k) {
    std::vector<OracleHit> hits;
    for (const auto& [doc_id, tags] : all_docs) {
        int s = oracle_exact_score(tags, decomp);
        if (s > 0) hits.push_back({doc_id, s});
    }
    std::sort(hits.begin(), hits.end(), [](const OracleHit& a, const OracleHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (hits.size() > static_cast<std::size_t>(k)) hits.resize(k);
    return hits;
}

// --------------------------------------------------------------------------
// Random instances

inline cubeqa::CubeSpec random_spec(std::mt19937& rng, int max_extra_dims = 7) {
    std::uniform_int_distribution<int> extra(1, max_extra_dims);
    std::bernoulli_distribution is_relation(0.4);
    cubeqa::CubeSpec spec;
    spec.cube_name = "RANDOM";
    spec.subject_dim = {"dim0", cubeqa::DimensionKind::subject, "", {}, true};
    int n = extra(rng);
    for (int i = 1; i <= n; ++i) {
        std::string name = "dim" + std::to_string(i);
        if (is_relation(rng))
            spec.relation_dims.push_back({name, cubeqa::DimensionKind::relation, "", {}, true});
        else
            spec.attribute_dims.push_back({name, cubeqa::DimensionKind::attribute, "", {}, true});
    }
    return spec;
}

inline std::vector<std::string> value_vocab(int size) {
    std::vector<std::string> vocab;
    vocab.reserve(size);
    for (int i = 0; i < size; ++i) vocab.push_back("v" + std::to_string(i));
    return vocab;
}

inline cubeqa::DimensionTags random_tags(std::mt19937& rng, const cubeqa::CubeSpec& spec,
                                         const std::vector<std::string>& vocab,
                                         int max_values_per_dim = 4) {
    std::uniform_int_distribution<int> nvals(0, max_values_per_dim);
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    cubeqa::DimensionTags tags;
    for (const auto* d : spec.all_dimensions()) {
        int n = nvals(rng);
        std::vector<std::string> values;
        for (int i = 0; i < n; ++i) values.push_back(vocab[pick(rng)]);
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        if (!values.empty()) tags.emplace(d->name, std::move(values));
    }
    return tags;
}

struct RandomIndex {
    cubeqa::CubeIndex index;
    std::map<std::string, cubeqa::DimensionTags> docs;
};

inline RandomIndex random_index(std::mt19937& rng, const cubeqa::CubeSpec& spec,
                                const std::vector<std::string>& vocab, int n_docs,
                                cubeqa::EmbeddingBackend* embed = nullptr) {
    RandomIndex out{cubeqa::CubeIndex(spec), {}};
    for (int i = 0; i < n_docs; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "d%05d", i);
        cubeqa::DimensionTags tags = random_tags(rng, spec, vocab);
        out.index.insert(buf, tags, embed);
        out.docs.emplace(buf, std::move(tags));
    }
    return out;
}

inline cubeqa::QueryDecomposition random_decomposition(std::mt19937& rng,
                                                       const cubeqa::CubeSpec& spec,
                                                       const std::vector<std::string>& vocab,
                                                       int max_entities = 4) {
    std::uniform_int_distribution<int> nents(0, max_entities);
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::bernoulli_distribution assign(0.7);
    auto dims = spec.all_dimensions();
    std::uniform_int_distribution<std::size_t> pick_dim(0, dims.size() - 1);

    cubeqa::QueryDecomposition decomp;
    int n = nents(rng);
    for (int i = 0; i < n; ++i) {
        std::string entity = vocab[pick(rng)];
        if (assign(rng)) {
            auto& es = decomp.per_dimension[dims[pick_dim(rng)]->name];
            if (std::find(es.begin(), es.end(), entity) == es.end()) es.push_back(entity);
        } else {
            if (std::find(decomp.unassigned.begin(), decomp.unassigned.end(), entity) ==
                decomp.unassigned.end())
                decomp.unassigned.push_back(entity);
        }
    }
    return decomp;
}

}  // namespace testsupport
