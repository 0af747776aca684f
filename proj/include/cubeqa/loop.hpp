#pragma once
// Iterative reason-retrieve-answer loop: generate a one-hop subquery, route
// it to a cube, retrieve, answer, repeat until the generator signals FINAL
// ANSWER or the iteration limit is hit, then produce the final answer. Every
// step lands in an explainability trace.

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cubeqa/corpus.hpp"
#include "cubeqa/llm.hpp"
#include "cubeqa/retriever.hpp"
#include "cubeqa/schema.hpp"

namespace cubeqa {

// Sentinel cube name recorded when the router fell back to querying every cube.
inline constexpr const char* kRouteAll = "ALL";

struct PromptLibrary {
    std::string initial_subquery_template;  // {question}
    std::string next_subquery_template;     // {question}, {history}
    std::string final_answer_template;      // {question}, {history}
    std::string router_template;            // {cube_lines}, {cube_names}, {question}
    std::string subanswer_template;         // {question}, {passages}

    static PromptLibrary defaults();
};

// "SQ1: ...\nSA1: ..." lines, one pair per completed iteration.
std::string render_history(std::span<const std::pair<std::string, std::string>> history);

struct IterationRecord {
    int index = 0;  // 1-based
    std::string subquery;
    std::string routed_cube;  // registry name, or kRouteAll on router fallback
    QueryDecomposition decomposition;
    std::vector<RetrievalHit> hits;
    std::string sub_answer;
    // dimension -> matched values, unioned over all hits (cells that fired)
    std::map<std::string, std::vector<std::string>> activated_cells;
};

enum class StopReason { final_token, iteration_limit, error };

std::string_view to_string(StopReason reason);

struct PhaseTimings {
    double subquery_s = 0;
    double routing_s = 0;
    double decomposition_s = 0;  // includes query-entity embedding
    double retrieval_s = 0;      // index lookups + scoring only
    double subanswer_s = 0;
    double final_answer_s = 0;
    double total_s = 0;
};

struct ReasoningTrace {
    std::string query;
    std::vector<IterationRecord> iterations;
    std::string final_answer;
    StopReason stop_reason = StopReason::error;
    PhaseTimings timings;
    std::string error;  // set when stop_reason == error

    // Structured record: per iteration the subquery, routed cube, activated
    // cells, retrieved doc ids with snippets, and sub-answer; then the final
    // answer and stop reason. Snippets come from corpus when given.
    nlohmann::json to_json(const Corpus* corpus = nullptr) const;
};

struct LoopConfig {
    int max_iterations = 5;
    RetrievalConfig retrieval;
    int router_retry = 1;  // extra attempts before the ALL fallback
};

// First one-hop subquery for the original question; reply trimmed to its
// first non-empty line. Throws BackendError upward.
std::string initial_subquery(const std::string& question, ChatBackend& chat,
                             const PromptLibrary& prompts);

struct NextSubquery {
    bool finished = false;  // generator emitted the FINAL ANSWER sentinel
    std::string subquery;   // valid when !finished
};

NextSubquery next_subquery(const std::string& question,
                           std::span<const std::pair<std::string, std::string>> history,
                           ChatBackend& chat, const PromptLibrary& prompts);

// True when the reply, stripped of surrounding whitespace/quotes and trailing
// punctuation, equals FINAL ANSWER case-insensitively.
bool is_final_sentinel(const std::string& reply);

// Picks a registry cube for the subquery; retried router_retry extra times on
// unusable replies, then falls back to kRouteAll. Never throws on backend
// failure (that is what the fallback is for).
std::string route(const std::string& subquery, const CubeRegistry& registry,
                  ChatBackend& chat, const PromptLibrary& prompts, int router_retry = 1);

// Answers the subquery from the retrieved passages, included verbatim in hit
// order. Empty hits are allowed; the prompt then states nothing was found.
std::string answer_subquery(const std::string& subquery, std::span<const RetrievalHit> hits,
                            const Corpus& corpus, ChatBackend& chat,
                            const PromptLibrary& prompts);

// Final answer over the accumulated subquery/sub-answer pairs.
std::string final_answer(const std::string& question, const ReasoningTrace& trace,
                         ChatBackend& chat, const PromptLibrary& prompts);

// Full loop. Requires an index for every registry cube. Unrecoverable
// backend errors end the run with stop_reason = error and a partial trace.
ReasoningTrace run(const std::string& question, const Corpus& corpus,
                   const std::map<std::string, CubeIndex>& indexes,
                   const CubeRegistry& registry, const LoopConfig& cfg, ChatBackend& chat,
                   EmbeddingBackend* embed = nullptr,
                   const PromptLibrary& prompts = PromptLibrary::defaults());

}  // namespace cubeqa
