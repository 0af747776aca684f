#pragma once
// QA scoring (exact match and token-level F1 under standard answer
// normalization) and the batched benchmark driver with timing breakdowns
// and ablation switches.

#include <optional>
#include <set>

#include "cubeqa/loop.hpp"

namespace cubeqa {

struct QAExample {
    std::string question;
    std::vector<std::string> gold_answers;  // non-empty
};

// {"question": "...", "answers": ["...", ...]} per line
std::vector<QAExample> load_dataset(const std::filesystem::path& path);

// Lowercase, strip punctuation, drop article tokens (a/an/the), collapse
// whitespace. The convention the QA metrics below assume.
std::string normalize_answer(std::string_view raw);
std::vector<std::string> answer_tokens(std::string_view raw);

// 1 when the normalized prediction equals any normalized gold answer.
int exact_match(const std::string& prediction, std::span<const std::string> gold_answers);

// Token-multiset F1, maximum over gold answers. Both sides empty after
// normalization scores 1; exactly one empty scores 0.
double f1(const std::string& prediction, std::span<const std::string> gold_answers);

struct AblationConfig {
    std::set<std::string> disabled_cubes;  // proper subset of the registry
    std::optional<RetrievalMode> mode_override;
};

struct ExampleResult {
    std::string question;
    std::string prediction;
    int em = 0;
    double f1 = 0.0;
    double retrieval_s = 0.0;    // index lookups + scoring only
    double end_to_end_s = 0.0;   // whole loop for this example
    int iterations = 0;
    std::vector<std::string> retrieved_doc_ids;  // union over all iterations
    std::string error;  // non-empty when the example failed
};

struct LatencySummary {
    double mean_s = 0.0;
    double p50_s = 0.0;
    double p99_s = 0.0;
};

struct EvalReport {
    std::vector<ExampleResult> examples;
    double em_mean = 0.0;  // fraction; *100 for the percent rendering
    double f1_mean = 0.0;
    LatencySummary retrieval;
    LatencySummary end_to_end;
    double wall_clock_s = 0.0;     // whole batched run
    double per_query_wall_s = 0.0; // wall_clock_s / examples: the batched
                                   // per-query framework time
    nlohmann::json config_snapshot;

    nlohmann::json to_json() const;
};

LatencySummary summarize_latencies(std::vector<double> seconds);

// Runs the loop over every dataset example with batch_size-way concurrency.
// Disabled cubes are removed from the registry before routing; the mode
// override lands in the retrieval config. Per-example failures score 0 and
// never abort the run.
EvalReport run_benchmark(const std::vector<QAExample>& dataset, const Corpus& corpus,
                         const std::map<std::string, CubeIndex>& indexes,
                         const CubeRegistry& registry, const LoopConfig& cfg,
                         const AblationConfig& ablation, int batch_size, ChatBackend& chat,
                         EmbeddingBackend* embed = nullptr,
                         const PromptLibrary& prompts = PromptLibrary::defaults());

}  // namespace cubeqa
