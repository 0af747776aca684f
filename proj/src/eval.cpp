#include "cubeqa/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>
#include <unordered_map>

namespace cubeqa {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::vector<QAExample> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("dataset: cannot open " + path.string());
    std::vector<QAExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("question") ||
            !j.contains("answers"))
            throw std::runtime_error("dataset: malformed record at line " +
                                     std::to_string(line_no) + " of " + path.string());
        QAExample ex;
        ex.question = j["question"].get<std::string>();
        for (const auto& a : j["answers"]) ex.gold_answers.push_back(a.get<std::string>());
        if (ex.gold_answers.empty())
            throw std::runtime_error("dataset: empty answers at line " +
                                     std::to_string(line_no));
        out.push_back(std::move(ex));
    }
    return out;
}

std::string normalize_answer(std::string_view raw) {
    std::string no_punct;
    no_punct.reserve(raw.size());
    for (char c : raw) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::ispunct(u)) continue;
        no_punct.push_back(static_cast<char>(std::tolower(u)));
    }
    std::string out;
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        if (token != "a" && token != "an" && token != "the") {
            if (!out.empty()) out.push_back(' ');
            out += token;
        }
        token.clear();
    };
    for (char c : no_punct) {
        if (std::isspace(static_cast<unsigned char>(c)))
            flush();
        else
            token.push_back(c);
    }
    flush();
    return out;
}

std::vector<std::string> answer_tokens(std::string_view raw) {
    std::string normalized = normalize_answer(raw);
    std::vector<std::string> tokens;
    std::string token;
    for (char c : normalized) {
        if (c == ' ') {
            if (!token.empty()) tokens.push_back(std::move(token));
            token.clear();
        } else {
            token.push_back(c);
        }
    }
    if (!token.empty()) tokens.push_back(std::move(token));
    return tokens;
}

int exact_match(const std::string& prediction, std::span<const std::string> gold_answers) {
    if (gold_answers.empty()) throw std::runtime_error("metrics: no gold answers");
    std::string p = normalize_answer(prediction);
    for (const auto& gold : gold_answers)
        if (p == normalize_answer(gold)) return 1;
    return 0;
}

namespace {

double f1_single(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() && gold.empty()) return 1.0;
    if (pred.empty() || gold.empty()) return 0.0;
    std::unordered_map<std::string, int> gold_counts;
    for (const auto& t : gold) ++gold_counts[t];
    int common = 0;
    for (const auto& t : pred) {
        auto it = gold_counts.find(t);
        if (it != gold_counts.end() && it->second > 0) {
            ++common;
            --it->second;
        }
    }
    if (common == 0) return 0.0;
    double precision = double(common) / double(pred.size());
    double recall = double(common) / double(gold.size());
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

double f1(const std::string& prediction, std::span<const std::string> gold_answers) {
    if (gold_answers.empty()) throw std::runtime_error("metrics: no gold answers");
    auto pred_tokens = answer_tokens(prediction);
    double best = 0.0;
    for (const auto& gold : gold_answers)
        best = std::max(best, f1_single(pred_tokens, answer_tokens(gold)));
    return best;
}

LatencySummary summarize_latencies(std::vector<double> seconds) {
    LatencySummary s;
    if (seconds.empty()) return s;
    double sum = 0;
    for (double x : seconds) sum += x;
    s.mean_s = sum / double(seconds.size());
    std::sort(seconds.begin(), seconds.end());
    auto quantile = [&](double q) {
        std::size_t rank = static_cast<std::size_t>(
            std::ceil(q * static_cast<double>(seconds.size())));
        if (rank == 0) rank = 1;
        return seconds[std::min(rank - 1, seconds.size() - 1)];
    };
    s.p50_s = quantile(0.50);
    s.p99_s = quantile(0.99);
    return s;
}

json EvalReport::to_json() const {
    json per_example = json::array();
    for (const auto& r : examples) {
        json e = {{"question", r.question}, {"prediction", r.prediction},
                  {"em", r.em},             {"f1", r.f1},
                  {"retrieval_s", r.retrieval_s}, {"end_to_end_s", r.end_to_end_s},
                  {"iterations", r.iterations},
                  {"retrieved_doc_ids", r.retrieved_doc_ids}};
        if (!r.error.empty()) e["error"] = r.error;
        per_example.push_back(std::move(e));
    }
    return json{
        {"config", config_snapshot},
        {"aggregates",
         {{"em", {{"fraction", em_mean}, {"percent", em_mean * 100.0}}},
          {"f1", {{"fraction", f1_mean}, {"percent", f1_mean * 100.0}}},
          {"retrieval_s",
           {{"mean", retrieval.mean_s}, {"p50", retrieval.p50_s}, {"p99", retrieval.p99_s}}},
          {"end_to_end_s",
           {{"mean", end_to_end.mean_s},
            {"p50", end_to_end.p50_s},
            {"p99", end_to_end.p99_s}}},
          {"wall_clock_s", wall_clock_s},
          {"per_query_wall_s", per_query_wall_s}}},
        {"examples", per_example},
    };
}

EvalReport run_benchmark(const std::vector<QAExample>& dataset, const Corpus& corpus,
                         const std::map<std::string, CubeIndex>& indexes,
                         const CubeRegistry& registry, const LoopConfig& cfg,
                         const AblationConfig& ablation, int batch_size, ChatBackend& chat,
                         EmbeddingBackend* embed, const PromptLibrary& prompts) {
    if (dataset.empty()) throw std::runtime_error("benchmark: empty dataset");
    if (batch_size < 1) throw std::runtime_error("benchmark: batch size must be >= 1");

    CubeRegistry effective =
        ablation.disabled_cubes.empty() ? registry : registry.without(ablation.disabled_cubes);
    LoopConfig effective_cfg = cfg;
    if (ablation.mode_override) effective_cfg.retrieval.mode = *ablation.mode_override;

    EvalReport report;
    report.examples.resize(dataset.size());

    json disabled = json::array();
    for (const auto& name : ablation.disabled_cubes) disabled.push_back(name);
    report.config_snapshot = {
        {"k", effective_cfg.retrieval.k},
        {"tau", effective_cfg.retrieval.tau},
        {"mode", std::string(to_string(effective_cfg.retrieval.mode))},
        {"max_iterations", effective_cfg.max_iterations},
        {"batch_size", batch_size},
        {"disabled_cubes", disabled},
        {"examples", dataset.size()},
    };

    auto wall_start = Clock::now();
    std::atomic<std::size_t> next_index{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next_index.fetch_add(1);
            if (i >= dataset.size()) return;
            const QAExample& ex = dataset[i];
            ExampleResult& r = report.examples[i];
            r.question = ex.question;
            auto t0 = Clock::now();
            try {
                ReasoningTrace trace = run(ex.question, corpus, indexes, effective, effective_cfg,
                                           chat, embed, prompts);
                r.end_to_end_s = std::chrono::duration<double>(Clock::now() - t0).count();
                r.prediction = trace.final_answer;
                r.retrieval_s = trace.timings.retrieval_s;
                r.iterations = static_cast<int>(trace.iterations.size());
                for (const auto& it : trace.iterations)
                    for (const auto& hit : it.hits)
                        if (std::find(r.retrieved_doc_ids.begin(), r.retrieved_doc_ids.end(),
                                      hit.doc_id) == r.retrieved_doc_ids.end())
                            r.retrieved_doc_ids.push_back(hit.doc_id);
                if (trace.stop_reason == StopReason::error) r.error = trace.error;
                r.em = exact_match(r.prediction, ex.gold_answers);
                r.f1 = f1(r.prediction, ex.gold_answers);
            } catch (const std::exception& e) {
                r.end_to_end_s = std::chrono::duration<double>(Clock::now() - t0).count();
                r.error = e.what();
                r.em = 0;
                r.f1 = 0.0;
            }
        }
    };

    std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(batch_size), dataset.size());
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    report.wall_clock_s = std::chrono::duration<double>(Clock::now() - wall_start).count();
    report.per_query_wall_s = report.wall_clock_s / double(dataset.size());

    std::vector<double> retrieval_times, end_to_end_times;
    double em_sum = 0, f1_sum = 0;
    for (const auto& r : report.examples) {
        em_sum += r.em;
        f1_sum += r.f1;
        retrieval_times.push_back(r.retrieval_s);
        end_to_end_times.push_back(r.end_to_end_s);
    }
    report.em_mean = em_sum / double(report.examples.size());
    report.f1_mean = f1_sum / double(report.examples.size());
    report.retrieval = summarize_latencies(std::move(retrieval_times));
    report.end_to_end = summarize_latencies(std::move(end_to_end_times));
    return report;
}

}  // namespace cubeqa
