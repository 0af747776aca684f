// Command-line front end: build an index directory from a corpus and schema,
// query it through the reasoning loop, evaluate a dataset, or inspect cells.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "json.hpp"

#include "cubeqa/eval.hpp"
#include "cubeqa/http_llm.hpp"
#include "cubeqa/index.hpp"
#include "cubeqa/loop.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct BackendOptions {
    std::string chat_script;   // scripted chat backend rules file
    std::string embed_table;   // fixture embedder table file
    bool http_embed = false;   // use the HTTP embedding backend
};

void add_backend_options(CLI::App* cmd, BackendOptions& opts) {
    cmd->add_option("--chat-script", opts.chat_script,
                    "Scripted chat backend rules (JSON); default is the HTTP backend "
                    "configured via CUBEQA_* environment variables");
    cmd->add_option("--embed-table", opts.embed_table,
                    "Fixture embedding table (JSON); omit for no embeddings");
    cmd->add_flag("--http-embed", opts.http_embed, "Use the HTTP embedding backend");
}

std::unique_ptr<cubeqa::ChatBackend> make_chat(const BackendOptions& opts) {
    if (!opts.chat_script.empty())
        return std::make_unique<cubeqa::ScriptedChatBackend>(
            cubeqa::ScriptedChatBackend::from_file(opts.chat_script));
    return std::make_unique<cubeqa::HttpChatBackend>(cubeqa::HttpBackendConfig::from_env());
}

std::unique_ptr<cubeqa::EmbeddingBackend> make_embed(const BackendOptions& opts) {
    if (!opts.embed_table.empty())
        return std::make_unique<cubeqa::FixtureEmbedder>(
            cubeqa::FixtureEmbedder::from_file(opts.embed_table));
    if (opts.http_embed)
        return std::make_unique<cubeqa::HttpEmbeddingBackend>(
            cubeqa::HttpBackendConfig::from_env());
    return nullptr;
}

std::string cube_dir_name(const std::string& cube_name) {
    std::string out = "cube_";
    for (char c : cube_name) {
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'))
            out.push_back(c);
        else if (c >= 'A' && c <= 'Z')
            out.push_back(static_cast<char>(c - 'A' + 'a'));
        else
            out.push_back('_');
    }
    return out;
}

struct LoadedIndex {
    cubeqa::Corpus corpus;
    cubeqa::CubeRegistry registry;
    std::map<std::string, cubeqa::CubeIndex> indexes;
};

LoadedIndex load_index_dir(const fs::path& dir) {
    LoadedIndex li;
    li.corpus = cubeqa::load_corpus(dir / "corpus.jsonl");
    li.registry = cubeqa::load_registry(dir / "schema.json");
    for (const auto& name : li.registry.names())
        li.indexes.emplace(name, cubeqa::load_index(dir / cube_dir_name(name)));
    return li;
}

int cmd_build(const std::string& corpus_path, const std::string& schema_path,
              const std::string& out_dir, const BackendOptions& backends) {
    cubeqa::Corpus corpus = cubeqa::load_corpus(corpus_path);
    cubeqa::CubeRegistry registry = cubeqa::load_registry(schema_path);
    auto chat = make_chat(backends);
    auto embed = make_embed(backends);

    cubeqa::BuildResult result =
        cubeqa::build_index(corpus, registry.specs(), *chat, embed.get());

    fs::create_directories(out_dir);
    cubeqa::save_corpus(corpus, fs::path(out_dir) / "corpus.jsonl");
    cubeqa::save_registry(registry, fs::path(out_dir) / "schema.json");
    for (const auto& [name, index] : result.indexes)
        cubeqa::save_index(index, fs::path(out_dir) / cube_dir_name(name));

    std::cout << "indexed " << result.report.documents_tagged << "/"
              << result.report.documents_total << " documents\n";
    for (const auto& [name, index] : result.indexes)
        std::cout << name << ": " << index.doc_count() << " docs, " << index.cell_count()
                  << " cells, " << index.posting_entry_count() << " postings\n";
    for (const auto& [doc_id, reason] : result.report.failures)
        std::cerr << "warning: failed to tag " << doc_id << ": " << reason << "\n";
    for (const auto& w : result.report.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

int cmd_query(const std::string& index_dir, const std::string& question,
              const std::string& trace_path, cubeqa::LoopConfig cfg,
              const BackendOptions& backends) {
    LoadedIndex li = load_index_dir(index_dir);
    auto chat = make_chat(backends);
    auto embed = make_embed(backends);

    cubeqa::ReasoningTrace trace = cubeqa::run(question, li.corpus, li.indexes, li.registry,
                                               cfg, *chat, embed.get());
    if (!trace_path.empty()) {
        std::ofstream out(trace_path);
        if (!out) throw std::runtime_error("cannot write trace to " + trace_path);
        out << trace.to_json(&li.corpus).dump(2) << "\n";
    }
    if (trace.stop_reason == cubeqa::StopReason::error)
        throw std::runtime_error("query failed: " + trace.error);
    std::cout << trace.final_answer << "\n";
    return 0;
}

int cmd_eval(const std::string& index_dir, const std::string& dataset_path,
             const std::string& report_path, cubeqa::LoopConfig cfg,
             const cubeqa::AblationConfig& ablation, int batch_size,
             const BackendOptions& backends) {
    LoadedIndex li = load_index_dir(index_dir);
    auto chat = make_chat(backends);
    auto embed = make_embed(backends);
    auto dataset = cubeqa::load_dataset(dataset_path);

    cubeqa::EvalReport report = cubeqa::run_benchmark(
        dataset, li.corpus, li.indexes, li.registry, cfg, ablation, batch_size, *chat,
        embed.get());

    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) throw std::runtime_error("cannot write report to " + report_path);
        out << report.to_json().dump(2) << "\n";
    }
    std::printf("EM %.1f%%  F1 %.1f%%  |  n=%zu  wall %.3fs (%.4fs/query)  retrieval p50 %.4fs\n",
                report.em_mean * 100.0, report.f1_mean * 100.0, report.examples.size(),
                report.wall_clock_s, report.per_query_wall_s, report.retrieval.p50_s);
    return 0;
}

int cmd_inspect(const std::string& index_dir, const std::string& cube,
                const std::string& dimension, const std::string& value) {
    LoadedIndex li = load_index_dir(index_dir);
    std::string normalized = cubeqa::normalize_value(value);
    bool found = false;
    for (const auto& [name, index] : li.indexes) {
        if (!cube.empty() && name != cube) continue;
        if (const auto* ids = index.postings_for(dimension, normalized)) {
            found = true;
            for (const auto& id : *ids) std::cout << name << "\t" << id << "\n";
        }
    }
    if (!found) {
        std::cerr << "no documents in cell (" << dimension << ", " << normalized << ")\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-cube retrieval-augmented QA engine"};
    app.require_subcommand(1);

    // build
    auto* build = app.add_subcommand("build", "Build an index directory from a corpus");
    std::string corpus_path, schema_path, out_dir;
    BackendOptions build_backends;
    build->add_option("--corpus", corpus_path, "Corpus file (JSON lines)")->required();
    build->add_option("--schema", schema_path, "Cube schema file (JSON)")->required();
    build->add_option("--out", out_dir, "Output index directory")->required();
    add_backend_options(build, build_backends);

    // shared query/eval knobs
    auto add_loop_options = [](CLI::App* cmd, cubeqa::LoopConfig& cfg, std::string& mode) {
        cmd->add_option("--k", cfg.retrieval.k, "Documents retrieved per subquery");
        cmd->add_option("--tau", cfg.retrieval.tau, "Semantic similarity threshold");
        cmd->add_option("--max-iters", cfg.max_iterations, "Iteration limit");
        cmd->add_option("--mode", mode, "Retrieval mode: exact_only|semantic_only|hybrid");
    };

    // query
    auto* query = app.add_subcommand("query", "Answer one question against an index");
    std::string query_index, question, trace_path, query_mode;
    cubeqa::LoopConfig query_cfg;
    BackendOptions query_backends;
    query->add_option("--index", query_index, "Index directory")->required();
    query->add_option("question", question, "The question to answer")->required();
    query->add_option("--trace", trace_path, "Write the full reasoning trace (JSON)");
    add_loop_options(query, query_cfg, query_mode);
    add_backend_options(query, query_backends);

    // eval
    auto* eval = app.add_subcommand("eval", "Run a QA dataset and report EM/F1 + latency");
    std::string eval_index, dataset_path, report_path, eval_mode;
    std::vector<std::string> disabled_cubes;
    int batch_size = 1;
    cubeqa::LoopConfig eval_cfg;
    BackendOptions eval_backends;
    eval->add_option("--index", eval_index, "Index directory")->required();
    eval->add_option("--dataset", dataset_path, "Dataset file (JSON lines)")->required();
    eval->add_option("--report", report_path, "Write the full report (JSON)");
    eval->add_option("--batch-size", batch_size, "Concurrent queries");
    eval->add_option("--disable-cube", disabled_cubes, "Remove a cube before routing")
        ->take_all();
    add_loop_options(eval, eval_cfg, eval_mode);
    add_backend_options(eval, eval_backends);

    // inspect
    auto* inspect = app.add_subcommand("inspect", "List doc ids stored in one cube cell");
    std::string inspect_index, inspect_cube, inspect_dim, inspect_value;
    inspect->add_option("--index", inspect_index, "Index directory")->required();
    inspect->add_option("--cube", inspect_cube, "Cube name (default: all cubes)");
    inspect->add_option("--dimension", inspect_dim, "Dimension name")->required();
    inspect->add_option("--value", inspect_value, "Cell value (normalized before lookup)")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed())
            return cmd_build(corpus_path, schema_path, out_dir, build_backends);
        if (query->parsed()) {
            if (!query_mode.empty())
                query_cfg.retrieval.mode = cubeqa::retrieval_mode_from_string(query_mode);
            return cmd_query(query_index, question, trace_path, query_cfg, query_backends);
        }
        if (eval->parsed()) {
            if (!eval_mode.empty())
                eval_cfg.retrieval.mode = cubeqa::retrieval_mode_from_string(eval_mode);
            cubeqa::AblationConfig ablation;
            ablation.disabled_cubes.insert(disabled_cubes.begin(), disabled_cubes.end());
            return cmd_eval(eval_index, dataset_path, report_path, eval_cfg, ablation,
                            batch_size, eval_backends);
        }
        if (inspect->parsed())
            return cmd_inspect(inspect_index, inspect_cube, inspect_dim, inspect_value);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
