#include "doctest.h"

#include <fstream>
#include <random>

#include "cubeqa/eval.hpp"

#include "test_support.hpp"

using namespace cubeqa;
using nlohmann::json;

namespace {

struct DemoEval {
    Corpus corpus = load_corpus(testsupport::fixture("demo_corpus.jsonl"));
    CubeRegistry registry = load_registry(testsupport::fixture("demo_schema.json"));
    ScriptedChatBackend chat =
        ScriptedChatBackend::from_file(testsupport::fixture("demo_script.json"));
    std::map<std::string, CubeIndex> indexes;
    std::vector<QAExample> dataset = load_dataset(testsupport::fixture("demo_dataset.jsonl"));

    DemoEval() { indexes = build_index(corpus, registry.specs(), chat).indexes; }
};

std::vector<std::string> golds(std::initializer_list<const char*> gs) {
    return std::vector<std::string>(gs.begin(), gs.end());
}

}  // namespace

TEST_CASE("answer normalization strips case, punctuation and articles") {
    CHECK(normalize_answer("The Heart Of Doreon.") == "heart of doreon");
    CHECK(normalize_answer("Paris") == "paris");
    CHECK(normalize_answer("a  dog, an apple, the end!") == "dog apple end");
    CHECK(normalize_answer("") == "");
}

TEST_CASE("exact_match under the answer convention") {
    auto g = golds({"The Heart Of Doreon"});
    CHECK(exact_match("The Heart Of Doreon.", g) == 1);
    CHECK(exact_match("paris", golds({"Paris"})) == 1);
    CHECK(exact_match("Charlie Day", golds({"Robert North Bradbury"})) == 0);
    CHECK(exact_match("anything", golds({"other", "anything!"})) == 1);  // max over golds
}

TEST_CASE("token-level F1") {
    CHECK(f1("Robert North Bradbury", golds({"Robert Bradbury"})) ==
          doctest::Approx(0.8).epsilon(1e-9));
    CHECK(f1("same words", golds({"same words"})) == 1.0);
    CHECK(f1("completely different", golds({"nothing shared"})) == 0.0);
    CHECK(f1("the", golds({"a"})) == 1.0);   // both normalize to empty
    CHECK(f1("word", golds({"the"})) == 0.0);  // one side empty
    CHECK(f1("", golds({"word"})) == 0.0);
}

TEST_CASE("metrics are symmetric in gold order and EM implies F1 = 1") {
    auto g1 = golds({"alpha beta", "gamma"});
    auto g2 = golds({"gamma", "alpha beta"});
    CHECK(f1("alpha beta", g1) == f1("alpha beta", g2));
    CHECK(exact_match("gamma", g1) == exact_match("gamma", g2));

    std::mt19937 rng(61);
    std::uniform_int_distribution<int> len(0, 6);
    std::uniform_int_distribution<int> word(0, 9);
    auto random_text = [&] {
        std::string s;
        int n = len(rng);
        for (int i = 0; i < n; ++i) s += "w" + std::to_string(word(rng)) + " ";
        return s;
    };
    for (int trial = 0; trial < 1000; ++trial) {
        std::string pred = random_text();
        auto gold = golds({});
        gold.push_back(random_text());
        int em = exact_match(pred, gold);
        double f = f1(pred, gold);
        CHECK(em <= f + 1e-12);
        if (em == 1) CHECK(f == doctest::Approx(1.0));
    }
}

TEST_CASE("run_benchmark scores the three-example fixture as computed by hand") {
    DemoEval fx;
    LoopConfig cfg;
    EvalReport report = run_benchmark(fx.dataset, fx.corpus, fx.indexes, fx.registry, cfg,
                                      {}, 1, fx.chat);
    REQUIRE(report.examples.size() == 3);
    CHECK(report.examples[0].em == 1);            // "The Heart Of Doreon." vs gold
    CHECK(report.examples[0].f1 == doctest::Approx(1.0));
    CHECK(report.examples[1].em == 0);            // "Robert North Bradbury" vs "Robert Bradbury"
    CHECK(report.examples[1].f1 == doctest::Approx(0.8));
    CHECK(report.examples[2].em == 1);            // "1976"
    CHECK(report.examples[2].f1 == doctest::Approx(1.0));

    CHECK(report.em_mean == doctest::Approx(2.0 / 3.0));
    CHECK(report.f1_mean == doctest::Approx(2.8 / 3.0));

    SUBCASE("aggregates recompute from per-example records") {
        double em_sum = 0, f1_sum = 0;
        for (const auto& r : report.examples) {
            em_sum += r.em;
            f1_sum += r.f1;
            CHECK(r.retrieval_s <= r.end_to_end_s);
        }
        CHECK(report.em_mean == doctest::Approx(em_sum / 3.0));
        CHECK(report.f1_mean == doctest::Approx(f1_sum / 3.0));
    }
    SUBCASE("report JSON carries fractions and percentages") {
        json j = report.to_json();
        CHECK(j["aggregates"]["em"]["fraction"] == doctest::Approx(2.0 / 3.0));
        CHECK(j["aggregates"]["em"]["percent"] == doctest::Approx(100.0 * 2.0 / 3.0));
        CHECK(j["config"]["k"] == 5);
        CHECK(j["examples"].size() == 3);
    }
}

TEST_CASE("disabling the product cube removes film documents and degrades EM") {
    DemoEval fx;
    LoopConfig cfg;
    AblationConfig ablation;
    ablation.disabled_cubes = {"CULTURAL_PRODUCT"};
    EvalReport report = run_benchmark(fx.dataset, fx.corpus, fx.indexes, fx.registry, cfg,
                                      ablation, 1, fx.chat);
    for (const auto& r : report.examples) {
        for (const auto& id : r.retrieved_doc_ids) {
            CHECK(id != "doc-el-tonto");
            CHECK(id != "doc-doreon");
        }
    }
    CHECK(report.examples[0].em == 0);  // the film question can no longer be answered
    EvalReport baseline = run_benchmark(fx.dataset, fx.corpus, fx.indexes, fx.registry, cfg,
                                        {}, 1, fx.chat);
    CHECK(report.em_mean < baseline.em_mean);

    SUBCASE("disabling every cube is a configuration error") {
        AblationConfig all;
        all.disabled_cubes = {"CULTURAL_PRODUCT", "PERSON", "LOCATION"};
        CHECK_THROWS_AS(run_benchmark(fx.dataset, fx.corpus, fx.indexes, fx.registry, cfg,
                                      all, 1, fx.chat),
                        std::runtime_error);
    }
}

TEST_CASE("mode override lands in the effective retrieval config") {
    DemoEval fx;
    LoopConfig cfg;
    AblationConfig ablation;
    ablation.mode_override = RetrievalMode::exact_only;
    EvalReport report = run_benchmark(fx.dataset, fx.corpus, fx.indexes, fx.registry, cfg,
                                      ablation, 1, fx.chat);
    CHECK(report.config_snapshot["mode"] == "exact_only");
    CHECK(report.examples[0].em == 1);  // the fixture runs on exact matches anyway
}

TEST_CASE("per-example failures are recorded and the run continues") {
    DemoEval fx;
    std::vector<QAExample> dataset = fx.dataset;
    dataset.insert(dataset.begin(), {"a question no rule covers?", {"gold"}});
    LoopConfig cfg;
    EvalReport report =
        run_benchmark(dataset, fx.corpus, fx.indexes, fx.registry, cfg, {}, 1, fx.chat);
    REQUIRE(report.examples.size() == 4);
    CHECK(!report.examples[0].error.empty());
    CHECK(report.examples[0].em == 0);
    CHECK(report.examples[0].f1 == 0.0);
    CHECK(report.examples[1].em == 1);  // the rest of the run is unaffected
}

TEST_CASE("batched execution cuts per-query wall time") {
    DemoEval fx;
    ScriptedChatBackend slow;
    slow.add_rule({{"first, most direct"}, std::nullopt, "probe?"});
    slow.add_rule({{"Reply with exactly one cube name"}, std::nullopt, "PERSON"});
    slow.add_rule({{"Map the question onto"}, std::nullopt, "{}"});
    slow.add_rule({{"using only the passages"}, std::nullopt, "probe answer"});
    slow.add_rule({{"Provide the final answer"}, std::nullopt, "done"});
    slow.set_simulated_delay(std::chrono::milliseconds(25));

    std::vector<QAExample> dataset;
    for (int i = 0; i < 8; ++i)
        dataset.push_back({"trend question " + std::to_string(i) + "?", {"done"}});

    LoopConfig cfg;
    cfg.max_iterations = 1;
    EvalReport serial = run_benchmark(dataset, fx.corpus, fx.indexes, fx.registry, cfg, {},
                                      1, slow);
    EvalReport batched = run_benchmark(dataset, fx.corpus, fx.indexes, fx.registry, cfg, {},
                                       4, slow);
    CHECK(batched.per_query_wall_s < 0.6 * serial.per_query_wall_s);
    CHECK(serial.em_mean == 1.0);
    CHECK(batched.em_mean == 1.0);
}

TEST_CASE("load_dataset validates records") {
    auto p = std::filesystem::temp_directory_path() / "cubeqa_dataset_bad.jsonl";
    {
        std::ofstream out(p);
        out << R"({"question": "q", "answers": []})" << "\n";
    }
    CHECK_THROWS_AS(load_dataset(p), std::runtime_error);
}
