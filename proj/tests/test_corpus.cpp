#include "doctest.h"

#include <fstream>
#include <random>

#include "cubeqa/corpus.hpp"

#include "test_support.hpp"

using namespace cubeqa;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("cubeqa_test_" + name);
    std::filesystem::remove(p);
    return p;
}

void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
    std::ofstream out(p);
    for (const auto& l : lines) out << l << "\n";
}

}  // namespace

TEST_CASE("load_corpus keeps ids and order") {
    auto p = temp_file("corpus_abc.jsonl");
    write_lines(p, {
                       R"({"id": "a", "text": "alpha"})",
                       R"({"id": "b", "title": "B", "text": "beta"})",
                       R"({"id": "c", "text": "gamma", "extra": 42})",
                   });
    Corpus c = load_corpus(p);
    REQUIRE(c.size() == 3);
    CHECK(c.documents()[0].doc_id == "a");
    CHECK(c.documents()[1].doc_id == "b");
    CHECK(c.documents()[2].doc_id == "c");
    CHECK(c.at("b").title == "B");
    CHECK(!c.at("a").title.has_value());
    CHECK(c.at("c").text == "gamma");  // unknown fields ignored
}

TEST_CASE("load_corpus rejects duplicate ids naming the id") {
    auto p = temp_file("corpus_dup.jsonl");
    write_lines(p, {
                       R"({"id": "a", "text": "one"})",
                       R"({"id": "b", "text": "two"})",
                       R"({"id": "a", "text": "three"})",
                   });
    CHECK_THROWS_WITH_AS(load_corpus(p), doctest::Contains("'a'"), std::runtime_error);
}

TEST_CASE("load_corpus reports the malformed line number") {
    auto p = temp_file("corpus_bad.jsonl");
    write_lines(p, {
                       R"({"id": "a", "text": "one"})",
                       R"(not json at all)",
                   });
    CHECK_THROWS_WITH_AS(load_corpus(p), doctest::Contains("line 2"), std::runtime_error);

    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_corpus(temp_file("no_such_file.jsonl")), std::runtime_error);
    }
    SUBCASE("empty text rejected") {
        write_lines(p, {R"({"id": "a", "text": ""})"});
        CHECK_THROWS_AS(load_corpus(p), std::runtime_error);
    }
}

TEST_CASE("the worked-example corpus loads with its six passages") {
    Corpus c = load_corpus(testsupport::fixture("demo_corpus.jsonl"));
    REQUIRE(c.size() == 6);
    CHECK(c.at("doc-el-tonto").text.find("written and directed by Charlie Day") !=
          std::string::npos);
    CHECK(c.at("doc-doreon").text.find("directed by Robert North Bradbury") !=
          std::string::npos);
    CHECK(c.at("doc-charlie-day").text.find("born February 9, 1976") != std::string::npos);
    CHECK(c.at("doc-bradbury").text.find("March 23, 1886") != std::string::npos);
}

TEST_CASE("append_documents") {
    std::vector<Document> docs;
    for (int i = 0; i < 4; ++i)
        docs.push_back({"id" + std::to_string(i), std::nullopt, "text " + std::to_string(i)});
    Corpus base(docs);

    SUBCASE("empty append leaves the corpus unchanged") {
        Corpus extended = append_documents(base, {});
        CHECK(extended.size() == 4);
        CHECK(extended.documents() == base.documents());
    }
    SUBCASE("fresh docs extend by their count, originals untouched") {
        std::vector<Document> fresh = {{"id4", "T", "four"}, {"id5", std::nullopt, "five"}};
        Corpus extended = append_documents(base, fresh);
        CHECK(extended.size() == 6);
        CHECK(extended.at("id4").text == "four");
        CHECK(extended.at("id1").text == "text 1");
        CHECK(base.size() == 4);  // input untouched
    }
    SUBCASE("id collision appends nothing") {
        std::vector<Document> bad = {{"fresh", std::nullopt, "x"}, {"id2", std::nullopt, "y"}};
        CHECK_THROWS_WITH_AS(append_documents(base, bad), doctest::Contains("id2"),
                             std::runtime_error);
        CHECK(base.size() == 4);
    }
    SUBCASE("collision within the batch appends nothing") {
        std::vector<Document> bad = {{"z", std::nullopt, "x"}, {"z", std::nullopt, "y"}};
        CHECK_THROWS_AS(append_documents(base, bad), std::runtime_error);
    }
}

TEST_CASE("save/load round-trip preserves ids, order and bytes") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> len(1, 40);
    std::uniform_int_distribution<int> ch(0x20, 0x7E);
    std::vector<Document> docs;
    for (int i = 0; i < 50; ++i) {
        std::string text;
        int n = len(rng);
        for (int k = 0; k < n; ++k) text.push_back(static_cast<char>(ch(rng)));
        text += " café ✓";  // exercise multi-byte UTF-8
        Document d{"doc" + std::to_string(i), std::nullopt, text};
        if (i % 3 == 0) d.title = "title " + std::to_string(i);
        if (i % 5 == 0) d.title = "";  // empty title stays distinct from missing
        docs.push_back(std::move(d));
    }
    Corpus original(docs);
    auto p = temp_file("corpus_roundtrip.jsonl");
    save_corpus(original, p);
    Corpus loaded = load_corpus(p);
    REQUIRE(loaded.size() == original.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        CHECK(loaded.documents()[i].doc_id == original.documents()[i].doc_id);
        CHECK(loaded.documents()[i].text == original.documents()[i].text);
        CHECK(loaded.documents()[i].title == original.documents()[i].title);
    }
}
