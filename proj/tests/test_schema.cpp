#include "doctest.h"

#include <fstream>
#include <random>

#include "cubeqa/llm.hpp"
#include "cubeqa/schema.hpp"

#include "test_support.hpp"

using namespace cubeqa;

namespace {

DimensionSpec dim(std::string name, DimensionKind kind, bool salient = true) {
    return {std::move(name), kind, "", {}, salient};
}

}  // namespace

TEST_CASE("dimensionality counts the subject plus salient axes") {
    CubeSpec subject_only;
    subject_only.cube_name = "S";
    subject_only.subject_dim = dim("name", DimensionKind::subject);
    CHECK(dimensionality(subject_only) == 1);

    CubeSpec small;
    small.cube_name = "FILM";
    small.subject_dim = dim("name", DimensionKind::subject);
    small.attribute_dims = {dim("genre", DimensionKind::attribute),
                            dim("date", DimensionKind::attribute)};
    small.relation_dims = {dim("to_person", DimensionKind::relation)};
    CHECK(dimensionality(small) == 4);

    // person cube: subject + role/occupation, behavior, nationality + two relations
    CubeSpec person;
    person.cube_name = "PERSON";
    person.subject_dim = dim("person_name", DimensionKind::subject);
    person.attribute_dims = {dim("role_occupation", DimensionKind::attribute),
                             dim("behavior", DimensionKind::attribute),
                             dim("nationality", DimensionKind::attribute)};
    person.relation_dims = {dim("relation_to_location", DimensionKind::relation),
                            dim("relation_to_product", DimensionKind::relation)};
    CHECK(dimensionality(person) == 6);
}

TEST_CASE("dimensionality ignores non-salient dimensions") {
    std::mt19937 rng(3);
    std::bernoulli_distribution flip(0.5);
    std::uniform_int_distribution<int> extra(0, 9);
    for (int trial = 0; trial < 200; ++trial) {
        CubeSpec spec;
        spec.cube_name = "R";
        spec.subject_dim = dim("subject", DimensionKind::subject);
        int expected = 1;
        int n = extra(rng);
        for (int i = 0; i < n; ++i) {
            bool salient = flip(rng);
            if (flip(rng))
                spec.attribute_dims.push_back(
                    dim("a" + std::to_string(i), DimensionKind::attribute, salient));
            else
                spec.relation_dims.push_back(
                    dim("r" + std::to_string(i), DimensionKind::relation, salient));
            if (salient) ++expected;
        }
        CHECK(dimensionality(spec) == expected);
    }
}

TEST_CASE("load_registry reads the three-cube schema") {
    CubeRegistry reg = load_registry(testsupport::fixture("demo_schema.json"));
    REQUIRE(reg.size() == 3);
    CHECK(reg.names() == std::vector<std::string>{"CULTURAL_PRODUCT", "PERSON", "LOCATION"});
    CHECK(reg.at("PERSON").subject_dim.name == "person_name");
    CHECK(reg.at("LOCATION").attribute_dims.size() == 1);
    CHECK(dimensionality(reg.at("CULTURAL_PRODUCT")) == 5);
}

TEST_CASE("load_registry is idempotent") {
    CubeRegistry a = load_registry(testsupport::fixture("demo_schema.json"));
    CubeRegistry b = load_registry(testsupport::fixture("demo_schema.json"));
    CHECK(a == b);
}

TEST_CASE("save_registry round-trips losslessly") {
    CubeRegistry original = load_registry(testsupport::fixture("demo_schema.json"));
    auto p = std::filesystem::temp_directory_path() / "cubeqa_test_schema_rt.json";
    save_registry(original, p);
    CHECK(load_registry(p) == original);
}

TEST_CASE("load_registry error paths") {
    auto write = [](const std::string& name, const std::string& body) {
        auto p = std::filesystem::temp_directory_path() / name;
        std::ofstream out(p);
        out << body;
        return p;
    };
    SUBCASE("empty registry rejected") {
        auto p = write("cubeqa_schema_empty.json", R"({"cubes": []})");
        CHECK_THROWS_AS(load_registry(p), std::runtime_error);
    }
    SUBCASE("missing subject dimension names the cube") {
        auto p = write("cubeqa_schema_nosubj.json", R"({"cubes": [{"name": "X", "dimensions": [
            {"name": "a", "kind": "attribute"}]}]})");
        CHECK_THROWS_WITH_AS(load_registry(p), doctest::Contains("X"), std::runtime_error);
    }
    SUBCASE("two subject dimensions name the cube") {
        auto p = write("cubeqa_schema_twosubj.json", R"({"cubes": [{"name": "Y", "dimensions": [
            {"name": "a", "kind": "subject"}, {"name": "b", "kind": "subject"}]}]})");
        CHECK_THROWS_WITH_AS(load_registry(p), doctest::Contains("Y"), std::runtime_error);
    }
    SUBCASE("duplicate cube names rejected") {
        auto p = write("cubeqa_schema_dup.json", R"({"cubes": [
            {"name": "Z", "dimensions": [{"name": "a", "kind": "subject"}]},
            {"name": "Z", "dimensions": [{"name": "a", "kind": "subject"}]}]})");
        CHECK_THROWS_AS(load_registry(p), std::runtime_error);
    }
    SUBCASE("duplicate dimension names rejected") {
        auto p = write("cubeqa_schema_dupdim.json", R"({"cubes": [{"name": "W", "dimensions": [
            {"name": "a", "kind": "subject"}, {"name": "a", "kind": "attribute"}]}]})");
        CHECK_THROWS_AS(load_registry(p), std::runtime_error);
    }
}

TEST_CASE("registry without() removes cubes but never all of them") {
    CubeRegistry reg = load_registry(testsupport::fixture("demo_schema.json"));
    CubeRegistry reduced = reg.without({"CULTURAL_PRODUCT"});
    CHECK(reduced.size() == 2);
    CHECK(!reduced.contains("CULTURAL_PRODUCT"));
    CHECK_THROWS_AS(reg.without({"CULTURAL_PRODUCT", "PERSON", "LOCATION"}),
                    std::runtime_error);
    CHECK_THROWS_AS(reg.without({"NOPE"}), std::runtime_error);
}

TEST_CASE("parse_ontology_reply handles the two-level tree") {
    std::string reply =
        "Level 1: Culture Product\n"
        "Level 2: Attributes: Genre, Release Date, Rating\n"
        "Level 2: Relations: directed by, produced by\n"
        "\n"
        "1. Level 1: Person\n"
        "   Level 2: Role, Nationality\n"
        "   Level 2: born in, married to\n";
    Ontology o = parse_ontology_reply(reply);
    REQUIRE(o.classes.size() == 2);
    CHECK(o.classes[0].name == "Culture Product");
    CHECK(o.classes[0].attribute_types ==
          std::vector<std::string>{"Genre", "Release Date", "Rating"});
    CHECK(o.classes[0].relation_types ==
          std::vector<std::string>{"directed by", "produced by"});
    CHECK(o.classes[1].name == "Person");
    CHECK(o.classes[1].attribute_types == std::vector<std::string>{"Role", "Nationality"});
    CHECK(o.classes[1].relation_types == std::vector<std::string>{"born in", "married to"});
}

TEST_CASE("parse_ontology_reply error paths") {
    CHECK_THROWS_AS(parse_ontology_reply(""), OntologyParseError);
    CHECK_THROWS_AS(parse_ontology_reply("no tree here at all"), OntologyParseError);
    try {
        parse_ontology_reply("Level 2: Genre, Date\nLevel 1: Film");
        FAIL("expected OntologyParseError");
    } catch (const OntologyParseError& e) {
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
        CHECK(e.raw_reply.find("Level 2: Genre") != std::string::npos);
    }
}

TEST_CASE("draft_ontology extracts only what the backend replied") {
    ScriptedChatBackend chat;
    chat.add_rule({{"two-level tree"},
                   std::nullopt,
                   "Level 1: Culture Product\nLevel 2: Attributes: Genre\nLevel 2: "
                   "Relations: directed by\nLevel 1: Person\nLevel 2: Role\nLevel 2: born in"});
    std::vector<Document> sample = {{"d1", std::nullopt, "some passage"}};
    Ontology o = draft_ontology(sample, chat);
    REQUIRE(o.classes.size() == 2);
    CHECK(o.classes[0].name == "Culture Product");
    CHECK(o.classes[1].relation_types == std::vector<std::string>{"born in"});

    SUBCASE("classes never invented: random trees parse back exactly") {
        std::mt19937 rng(5);
        std::uniform_int_distribution<int> n_classes(1, 4);
        std::uniform_int_distribution<int> n_items(1, 3);
        for (int trial = 0; trial < 100; ++trial) {
            std::string reply;
            std::vector<std::string> expected_names;
            int nc = n_classes(rng);
            for (int c = 0; c < nc; ++c) {
                std::string name = "Class" + std::to_string(trial) + "_" + std::to_string(c);
                expected_names.push_back(name);
                reply += "Level 1: " + name + "\nLevel 2: ";
                int na = n_items(rng);
                for (int i = 0; i < na; ++i) reply += "attr" + std::to_string(i) + ", ";
                reply += "\nLevel 2: rel0\n";
            }
            Ontology parsed = parse_ontology_reply(reply);
            REQUIRE(parsed.classes.size() == expected_names.size());
            for (std::size_t i = 0; i < expected_names.size(); ++i)
                CHECK(parsed.classes[i].name == expected_names[i]);
        }
    }
}
