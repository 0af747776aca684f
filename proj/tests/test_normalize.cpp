#include "doctest.h"

#include <random>

#include "cubeqa/normalize.hpp"

using cubeqa::normalize_value;

TEST_CASE("normalize_value canonical forms") {
    CHECK(normalize_value("  The Heart Of  Doreon ") == "the heart of doreon");
    CHECK(normalize_value("FILM") == "film");
    CHECK(normalize_value("Robert N. Bradbury") == "robert n. bradbury");
}

TEST_CASE("normalize_value strips enclosing quotes only") {
    CHECK(normalize_value("\"El Tonto\"") == "el tonto");
    CHECK(normalize_value("'El Tonto'") == "el tonto");
    CHECK(normalize_value("“El Tonto”") == "el tonto");  // curly quotes
    CHECK(normalize_value("it's") == "it's");
    CHECK(normalize_value("\"a\" and \"b\"") == "\"a\" and \"b\"");
}

TEST_CASE("normalize_value folds compatibility characters") {
    CHECK(normalize_value("a b") == "a b");        // no-break space
    CHECK(normalize_value("ＦＩＬＭ") == "film");  // fullwidth
    CHECK(normalize_value("en–dash") == "en-dash");
    CHECK(normalize_value("cafÉ") == "café");  // Latin-1 uppercase E-acute
    CHECK(normalize_value("ﬁlm") == "film");        // fi ligature
    CHECK(normalize_value("") == "");
    CHECK(normalize_value("   ") == "");
    CHECK(normalize_value("\"\"") == "");
}

TEST_CASE("normalize_value is idempotent") {
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> len(0, 30);
    std::uniform_int_distribution<int> ch(0x09, 0x7E);
    for (int trial = 0; trial < 500; ++trial) {
        std::string s;
        int n = len(rng);
        for (int i = 0; i < n; ++i) s.push_back(static_cast<char>(ch(rng)));
        std::string once = normalize_value(s);
        CHECK(normalize_value(once) == once);
    }
}
