#pragma once
// Canonical form for cube cell values and query entities. Exact matching
// compares these normalized strings byte-for-byte.

#include <string>
#include <string_view>

namespace cubeqa {

// Folds Unicode compatibility forms (fullwidth ASCII, typographic quotes and
// dashes, non-breaking spaces, fi/fl ligatures), lowercases ASCII and Latin-1
// letters, collapses whitespace runs, trims, and strips one level of
// enclosing quotes. Empty output is legal; callers drop empty values.
std::string normalize_value(std::string_view raw);

}  // namespace cubeqa
