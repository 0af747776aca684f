#pragma once
// Cube schemas: one subject dimension plus salient attribute/relation
// dimensions per subject class, loaded from a declarative JSON file.

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cubeqa/corpus.hpp"

namespace cubeqa {

class ChatBackend;

enum class DimensionKind { subject, attribute, relation };

std::string_view to_string(DimensionKind kind);
DimensionKind dimension_kind_from_string(std::string_view s);

struct DimensionSpec {
    std::string name;
    DimensionKind kind = DimensionKind::attribute;
    std::string description;
    std::vector<std::string> example_values;
    bool salient = true;  // only salient dimensions count as cube axes

    bool operator==(const DimensionSpec&) const = default;
};

struct CubeSpec {
    std::string cube_name;
    DimensionSpec subject_dim;
    std::vector<DimensionSpec> attribute_dims;
    std::vector<DimensionSpec> relation_dims;

    bool operator==(const CubeSpec&) const = default;

    bool has_dimension(std::string_view name) const;
    const DimensionSpec* find_dimension(std::string_view name) const;
    // subject first, then attributes, then relations (declaration order)
    std::vector<const DimensionSpec*> all_dimensions() const;
};

// Throws when the spec violates its structural invariants (empty names,
// duplicate dimension names, kind mismatches).
void validate_spec(const CubeSpec& spec);

// Cube axis count: the subject axis plus each salient attribute and salient
// relation dimension.
int dimensionality(const CubeSpec& spec);

struct OntologyClass {
    std::string name;
    std::vector<std::string> subjects;         // instance examples, may be empty
    std::vector<std::string> attribute_types;  // count M
    std::vector<std::string> relation_types;   // count N

    bool operator==(const OntologyClass&) const = default;
};

struct Ontology {
    std::vector<OntologyClass> classes;

    bool operator==(const Ontology&) const = default;
};

struct OntologyParseError : std::runtime_error {
    std::string raw_reply;
    OntologyParseError(const std::string& msg, std::string raw)
        : std::runtime_error(msg), raw_reply(std::move(raw)) {}
};

class CubeRegistry {
public:
    CubeRegistry() = default;
    // Validates every spec, rejects duplicate cube names and empty registries.
    static CubeRegistry from_specs(std::vector<CubeSpec> specs);

    const std::vector<CubeSpec>& specs() const { return specs_; }
    std::size_t size() const { return specs_.size(); }
    std::vector<std::string> names() const;  // declaration order
    bool contains(std::string_view cube_name) const;
    const CubeSpec* find(std::string_view cube_name) const;
    const CubeSpec& at(std::string_view cube_name) const;

    // Registry with the given cubes removed; throws when a name is unknown
    // or when nothing would remain.
    CubeRegistry without(const std::set<std::string>& disabled) const;

    bool operator==(const CubeRegistry& other) const { return specs_ == other.specs_; }

private:
    std::vector<CubeSpec> specs_;
};

// Schema file: {"cubes":[{"name":..., "dimensions":[{"name":..., "kind":...,
// "description":..., "examples":[...], "salient":true}, ...]}]}
CubeRegistry load_registry(const std::filesystem::path& path);
void save_registry(const CubeRegistry& registry, const std::filesystem::path& path);

// Prompts the backend for a two-level subject/attribute/relation tree over a
// corpus sample and parses the reply. Extraction only: classes absent from
// the reply are never invented.
Ontology draft_ontology(std::span<const Document> sample, ChatBackend& chat);

std::string render_ontology_prompt(std::span<const Document> sample);
Ontology parse_ontology_reply(const std::string& reply);

}  // namespace cubeqa
