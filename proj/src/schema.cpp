#include "cubeqa/schema.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "cubeqa/llm.hpp"

namespace cubeqa {

using nlohmann::json;

std::string_view to_string(DimensionKind kind) {
    switch (kind) {
        case DimensionKind::subject: return "subject";
        case DimensionKind::attribute: return "attribute";
        case DimensionKind::relation: return "relation";
    }
    return "attribute";
}

DimensionKind dimension_kind_from_string(std::string_view s) {
    if (s == "subject") return DimensionKind::subject;
    if (s == "attribute") return DimensionKind::attribute;
    if (s == "relation") return DimensionKind::relation;
    throw std::runtime_error("schema: unknown dimension kind '" + std::string(s) + "'");
}

bool CubeSpec::has_dimension(std::string_view name) const {
    return find_dimension(name) != nullptr;
}

const DimensionSpec* CubeSpec::find_dimension(std::string_view name) const {
    if (subject_dim.name == name) return &subject_dim;
    for (const auto& d : attribute_dims)
        if (d.name == name) return &d;
    for (const auto& d : relation_dims)
        if (d.name == name) return &d;
    return nullptr;
}

std::vector<const DimensionSpec*> CubeSpec::all_dimensions() const {
    std::vector<const DimensionSpec*> out;
    out.reserve(1 + attribute_dims.size() + relation_dims.size());
    out.push_back(&subject_dim);
    for (const auto& d : attribute_dims) out.push_back(&d);
    for (const auto& d : relation_dims) out.push_back(&d);
    return out;
}

void validate_spec(const CubeSpec& spec) {
    if (spec.cube_name.empty()) throw std::runtime_error("schema: cube with empty name");
    if (spec.subject_dim.kind != DimensionKind::subject)
        throw std::runtime_error("schema: cube '" + spec.cube_name +
                                 "' subject dimension has non-subject kind");
    for (const auto& d : spec.attribute_dims)
        if (d.kind != DimensionKind::attribute)
            throw std::runtime_error("schema: cube '" + spec.cube_name + "' dimension '" +
                                     d.name + "' listed as attribute but kind differs");
    for (const auto& d : spec.relation_dims)
        if (d.kind != DimensionKind::relation)
            throw std::runtime_error("schema: cube '" + spec.cube_name + "' dimension '" +
                                     d.name + "' listed as relation but kind differs");
    std::unordered_set<std::string> seen;
    for (const auto* d : spec.all_dimensions()) {
        if (d->name.empty())
            throw std::runtime_error("schema: cube '" + spec.cube_name +
                                     "' has a dimension with empty name");
        if (!seen.insert(d->name).second)
            throw std::runtime_error("schema: cube '" + spec.cube_name +
                                     "' has duplicate dimension '" + d->name + "'");
    }
}

int dimensionality(const CubeSpec& spec) {
    validate_spec(spec);
    int axes = 1;  // subject axis
    for (const auto& d : spec.attribute_dims)
        if (d.salient) ++axes;
    for (const auto& d : spec.relation_dims)
        if (d.salient) ++axes;
    return axes;
}

CubeRegistry CubeRegistry::from_specs(std::vector<CubeSpec> specs) {
    if (specs.empty()) throw std::runtime_error("schema: registry must contain at least one cube");
    std::unordered_set<std::string> seen;
    for (const auto& s : specs) {
        validate_spec(s);
        if (!seen.insert(s.cube_name).second)
            throw std::runtime_error("schema: duplicate cube name '" + s.cube_name + "'");
    }
    CubeRegistry reg;
    reg.specs_ = std::move(specs);
    return reg;
}

std::vector<std::string> CubeRegistry::names() const {
    std::vector<std::string> out;
    out.reserve(specs_.size());
    for (const auto& s : specs_) out.push_back(s.cube_name);
    return out;
}

bool CubeRegistry::contains(std::string_view cube_name) const {
    return find(cube_name) != nullptr;
}

const CubeSpec* CubeRegistry::find(std::string_view cube_name) const {
    for (const auto& s : specs_)
        if (s.cube_name == cube_name) return &s;
    return nullptr;
}

const CubeSpec& CubeRegistry::at(std::string_view cube_name) const {
    const CubeSpec* s = find(cube_name);
    if (!s) throw std::runtime_error("schema: unknown cube '" + std::string(cube_name) + "'");
    return *s;
}

CubeRegistry CubeRegistry::without(const std::set<std::string>& disabled) const {
    for (const auto& name : disabled)
        if (!contains(name))
            throw std::runtime_error("schema: cannot disable unknown cube '" + name + "'");
    std::vector<CubeSpec> kept;
    for (const auto& s : specs_)
        if (!disabled.count(s.cube_name)) kept.push_back(s);
    if (kept.empty())
        throw std::runtime_error("schema: disabling every cube leaves no retriever");
    return from_specs(std::move(kept));
}

namespace {

json dimension_to_json(const DimensionSpec& d) {
    json j;
    j["name"] = d.name;
    j["kind"] = std::string(to_string(d.kind));
    j["description"] = d.description;
    j["examples"] = d.example_values;
    j["salient"] = d.salient;
    return j;
}

DimensionSpec dimension_from_json(const json& j, const std::string& cube_name) {
    DimensionSpec d;
    d.name = j.value("name", "");
    if (d.name.empty())
        throw std::runtime_error("schema: cube '" + cube_name +
                                 "' has a dimension without a name");
    d.kind = dimension_kind_from_string(j.value("kind", "attribute"));
    d.description = j.value("description", "");
    for (const auto& e : j.value("examples", json::array()))
        d.example_values.push_back(e.get<std::string>());
    d.salient = j.value("salient", true);
    return d;
}

}  // namespace

json cube_spec_to_json(const CubeSpec& spec) {
    json dims = json::array();
    dims.push_back(dimension_to_json(spec.subject_dim));
    for (const auto& d : spec.attribute_dims) dims.push_back(dimension_to_json(d));
    for (const auto& d : spec.relation_dims) dims.push_back(dimension_to_json(d));
    json j;
    j["name"] = spec.cube_name;
    j["dimensions"] = std::move(dims);
    return j;
}

CubeSpec cube_spec_from_json(const json& j) {
    CubeSpec spec;
    spec.cube_name = j.value("name", "");
    bool have_subject = false;
    for (const auto& dj : j.value("dimensions", json::array())) {
        DimensionSpec d = dimension_from_json(dj, spec.cube_name);
        switch (d.kind) {
            case DimensionKind::subject:
                if (have_subject)
                    throw std::runtime_error("schema: cube '" + spec.cube_name +
                                             "' declares more than one subject dimension");
                spec.subject_dim = std::move(d);
                have_subject = true;
                break;
            case DimensionKind::attribute:
                spec.attribute_dims.push_back(std::move(d));
                break;
            case DimensionKind::relation:
                spec.relation_dims.push_back(std::move(d));
                break;
        }
    }
    if (!have_subject)
        throw std::runtime_error("schema: cube '" + spec.cube_name +
                                 "' is missing a subject dimension");
    validate_spec(spec);
    return spec;
}

CubeRegistry load_registry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("schema: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("schema: bad JSON in " + path.string() + ": " + e.what());
    }
    std::vector<CubeSpec> specs;
    for (const auto& cj : j.value("cubes", json::array()))
        specs.push_back(cube_spec_from_json(cj));
    if (specs.empty())
        throw std::runtime_error("schema: no cubes declared in " + path.string());
    return CubeRegistry::from_specs(std::move(specs));
}

void save_registry(const CubeRegistry& registry, const std::filesystem::path& path) {
    json cubes = json::array();
    for (const auto& s : registry.specs()) cubes.push_back(cube_spec_to_json(s));
    json j;
    j["cubes"] = std::move(cubes);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("schema: cannot write " + path.string());
    out << j.dump(2) << "\n";
}

std::string render_ontology_prompt(std::span<const Document> sample) {
    std::ostringstream os;
    os << "Read the documents below and extract an ontology: the subject classes they "
          "describe, and for each class its attribute types and relation types.\n\n"
       << "Output a two-level tree, one class at a time, exactly in this shape:\n"
       << "Level 1: <subject class>\n"
       << "Level 2: Attributes: <attribute type>, <attribute type>, ...\n"
       << "Level 2: Relations: <relation type>, <relation type>, ...\n\n"
       << "Group similar topics under one general subject class, and group similar "
          "attribute or relation types together.\n\nDocuments:\n";
    for (const auto& d : sample) {
        os << "- ";
        if (d.title) os << *d.title << ": ";
        os << d.text << "\n";
    }
    return os.str();
}

namespace {

std::string trim_copy(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    size_t e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower_copy(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

// Matches "Level 1:"/"Level 2:" with optional list numbering or bullets in
// front, returns the remainder after the colon/dash.
bool match_level_line(const std::string& line, int& level, std::string& rest) {
    std::string low = lower_copy(line);
    size_t pos = low.find("level");
    if (pos == std::string::npos) return false;
    // only bullets/numbering may precede "level"
    for (size_t i = 0; i < pos; ++i) {
        char c = low[i];
        if (!(std::isspace(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) ||
              c == '-' || c == '*' || c == '.' || c == ')' || c == '('))
            return false;
    }
    size_t i = pos + 5;
    while (i < low.size() && std::isspace(static_cast<unsigned char>(low[i]))) ++i;
    if (i >= low.size() || !std::isdigit(static_cast<unsigned char>(low[i]))) return false;
    level = low[i] - '0';
    ++i;
    while (i < low.size() && (std::isspace(static_cast<unsigned char>(low[i])) || low[i] == ':' ||
                              low[i] == '-' || low[i] == '.'))
        ++i;
    rest = trim_copy(line.substr(i));
    return level == 1 || level == 2;
}

// Strips an optional leading "Subject:", "Attributes:", "Relations:" label.
// Returns which label was present ('s', 'a', 'r', or 0).
char strip_bucket_label(std::string& rest) {
    std::string low = lower_copy(rest);
    struct Label {
        const char* text;
        char code;
    };
    static const Label labels[] = {
        {"subjects", 's'}, {"subject", 's'},  {"attributes", 'a'},
        {"attribute", 'a'}, {"relations", 'r'}, {"relation", 'r'},
    };
    for (const auto& l : labels) {
        size_t n = std::strlen(l.text);
        if (low.rfind(l.text, 0) == 0) {
            size_t i = n;
            while (i < rest.size() && (rest[i] == ' ' || rest[i] == ':' || rest[i] == '-')) ++i;
            if (i < rest.size() || i == rest.size()) {
                rest = trim_copy(rest.substr(i));
                return l.code;
            }
        }
    }
    return 0;
}

std::vector<std::string> split_items(const std::string& rest) {
    std::vector<std::string> items;
    std::string current;
    std::istringstream is(rest);
    while (std::getline(is, current, ',')) {
        std::string item = trim_copy(current);
        // drop trailing ellipses artifacts
        while (!item.empty() && (item.back() == '.' || item.back() == ';')) item.pop_back();
        item = trim_copy(item);
        if (item == "..." || item.empty()) continue;
        items.push_back(item);
    }
    return items;
}

}  // namespace

Ontology parse_ontology_reply(const std::string& reply) {
    std::string body = strip_code_fence(reply);
    if (trim_copy(body).empty())
        throw OntologyParseError("ontology parse: empty reply", reply);

    Ontology ontology;
    OntologyClass* current = nullptr;
    int level2_seen = 0;

    std::istringstream is(body);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string t = trim_copy(line);
        if (t.empty()) continue;
        int level = 0;
        std::string rest;
        if (!match_level_line(t, level, rest)) continue;
        if (level == 1) {
            std::string name = rest;
            strip_bucket_label(name);  // tolerate "Level 1: Subject: Person"
            if (name.empty())
                throw OntologyParseError(
                    "ontology parse: empty class name at line " + std::to_string(line_no),
                    reply);
            ontology.classes.push_back(OntologyClass{name, {}, {}, {}});
            current = &ontology.classes.back();
            level2_seen = 0;
        } else {
            if (!current)
                throw OntologyParseError(
                    "ontology parse: Level 2 before any Level 1 at line " +
                        std::to_string(line_no),
                    reply);
            char bucket = strip_bucket_label(rest);
            auto items = split_items(rest);
            ++level2_seen;
            if (bucket == 0) bucket = (level2_seen == 1) ? 'a' : 'r';
            auto& target = (bucket == 'r')   ? current->relation_types
                           : (bucket == 's') ? current->subjects
                                             : current->attribute_types;
            target.insert(target.end(), items.begin(), items.end());
        }
    }
    if (ontology.classes.empty())
        throw OntologyParseError("ontology parse: no Level 1 line found", reply);
    return ontology;
}

Ontology draft_ontology(std::span<const Document> sample, ChatBackend& chat) {
    if (sample.empty()) throw std::runtime_error("draft_ontology: empty document sample");
    ChatRequest req;
    req.user = render_ontology_prompt(sample);
    req.max_tokens = 2048;
    ChatResponse resp = chat.complete(req);
    return parse_ontology_reply(resp.text);
}

}  // namespace cubeqa
