#include "cubeqa/index.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

namespace cubeqa {

using nlohmann::json;

const std::vector<std::string>* CubeIndex::postings_for(std::string_view dimension,
                                                        std::string_view value) const {
    auto dim_it = postings_.find(std::string(dimension));
    if (dim_it == postings_.end()) return nullptr;
    auto val_it = dim_it->second.find(std::string(value));
    if (val_it == dim_it->second.end()) return nullptr;
    return &val_it->second;
}

const DimensionTags* CubeIndex::tags_for(std::string_view doc_id) const {
    auto it = doc_tags_.find(std::string(doc_id));
    return it == doc_tags_.end() ? nullptr : &it->second;
}

std::size_t CubeIndex::cell_count() const {
    std::size_t n = 0;
    for (const auto& [dim, values] : postings_) n += values.size();
    return n;
}

std::size_t CubeIndex::posting_entry_count() const {
    std::size_t n = 0;
    for (const auto& [dim, values] : postings_)
        for (const auto& [value, ids] : values) n += ids.size();
    return n;
}

void CubeIndex::insert(const std::string& doc_id, const DimensionTags& tags,
                       EmbeddingBackend* embed) {
    if (doc_id.empty()) throw std::runtime_error("index: empty doc_id");
    if (doc_tags_.count(doc_id))
        throw std::runtime_error("index: doc_id '" + doc_id + "' already indexed in cube '" +
                                 spec_.cube_name + "'");

    DimensionTags kept;
    for (const auto& [dim, values] : tags) {
        if (!spec_.has_dimension(dim))
            throw std::runtime_error("index: dimension '" + dim + "' not in cube '" +
                                     spec_.cube_name + "'");
        std::vector<std::string> vs;
        for (const auto& v : values)
            if (!v.empty()) vs.push_back(v);
        std::sort(vs.begin(), vs.end());
        vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
        if (!vs.empty()) kept.emplace(dim, std::move(vs));
    }

    // embeddings first: a backend failure must not leave a half-inserted doc
    if (embed) {
        std::vector<std::string> missing;
        for (const auto& [dim, values] : kept)
            for (const auto& v : values)
                if (!value_embeddings_.count(v)) missing.push_back(v);
        std::sort(missing.begin(), missing.end());
        missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
        if (!missing.empty()) {
            auto vectors = embed->embed(missing);
            for (std::size_t i = 0; i < missing.size(); ++i)
                value_embeddings_.emplace(missing[i], std::move(vectors[i]));
        }
    }

    for (const auto& [dim, values] : kept) {
        auto& by_value = postings_[dim];
        for (const auto& v : values) {
            auto& ids = by_value[v];
            auto pos = std::lower_bound(ids.begin(), ids.end(), doc_id);
            ids.insert(pos, doc_id);
        }
    }
    doc_tags_.emplace(doc_id, std::move(kept));
}

bool CubeIndex::operator==(const CubeIndex& other) const {
    return spec_ == other.spec_ && postings_ == other.postings_ &&
           doc_tags_ == other.doc_tags_ && value_embeddings_ == other.value_embeddings_;
}

DimensionTags canonicalize_tags(const DimensionTags& raw, const CubeSpec& spec,
                                std::vector<std::string>* warnings) {
    DimensionTags out;
    for (const auto& [dim, values] : raw) {
        if (!spec.has_dimension(dim)) {
            if (warnings)
                warnings->push_back("cube '" + spec.cube_name + "': dropped unknown dimension '" +
                                    dim + "'");
            continue;
        }
        std::vector<std::string> vs;
        for (const auto& v : values) {
            std::string n = normalize_value(v);
            if (!n.empty()) vs.push_back(std::move(n));
        }
        std::sort(vs.begin(), vs.end());
        vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
        if (!vs.empty()) out.emplace(dim, std::move(vs));
    }
    return out;
}

std::string render_tagging_prompt(const Document& doc, std::span<const CubeSpec> specs) {
    std::ostringstream os;
    os << "Extract the values this document instantiates along the cube dimensions "
          "listed below. Reply with a single JSON object keyed by cube name; each cube "
          "maps dimension names to arrays of short value strings. Skip dimensions the "
          "document says nothing about; skip cubes entirely when no dimension applies.\n\n";
    for (const auto& spec : specs) {
        os << "Cube " << spec.cube_name << ":\n";
        for (const auto* d : spec.all_dimensions()) {
            os << "  - " << d->name;
            if (!d->description.empty()) os << ": " << d->description;
            if (!d->example_values.empty()) {
                os << " (e.g. ";
                for (std::size_t i = 0; i < d->example_values.size() && i < 4; ++i) {
                    if (i) os << ", ";
                    os << d->example_values[i];
                }
                os << ")";
            }
            os << "\n";
        }
    }
    os << "\nDocument";
    if (doc.title) os << " [" << *doc.title << "]";
    os << ":\n" << doc.text << "\n";
    return os.str();
}

std::map<std::string, DimensionTags> parse_tag_reply(const std::string& reply,
                                                     std::span<const CubeSpec> specs,
                                                     std::vector<std::string>* warnings) {
    json j = json::parse(strip_code_fence(reply), nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw BackendError("tagging: unparseable reply: " + reply.substr(0, 200));

    std::map<std::string, DimensionTags> out;
    for (const auto& spec : specs) out.emplace(spec.cube_name, DimensionTags{});

    for (const auto& [cube_name, dims] : j.items()) {
        const CubeSpec* spec = nullptr;
        for (const auto& s : specs)
            if (s.cube_name == cube_name) spec = &s;
        if (!spec) {
            if (warnings) warnings->push_back("tagging: dropped unknown cube '" + cube_name + "'");
            continue;
        }
        if (!dims.is_object()) {
            if (warnings)
                warnings->push_back("tagging: cube '" + cube_name + "' entry is not an object");
            continue;
        }
        DimensionTags raw;
        for (const auto& [dim, values] : dims.items()) {
            auto& vs = raw[dim];
            if (values.is_array()) {
                for (const auto& v : values)
                    if (v.is_string()) vs.push_back(v.get<std::string>());
            } else if (values.is_string()) {
                vs.push_back(values.get<std::string>());
            }
        }
        out[cube_name] = canonicalize_tags(raw, *spec, warnings);
    }
    return out;
}

std::map<std::string, DimensionTags> tag_document(const Document& doc,
                                                  std::span<const CubeSpec> specs,
                                                  ChatBackend& chat,
                                                  std::vector<std::string>* warnings) {
    if (specs.empty()) throw std::runtime_error("tagging: no cube specs");
    ChatRequest req;
    req.user = render_tagging_prompt(doc, specs);
    req.max_tokens = 2048;
    ChatResponse resp = chat.complete(req);
    return parse_tag_reply(resp.text, specs, warnings);
}

BuildResult build_index(const Corpus& corpus, std::span<const CubeSpec> specs,
                        ChatBackend& chat, EmbeddingBackend* embed) {
    if (corpus.empty()) throw std::runtime_error("build: corpus is empty");
    if (specs.empty()) throw std::runtime_error("build: no cube specs");

    BuildResult result;
    for (const auto& spec : specs) result.indexes.emplace(spec.cube_name, CubeIndex(spec));
    result.report.documents_total = corpus.size();

    for (const auto& doc : corpus) {
        std::map<std::string, DimensionTags> tags;
        try {
            tags = tag_document(doc, specs, chat, &result.report.warnings);
        } catch (const std::exception& e) {
            result.report.failures.emplace_back(doc.doc_id, e.what());
            continue;
        }
        ++result.report.documents_tagged;
        for (auto& [cube_name, cube_tags] : tags) {
            if (cube_tags.empty()) continue;  // document instantiates nothing in this cube
            result.indexes.at(cube_name).insert(doc.doc_id, cube_tags, embed);
        }
    }
    return result;
}

}  // namespace cubeqa
