#include "cubeqa/retriever.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cubeqa {

using nlohmann::json;

std::size_t QueryDecomposition::entity_count() const {
    std::size_t n = unassigned.size();
    for (const auto& [dim, es] : per_dimension) n += es.size();
    return n;
}

std::string_view to_string(RetrievalMode mode) {
    switch (mode) {
        case RetrievalMode::exact_only: return "exact_only";
        case RetrievalMode::semantic_only: return "semantic_only";
        case RetrievalMode::hybrid: return "hybrid";
    }
    return "hybrid";
}

RetrievalMode retrieval_mode_from_string(std::string_view s) {
    if (s == "exact_only" || s == "exact") return RetrievalMode::exact_only;
    if (s == "semantic_only" || s == "semantic") return RetrievalMode::semantic_only;
    if (s == "hybrid") return RetrievalMode::hybrid;
    throw std::runtime_error("retrieval: unknown mode '" + std::string(s) + "'");
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size())
        throw std::runtime_error("cosine: dimension mismatch (" + std::to_string(a.size()) +
                                 " vs " + std::to_string(b.size()) + ")");
    double dot = 0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += double(a[i]) * double(b[i]);
    return dot;  // inputs are unit-norm
}

std::string render_decomposition_prompt(const std::string& query, const CubeSpec& spec) {
    std::ostringstream os;
    os << "Map the question onto the dimensions of cube " << spec.cube_name
       << ". Reply with a JSON object whose keys are dimension names from the list below "
          "and whose values are arrays of short entities or phrases taken from the "
          "question. Put entities that fit no listed dimension under \"unassigned\", and "
          "skip dimensions the question does not mention.\n\nDimensions:\n";
    for (const auto* d : spec.all_dimensions()) {
        os << "  - " << d->name;
        if (!d->description.empty()) os << ": " << d->description;
        os << "\n";
    }
    os << "\nQuestion: " << query << "\n";
    return os.str();
}

namespace {

void add_entities(std::vector<std::string>& target, const json& value) {
    auto push = [&target](const std::string& raw) {
        std::string n = normalize_value(raw);
        if (n.empty()) return;
        if (std::find(target.begin(), target.end(), n) == target.end()) target.push_back(n);
    };
    if (value.is_array()) {
        for (const auto& v : value)
            if (v.is_string()) push(v.get<std::string>());
    } else if (value.is_string()) {
        push(value.get<std::string>());
    }
}

}  // namespace

QueryDecomposition parse_decomposition_reply(const std::string& reply, const CubeSpec& spec) {
    QueryDecomposition decomp;
    json j = json::parse(strip_code_fence(reply), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        decomp.raw_reply = reply;
        return decomp;
    }
    for (const auto& [key, value] : j.items()) {
        if (key == "unassigned") {
            add_entities(decomp.unassigned, value);
        } else if (spec.has_dimension(key)) {
            std::vector<std::string> entities;
            add_entities(entities, value);
            if (!entities.empty()) decomp.per_dimension.emplace(key, std::move(entities));
        } else {
            // backend placed it on a dimension this cube does not have
            add_entities(decomp.unassigned, value);
        }
    }
    return decomp;
}

QueryDecomposition decompose_query(const std::string& query, const CubeSpec& spec,
                                   ChatBackend& chat) {
    if (query.empty()) return {};
    ChatRequest req;
    req.user = render_decomposition_prompt(query, spec);
    req.max_tokens = 512;
    ChatResponse resp = chat.complete(req);
    return parse_decomposition_reply(resp.text, spec);
}

namespace {

bool contains_sorted(const std::vector<std::string>& sorted_values, const std::string& v) {
    return std::binary_search(sorted_values.begin(), sorted_values.end(), v);
}

struct EntityRef {
    const std::string* dimension;  // nullptr when unassigned
    const std::string* entity;
};

std::vector<EntityRef> list_entities(const QueryDecomposition& decomp) {
    std::vector<EntityRef> out;
    for (const auto& [dim, es] : decomp.per_dimension)
        for (const auto& e : es) out.push_back({&dim, &e});
    for (const auto& e : decomp.unassigned) out.push_back({nullptr, &e});
    return out;
}

}  // namespace

ScoredDoc score_document(const DimensionTags& tags, const QueryDecomposition& decomp,
                         RetrievalMode mode, double tau,
                         const ValueEmbeddings& value_embeddings,
                         const EntityVectors& entity_vectors) {
    ScoredDoc out;
    auto entities = list_entities(decomp);
    std::vector<bool> exact_matched(entities.size(), false);

    if (mode != RetrievalMode::semantic_only) {
        for (std::size_t i = 0; i < entities.size(); ++i) {
            const auto& [dim, entity] = entities[i];
            if (dim) {
                auto it = tags.find(*dim);
                if (it != tags.end() && contains_sorted(it->second, *entity)) {
                    exact_matched[i] = true;
                    out.matches.push_back({*dim, *entity, *entity, MatchKind::exact, 1.0});
                    out.score += 1.0;
                }
            } else {
                for (const auto& [tag_dim, values] : tags) {
                    if (contains_sorted(values, *entity)) {
                        exact_matched[i] = true;
                        out.matches.push_back({tag_dim, *entity, *entity, MatchKind::exact, 1.0});
                        out.score += 1.0;
                        break;
                    }
                }
            }
        }
    }

    if (mode != RetrievalMode::exact_only) {
        for (std::size_t i = 0; i < entities.size(); ++i) {
            if (mode == RetrievalMode::hybrid && exact_matched[i]) continue;
            const auto& [dim, entity] = entities[i];
            auto ev_it = entity_vectors.find(*entity);
            if (ev_it == entity_vectors.end()) continue;  // no embedding: contributes 0

            double best = -2.0;
            const std::string* best_dim = nullptr;
            const std::string* best_value = nullptr;
            auto consider = [&](const std::string& tag_dim,
                                const std::vector<std::string>& values) {
                for (const auto& v : values) {
                    auto emb_it = value_embeddings.find(v);
                    if (emb_it == value_embeddings.end()) continue;
                    if (emb_it->second.size() != ev_it->second.size()) continue;
                    double sim = cosine(ev_it->second, emb_it->second);
                    if (sim > best) {
                        best = sim;
                        best_dim = &tag_dim;
                        best_value = &v;
                    }
                }
            };
            if (dim) {
                auto it = tags.find(*dim);
                if (it != tags.end()) consider(it->first, it->second);
            } else {
                for (const auto& [tag_dim, values] : tags) consider(tag_dim, values);
            }
            if (best_value && best >= tau) {
                double sim = std::min(best, 1.0);
                out.matches.push_back(
                    {*best_dim, *entity, *best_value, MatchKind::semantic, sim});
                out.score += sim;
            }
        }
    }
    return out;
}

int exact_score(const DimensionTags& tags, const QueryDecomposition& decomp) {
    ScoredDoc sd = score_document(tags, decomp, RetrievalMode::exact_only, 0.0, {}, {});
    return static_cast<int>(sd.score + 0.5);
}

EntityVectors embed_query_entities(const QueryDecomposition& decomp, EmbeddingBackend& embed,
                                   std::vector<std::string>* failures) {
    std::vector<std::string> entities;
    for (const auto& ref : list_entities(decomp))
        if (std::find(entities.begin(), entities.end(), *ref.entity) == entities.end())
            entities.push_back(*ref.entity);
    if (entities.empty()) return {};
    EntityVectors out;
    try {
        auto vectors = embed.embed(entities);
        for (std::size_t i = 0; i < entities.size(); ++i)
            out.emplace(entities[i], std::move(vectors[i]));
    } catch (const BackendError& e) {
        if (failures) failures->push_back(e.what());
        return {};  // every entity contributes 0
    }
    return out;
}

double semantic_score(const DimensionTags& tags, const QueryDecomposition& decomp,
                      const ValueEmbeddings& value_embeddings, double tau,
                      EmbeddingBackend& embed, std::vector<std::string>* failures) {
    EntityVectors vectors = embed_query_entities(decomp, embed, failures);
    ScoredDoc sd =
        score_document(tags, decomp, RetrievalMode::hybrid, tau, value_embeddings, vectors);
    double sum = 0;
    for (const auto& m : sd.matches)
        if (m.kind == MatchKind::semantic) sum += m.similarity;
    return sum;
}

void sort_hits(std::vector<RetrievalHit>& hits) {
    std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
}

std::vector<RetrievalHit> retrieve(const CubeIndex& index, const QueryDecomposition& decomp,
                                   const RetrievalConfig& cfg, EmbeddingBackend* embed,
                                   const EntityVectors* entity_vectors) {
    if (cfg.k < 1) throw std::runtime_error("retrieval: k must be at least 1");
    if (cfg.tau < 0) throw std::runtime_error("retrieval: tau must be non-negative");
    if (decomp.empty()) return {};

    bool semantic_active =
        cfg.mode != RetrievalMode::exact_only && !index.value_embeddings().empty();

    static const EntityVectors kNoVectors;
    EntityVectors local_vectors;
    const EntityVectors* vectors = &kNoVectors;
    if (semantic_active) {
        if (entity_vectors) {
            vectors = entity_vectors;
        } else if (embed) {
            local_vectors = embed_query_entities(decomp, *embed);
            vectors = &local_vectors;
        }
    }

    std::set<std::string> candidates;
    auto entities = list_entities(decomp);

    if (cfg.mode != RetrievalMode::semantic_only) {
        for (const auto& [dim, entity] : entities) {
            if (dim) {
                if (const auto* ids = index.postings_for(*dim, *entity))
                    candidates.insert(ids->begin(), ids->end());
            } else {
                for (const auto& [tag_dim, by_value] : index.postings()) {
                    auto it = by_value.find(*entity);
                    if (it != by_value.end())
                        candidates.insert(it->second.begin(), it->second.end());
                }
            }
        }
    }

    if (semantic_active && !vectors->empty()) {
        for (const auto& [dim, entity] : entities) {
            auto ev_it = vectors->find(*entity);
            if (ev_it == vectors->end()) continue;
            auto scan = [&](const std::map<std::string, std::vector<std::string>>& by_value) {
                for (const auto& [value, ids] : by_value) {
                    auto emb_it = index.value_embeddings().find(value);
                    if (emb_it == index.value_embeddings().end()) continue;
                    if (emb_it->second.size() != ev_it->second.size()) continue;
                    if (cosine(ev_it->second, emb_it->second) >= cfg.tau)
                        candidates.insert(ids.begin(), ids.end());
                }
            };
            if (dim) {
                auto it = index.postings().find(*dim);
                if (it != index.postings().end()) scan(it->second);
            } else {
                for (const auto& [tag_dim, by_value] : index.postings()) scan(by_value);
            }
        }
    }

    std::vector<RetrievalHit> hits;
    hits.reserve(candidates.size());
    for (const auto& doc_id : candidates) {
        const DimensionTags* tags = index.tags_for(doc_id);
        if (!tags) continue;
        ScoredDoc sd = score_document(*tags, decomp, cfg.mode, cfg.tau,
                                      index.value_embeddings(), *vectors);
        if (sd.score <= 0) continue;
        hits.push_back({doc_id, sd.score, std::move(sd.matches)});
    }
    sort_hits(hits);
    if (hits.size() > static_cast<std::size_t>(cfg.k)) hits.resize(cfg.k);
    return hits;
}

}  // namespace cubeqa
