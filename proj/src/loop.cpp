#include "cubeqa/loop.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <sstream>

namespace cubeqa {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string replace_all(std::string text, std::string_view placeholder,
                        std::string_view value) {
    std::size_t pos = 0;
    while ((pos = text.find(placeholder, pos)) != std::string::npos) {
        text.replace(pos, placeholder.size(), value);
        pos += value.size();
    }
    return text;
}

std::string trim_copy(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    size_t e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string first_nonempty_line(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        std::string t = trim_copy(line);
        if (!t.empty()) return t;
    }
    return {};
}

std::string lower_copy(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace

PromptLibrary PromptLibrary::defaults() {
    PromptLibrary p;
    p.initial_subquery_template =
        "You will decompose a multi-hop question into simple steps.\n"
        "Question: {question}\n"
        "What is the first, most direct and simplest single-hop question you need to ask "
        "to begin answering it? It must be a one-hop question: no attributive clauses, no "
        "nesting. If the question compares who is younger, older, born first, or died "
        "earlier, start by asking when. Reply with that one-hop question only.";
    p.next_subquery_template =
        "Original question: {question}\n"
        "Steps so far:\n{history}\n"
        "What is the next logical question to ask to continue solving the original "
        "question? It must be a simple one-hop question without attributive clauses.\n"
        "If the original question can already be fully answered with the information "
        "above, reply with exactly FINAL ANSWER and nothing else. Otherwise reply with "
        "the next question only.";
    p.final_answer_template =
        "Original question: {question}\n"
        "Based on everything gathered:\n{history}\n"
        "Provide the final answer to the original question. Output only the answer, with "
        "no explanation. For dates or places output just the date or place; if the answer "
        "is a city, output only the city name. For a yes-or-no question output yes or no. "
        "If the question asks who, output only the person's name. For a comparison "
        "between two things, output only the one you choose. For a nationality, output "
        "only the country name.";
    p.router_template =
        "Decide which cube should answer the question below.\n"
        "Cubes:\n{cube_lines}\n"
        "Reply with exactly one cube name from: {cube_names}.\n"
        "Question: {question}";
    p.subanswer_template =
        "Answer the question using only the passages below. Reply with one short "
        "sentence.\nQuestion: {question}\nPassages:\n{passages}";
    return p;
}

std::string render_history(std::span<const std::pair<std::string, std::string>> history) {
    std::ostringstream os;
    for (std::size_t i = 0; i < history.size(); ++i) {
        os << "SQ" << (i + 1) << ": " << history[i].first << "\n";
        os << "SA" << (i + 1) << ": " << history[i].second << "\n";
    }
    return os.str();
}

std::string_view to_string(StopReason reason) {
    switch (reason) {
        case StopReason::final_token: return "final_token";
        case StopReason::iteration_limit: return "iteration_limit";
        case StopReason::error: return "error";
    }
    return "error";
}

std::string initial_subquery(const std::string& question, ChatBackend& chat,
                             const PromptLibrary& prompts) {
    if (question.empty()) throw std::runtime_error("loop: empty question");
    ChatRequest req;
    req.user = replace_all(prompts.initial_subquery_template, "{question}", question);
    req.max_tokens = 256;
    return first_nonempty_line(chat.complete(req).text);
}

bool is_final_sentinel(const std::string& reply) {
    std::string t = trim_copy(reply);
    auto is_wrap = [](char c) {
        return c == '"' || c == '\'' || c == '`' ||
               std::isspace(static_cast<unsigned char>(c));
    };
    bool changed = true;
    while (changed && !t.empty()) {
        changed = false;
        while (!t.empty() && is_wrap(t.front())) {
            t.erase(t.begin());
            changed = true;
        }
        while (!t.empty() && (is_wrap(t.back()) || t.back() == '.' || t.back() == '!' ||
                              t.back() == ':')) {
            t.pop_back();
            changed = true;
        }
    }
    return lower_copy(t) == "final answer";
}

NextSubquery next_subquery(const std::string& question,
                           std::span<const std::pair<std::string, std::string>> history,
                           ChatBackend& chat, const PromptLibrary& prompts) {
    if (history.empty()) throw std::runtime_error("loop: next_subquery needs history");
    std::string prompt = replace_all(prompts.next_subquery_template, "{question}", question);
    prompt = replace_all(prompt, "{history}", render_history(history));
    ChatRequest req;
    req.user = prompt;
    req.max_tokens = 256;
    std::string reply = chat.complete(req).text;
    if (is_final_sentinel(reply)) return {true, ""};
    return {false, first_nonempty_line(reply)};
}

namespace {

// Case-insensitive parse of the router reply against registry names: an
// exact (stripped) match wins, otherwise a reply mentioning exactly one name.
const CubeSpec* parse_route_reply(const std::string& reply, const CubeRegistry& registry) {
    std::string t = lower_copy(trim_copy(reply));
    auto strip_char = [&](char c) {
        std::erase(t, c);
    };
    strip_char('"');
    strip_char('\'');
    strip_char('`');
    while (!t.empty() && (t.back() == '.' || t.back() == '!')) t.pop_back();
    t = trim_copy(t);

    for (const auto& spec : registry.specs())
        if (lower_copy(spec.cube_name) == t) return &spec;

    const CubeSpec* only = nullptr;
    int mentioned = 0;
    for (const auto& spec : registry.specs()) {
        if (t.find(lower_copy(spec.cube_name)) != std::string::npos) {
            ++mentioned;
            only = &spec;
        }
    }
    return mentioned == 1 ? only : nullptr;
}

}  // namespace

std::string route(const std::string& subquery, const CubeRegistry& registry,
                  ChatBackend& chat, const PromptLibrary& prompts, int router_retry) {
    if (registry.size() == 0) throw std::runtime_error("loop: empty registry");

    std::ostringstream cube_lines;
    std::ostringstream cube_names;
    bool first = true;
    for (const auto& spec : registry.specs()) {
        cube_lines << "  - " << spec.cube_name;
        if (!spec.subject_dim.description.empty())
            cube_lines << ": " << spec.subject_dim.description;
        cube_lines << "\n";
        if (!first) cube_names << ", ";
        cube_names << spec.cube_name;
        first = false;
    }
    std::string prompt = replace_all(prompts.router_template, "{cube_lines}", cube_lines.str());
    prompt = replace_all(prompt, "{cube_names}", cube_names.str());
    prompt = replace_all(prompt, "{question}", subquery);

    int attempts = 1 + std::max(0, router_retry);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        try {
            ChatRequest req;
            req.user = prompt;
            req.max_tokens = 32;
            std::string reply = chat.complete(req).text;
            if (const CubeSpec* spec = parse_route_reply(reply, registry))
                return spec->cube_name;
        } catch (const BackendError&) {
            // fall through to retry / fallback
        }
    }
    return kRouteAll;
}

std::string answer_subquery(const std::string& subquery, std::span<const RetrievalHit> hits,
                            const Corpus& corpus, ChatBackend& chat,
                            const PromptLibrary& prompts) {
    std::ostringstream passages;
    if (hits.empty()) {
        passages << "(no passages were found for this question)\n";
    } else {
        for (std::size_t i = 0; i < hits.size(); ++i) {
            const Document* doc = corpus.find(hits[i].doc_id);
            passages << "[" << (i + 1) << "] ";
            if (doc) {
                if (doc->title) passages << *doc->title << ": ";
                passages << doc->text;
            } else {
                passages << "(document " << hits[i].doc_id << " missing from corpus)";
            }
            passages << "\n";
        }
    }
    std::string prompt = replace_all(prompts.subanswer_template, "{question}", subquery);
    prompt = replace_all(prompt, "{passages}", passages.str());
    ChatRequest req;
    req.user = prompt;
    req.max_tokens = 256;
    return trim_copy(chat.complete(req).text);
}

std::string final_answer(const std::string& question, const ReasoningTrace& trace,
                         ChatBackend& chat, const PromptLibrary& prompts) {
    std::vector<std::pair<std::string, std::string>> history;
    history.reserve(trace.iterations.size());
    for (const auto& it : trace.iterations) history.emplace_back(it.subquery, it.sub_answer);
    std::string prompt = replace_all(prompts.final_answer_template, "{question}", question);
    prompt = replace_all(prompt, "{history}", render_history(history));
    ChatRequest req;
    req.user = prompt;
    req.max_tokens = 128;
    return trim_copy(chat.complete(req).text);
}

namespace {

std::map<std::string, std::vector<std::string>> collect_activated_cells(
    std::span<const RetrievalHit> hits) {
    std::map<std::string, std::vector<std::string>> cells;
    for (const auto& hit : hits)
        for (const auto& m : hit.matches) {
            auto& values = cells[m.dimension];
            if (std::find(values.begin(), values.end(), m.matched_value) == values.end())
                values.push_back(m.matched_value);
        }
    for (auto& [dim, values] : cells) std::sort(values.begin(), values.end());
    return cells;
}

void merge_decomposition(QueryDecomposition& into, const QueryDecomposition& from) {
    for (const auto& [dim, es] : from.per_dimension) {
        auto& target = into.per_dimension[dim];
        for (const auto& e : es)
            if (std::find(target.begin(), target.end(), e) == target.end())
                target.push_back(e);
    }
    for (const auto& e : from.unassigned)
        if (std::find(into.unassigned.begin(), into.unassigned.end(), e) ==
            into.unassigned.end())
            into.unassigned.push_back(e);
}

void merge_hits(std::vector<RetrievalHit>& into, std::vector<RetrievalHit> more) {
    for (auto& hit : more) {
        auto it = std::find_if(into.begin(), into.end(), [&](const RetrievalHit& h) {
            return h.doc_id == hit.doc_id;
        });
        if (it == into.end())
            into.push_back(std::move(hit));
        else if (hit.score > it->score)
            *it = std::move(hit);
    }
}

}  // namespace

ReasoningTrace run(const std::string& question, const Corpus& corpus,
                   const std::map<std::string, CubeIndex>& indexes,
                   const CubeRegistry& registry, const LoopConfig& cfg, ChatBackend& chat,
                   EmbeddingBackend* embed, const PromptLibrary& prompts) {
    if (cfg.max_iterations < 1) throw std::runtime_error("loop: max_iterations must be >= 1");
    for (const auto& name : registry.names())
        if (!indexes.count(name))
            throw std::runtime_error("loop: no index built for cube '" + name + "'");

    ReasoningTrace trace;
    trace.query = question;
    auto run_start = Clock::now();

    // one cube, or every registry cube on the ALL fallback
    auto retrieve_for = [&](const std::string& subquery, const std::string& cube,
                            IterationRecord& record) {
        std::vector<const CubeSpec*> targets;
        if (cube == kRouteAll) {
            for (const auto& spec : registry.specs()) targets.push_back(&spec);
        } else {
            targets.push_back(&registry.at(cube));
        }
        std::vector<RetrievalHit> merged;
        for (const CubeSpec* spec : targets) {
            auto t0 = Clock::now();
            QueryDecomposition decomp = decompose_query(subquery, *spec, chat);
            EntityVectors vectors;
            if (embed && cfg.retrieval.mode != RetrievalMode::exact_only)
                vectors = embed_query_entities(decomp, *embed);
            trace.timings.decomposition_s += seconds_since(t0);

            t0 = Clock::now();
            auto hits = retrieve(indexes.at(spec->cube_name), decomp, cfg.retrieval, nullptr,
                                 &vectors);
            trace.timings.retrieval_s += seconds_since(t0);

            merge_decomposition(record.decomposition, decomp);
            merge_hits(merged, std::move(hits));
        }
        sort_hits(merged);
        if (merged.size() > static_cast<std::size_t>(cfg.retrieval.k))
            merged.resize(cfg.retrieval.k);
        record.hits = std::move(merged);
    };

    try {
        auto t0 = Clock::now();
        std::string subquery = initial_subquery(question, chat, prompts);
        trace.timings.subquery_s += seconds_since(t0);

        std::vector<std::pair<std::string, std::string>> history;
        for (int i = 1; i <= cfg.max_iterations; ++i) {
            IterationRecord record;
            record.index = i;
            record.subquery = subquery;

            t0 = Clock::now();
            record.routed_cube = route(subquery, registry, chat, prompts, cfg.router_retry);
            trace.timings.routing_s += seconds_since(t0);

            retrieve_for(subquery, record.routed_cube, record);
            record.activated_cells = collect_activated_cells(record.hits);

            t0 = Clock::now();
            record.sub_answer = answer_subquery(subquery, record.hits, corpus, chat, prompts);
            trace.timings.subanswer_s += seconds_since(t0);

            history.emplace_back(record.subquery, record.sub_answer);
            trace.iterations.push_back(std::move(record));

            if (i == cfg.max_iterations) {
                trace.stop_reason = StopReason::iteration_limit;
                break;
            }
            t0 = Clock::now();
            NextSubquery next = next_subquery(question, history, chat, prompts);
            trace.timings.subquery_s += seconds_since(t0);
            if (next.finished) {
                trace.stop_reason = StopReason::final_token;
                break;
            }
            subquery = next.subquery;
        }

        t0 = Clock::now();
        trace.final_answer = final_answer(question, trace, chat, prompts);
        trace.timings.final_answer_s += seconds_since(t0);
    } catch (const std::exception& e) {
        trace.stop_reason = StopReason::error;
        trace.error = e.what();
    }
    trace.timings.total_s = seconds_since(run_start);
    return trace;
}

json ReasoningTrace::to_json(const Corpus* corpus) const {
    json iterations_json = json::array();
    for (const auto& it : iterations) {
        json cells = json::object();
        for (const auto& [dim, values] : it.activated_cells) cells[dim] = values;

        json hits_json = json::array();
        for (const auto& hit : it.hits) {
            json matches = json::array();
            for (const auto& m : hit.matches)
                matches.push_back({{"dimension", m.dimension},
                                   {"query_entity", m.query_entity},
                                   {"matched_value", m.matched_value},
                                   {"mode", m.kind == MatchKind::exact ? "exact" : "semantic"},
                                   {"similarity", m.similarity}});
            json h = {{"doc_id", hit.doc_id}, {"score", hit.score}, {"matches", matches}};
            if (corpus) {
                if (const Document* doc = corpus->find(hit.doc_id)) {
                    std::string snippet = doc->text.substr(0, 240);
                    if (doc->text.size() > 240) snippet += "...";
                    h["snippet"] = snippet;
                }
            }
            hits_json.push_back(std::move(h));
        }

        json decomp = json::object();
        for (const auto& [dim, es] : it.decomposition.per_dimension) decomp[dim] = es;
        if (!it.decomposition.unassigned.empty())
            decomp["unassigned"] = it.decomposition.unassigned;

        iterations_json.push_back({{"iteration", it.index},
                                   {"subquery", it.subquery},
                                   {"routed_cube", it.routed_cube},
                                   {"decomposition", decomp},
                                   {"activated_cells", cells},
                                   {"retrieved_docs", hits_json},
                                   {"sub_answer", it.sub_answer}});
    }

    json j = {{"query", query},
              {"iterations", iterations_json},
              {"final_answer", final_answer},
              {"stop_reason", std::string(to_string(stop_reason))},
              {"timings",
               {{"subquery_s", timings.subquery_s},
                {"routing_s", timings.routing_s},
                {"decomposition_s", timings.decomposition_s},
                {"retrieval_s", timings.retrieval_s},
                {"subanswer_s", timings.subanswer_s},
                {"final_answer_s", timings.final_answer_s},
                {"total_s", timings.total_s}}}};
    if (!error.empty()) j["error"] = error;
    return j;
}

}  // namespace cubeqa
