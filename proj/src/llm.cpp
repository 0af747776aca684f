#include "cubeqa/llm.hpp"

#include <cmath>
#include <fstream>
#include <regex>
#include <thread>

#include "json.hpp"

namespace cubeqa {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void CallLog::add(CallRecord rec) {
    std::lock_guard lock(mu_);
    records_.push_back(std::move(rec));
}

std::vector<CallRecord> CallLog::snapshot() const {
    std::lock_guard lock(mu_);
    return records_;
}

std::size_t CallLog::size() const {
    std::lock_guard lock(mu_);
    return records_.size();
}

ChatResponse ChatBackend::complete(const ChatRequest& req) {
    if (req.user.empty()) throw BackendError("chat: empty user prompt");
    if (req.temperature < 0) throw BackendError("chat: negative temperature");
    auto t0 = std::chrono::steady_clock::now();
    ChatResponse resp = do_complete(req);
    if (log_) {
        auto dt = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
        CallRecord rec;
        rec.kind = "chat";
        rec.prompt_hash = fnv1a64(req.system.value_or("") + "\x1f" + req.user);
        rec.latency_ms = dt;
        if (resp.usage) {
            rec.prompt_tokens = resp.usage->prompt_tokens;
            rec.completion_tokens = resp.usage->completion_tokens;
        }
        log_->add(std::move(rec));
    }
    return resp;
}

void normalize_to_unit(std::vector<float>& v) {
    if (v.empty()) throw BackendError("embed: empty vector");
    double norm_sq = 0;
    for (float x : v) norm_sq += double(x) * double(x);
    if (norm_sq == 0) throw BackendError("embed: zero vector cannot be normalized");
    double inv = 1.0 / std::sqrt(norm_sq);
    for (float& x : v) x = static_cast<float>(x * inv);
}

std::vector<std::vector<float>> EmbeddingBackend::embed(std::span<const std::string> texts) {
    if (texts.empty()) throw BackendError("embed: empty input batch");
    auto t0 = std::chrono::steady_clock::now();
    auto out = do_embed(texts);
    if (out.size() != texts.size())
        throw BackendError("embed: backend returned " + std::to_string(out.size()) +
                           " vectors for " + std::to_string(texts.size()) + " inputs");
    std::size_t dim = out.empty() ? 0 : out.front().size();
    for (auto& v : out) {
        if (v.size() != dim) throw BackendError("embed: dimension mismatch within batch");
        normalize_to_unit(v);
    }
    if (log_) {
        std::string joined;
        for (const auto& t : texts) {
            joined += t;
            joined += '\x1f';
        }
        CallRecord rec;
        rec.kind = "embed";
        rec.prompt_hash = fnv1a64(joined);
        rec.latency_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
        log_->add(std::move(rec));
    }
    return out;
}

std::vector<float> EmbeddingBackend::embed_one(const std::string& text) {
    std::vector<std::string> one{text};
    return embed(one).front();
}

// --------------------------------------------------------------------------

ScriptedChatBackend::ScriptedChatBackend(std::vector<ScriptedRule> rules,
                                         std::optional<std::string> default_reply)
    : rules_(std::move(rules)), default_reply_(std::move(default_reply)) {}

void ScriptedChatBackend::add_rule(ScriptedRule rule) { rules_.push_back(std::move(rule)); }

void ScriptedChatBackend::set_default_reply(std::string reply) {
    default_reply_ = std::move(reply);
}

ScriptedChatBackend ScriptedChatBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("scripted backend: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("scripted backend: bad JSON in " + path.string() + ": " +
                                 e.what());
    }
    ScriptedChatBackend backend;
    for (const auto& r : j.value("rules", json::array())) {
        ScriptedRule rule;
        for (const auto& c : r.value("contains", json::array()))
            rule.contains.push_back(c.get<std::string>());
        if (r.contains("pattern")) rule.pattern = r["pattern"].get<std::string>();
        if (r.contains("reply_json"))
            rule.reply = r["reply_json"].dump();
        else
            rule.reply = r.value("reply", "");
        backend.add_rule(std::move(rule));
    }
    if (j.contains("default")) backend.set_default_reply(j["default"].get<std::string>());
    if (j.contains("delay_ms"))
        backend.set_simulated_delay(std::chrono::milliseconds(j["delay_ms"].get<int>()));
    return backend;
}

ChatResponse ScriptedChatBackend::do_complete(const ChatRequest& req) {
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
    for (const auto& rule : rules_) {
        bool ok = true;
        for (const auto& needle : rule.contains) {
            if (req.user.find(needle) == std::string::npos) {
                ok = false;
                break;
            }
        }
        if (ok && rule.pattern) {
            std::regex re(*rule.pattern, std::regex::ECMAScript);
            ok = std::regex_search(req.user, re);
        }
        if (ok) {
            ChatResponse resp;
            resp.text = rule.reply;
            return resp;
        }
    }
    if (default_reply_) {
        ChatResponse resp;
        resp.text = *default_reply_;
        return resp;
    }
    std::string head = req.user.substr(0, 160);
    throw BackendError("scripted backend: no rule matches prompt: \"" + head + "\"");
}

// --------------------------------------------------------------------------

namespace {

// splitmix64, seeded from the string hash: stable across runs and platforms.
struct Splitmix64 {
    std::uint64_t state;
    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

}  // namespace

FixtureEmbedder::FixtureEmbedder(std::size_t dim) : dim_(dim) {
    if (dim_ == 0) throw std::runtime_error("fixture embedder: dim must be positive");
}

FixtureEmbedder FixtureEmbedder::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("fixture embedder: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("fixture embedder: bad JSON in " + path.string() + ": " +
                                 e.what());
    }
    FixtureEmbedder fe(j.value("dim", 8));
    if (j.contains("vectors")) {
        for (const auto& [text, arr] : j["vectors"].items()) {
            std::vector<float> v;
            for (const auto& x : arr) v.push_back(x.get<float>());
            fe.set_vector(text, std::move(v));
        }
    }
    return fe;
}

void FixtureEmbedder::set_vector(std::string text, std::vector<float> v) {
    if (v.size() != dim_)
        throw std::runtime_error("fixture embedder: vector for \"" + text + "\" has dim " +
                                 std::to_string(v.size()) + ", expected " +
                                 std::to_string(dim_));
    for (auto& entry : table_) {
        if (entry.first == text) {
            entry.second = std::move(v);
            return;
        }
    }
    table_.emplace_back(std::move(text), std::move(v));
}

const std::vector<float>* FixtureEmbedder::lookup(const std::string& text) const {
    for (const auto& [key, v] : table_)
        if (key == text) return &v;
    return nullptr;
}

std::vector<std::vector<float>> FixtureEmbedder::do_embed(std::span<const std::string> texts) {
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        if (const auto* v = lookup(text)) {
            out.push_back(*v);
            continue;
        }
        Splitmix64 rng{fnv1a64(text)};
        std::vector<float> v(dim_);
        for (auto& x : v) {
            // uniform in [-1, 1)
            x = static_cast<float>(double(rng.next() >> 11) / double(1ULL << 53) * 2.0 - 1.0);
        }
        bool all_zero = true;
        for (float x : v)
            if (x != 0.0f) all_zero = false;
        if (all_zero) v[0] = 1.0f;
        out.push_back(std::move(v));
    }
    return out;
}

std::string strip_code_fence(const std::string& reply) {
    std::string s = reply;
    auto trim = [](std::string& t) {
        size_t b = t.find_first_not_of(" \t\r\n");
        size_t e = t.find_last_not_of(" \t\r\n");
        t = (b == std::string::npos) ? std::string() : t.substr(b, e - b + 1);
    };
    trim(s);
    if (s.rfind("```", 0) == 0) {
        size_t first_nl = s.find('\n');
        size_t last_fence = s.rfind("```");
        if (first_nl != std::string::npos && last_fence > first_nl) {
            s = s.substr(first_nl + 1, last_fence - first_nl - 1);
            trim(s);
        }
    }
    return s;
}

}  // namespace cubeqa
