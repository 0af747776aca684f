#pragma once
// Chat-completion and embedding backend interfaces with deterministic
// scripted/fixture implementations for offline runs and tests.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cubeqa {

struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ChatRequest {
    std::optional<std::string> system;
    std::string user;
    double temperature = 0.0;
    int max_tokens = 1024;
};

struct TokenUsage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct ChatResponse {
    std::string text;
    std::optional<TokenUsage> usage;
};

struct CallRecord {
    std::string kind;  // "chat" or "embed"
    std::uint64_t prompt_hash = 0;
    double latency_ms = 0.0;
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

// Thread-safe append-only log of backend calls.
class CallLog {
public:
    void add(CallRecord rec);
    std::vector<CallRecord> snapshot() const;
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::vector<CallRecord> records_;
};

std::uint64_t fnv1a64(std::string_view s);

class ChatBackend {
public:
    virtual ~ChatBackend() = default;

    // Validates the request, dispatches, and records the call when a log is
    // attached. Throws BackendError on failure.
    ChatResponse complete(const ChatRequest& req);

    void set_call_log(CallLog* log) { log_ = log; }

protected:
    virtual ChatResponse do_complete(const ChatRequest& req) = 0;

private:
    CallLog* log_ = nullptr;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;

    // One unit-norm vector per input, order preserved. Throws BackendError
    // on failure or on dimension mismatch within the batch.
    std::vector<std::vector<float>> embed(std::span<const std::string> texts);
    std::vector<float> embed_one(const std::string& text);

    void set_call_log(CallLog* log) { log_ = log; }

protected:
    virtual std::vector<std::vector<float>> do_embed(std::span<const std::string> texts) = 0;

private:
    CallLog* log_ = nullptr;
};

// Rewrites v to unit length. Throws BackendError when v is empty or zero.
void normalize_to_unit(std::vector<float>& v);

// --------------------------------------------------------------------------
// Scripted chat backend: ordered rules matched against the user prompt.
// First matching rule wins; without a match the default reply is used, and
// without a default the call fails.

struct ScriptedRule {
    std::vector<std::string> contains;    // all substrings must appear
    std::optional<std::string> pattern;   // ECMAScript regex, searched
    std::string reply;
};

class ScriptedChatBackend : public ChatBackend {
public:
    ScriptedChatBackend() = default;
    explicit ScriptedChatBackend(std::vector<ScriptedRule> rules,
                                 std::optional<std::string> default_reply = {});

    // {"rules":[{"contains":[...], "pattern"?: "...",
    //            "reply": "..." | "reply_json": {...}}, ...],
    //  "default"?: "...", "delay_ms"?: 0}
    static ScriptedChatBackend from_file(const std::filesystem::path& path);

    void add_rule(ScriptedRule rule);
    void set_default_reply(std::string reply);
    void set_simulated_delay(std::chrono::milliseconds delay) { delay_ = delay; }

protected:
    ChatResponse do_complete(const ChatRequest& req) override;

private:
    std::vector<ScriptedRule> rules_;
    std::optional<std::string> default_reply_;
    std::chrono::milliseconds delay_{0};
};

// --------------------------------------------------------------------------
// Fixture embedder: table lookup with a deterministic hash-derived unit
// vector for out-of-vocabulary strings.

class FixtureEmbedder : public EmbeddingBackend {
public:
    explicit FixtureEmbedder(std::size_t dim = 8);

    // {"dim": N, "vectors": {"some text": [..floats..], ...}}
    static FixtureEmbedder from_file(const std::filesystem::path& path);

    void set_vector(std::string text, std::vector<float> v);
    std::size_t dim() const { return dim_; }

protected:
    std::vector<std::vector<float>> do_embed(std::span<const std::string> texts) override;

private:
    std::size_t dim_;
    std::vector<std::pair<std::string, std::vector<float>>> table_;
    const std::vector<float>* lookup(const std::string& text) const;
};

// Strips a Markdown code fence (``` or ```json) wrapping a backend reply.
std::string strip_code_fence(const std::string& reply);

}  // namespace cubeqa
