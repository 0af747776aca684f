#pragma once
// Remote chat/embedding backends speaking the OpenAI-compatible wire shape:
// POST {base}/chat/completions and POST {base}/embeddings.

#include <memory>
#include <semaphore>

#include "cubeqa/llm.hpp"

namespace cubeqa {

struct HttpBackendConfig {
    std::string base_url;  // e.g. "http://localhost:8000/v1"
    std::string api_key;
    std::string chat_model;
    std::string embed_model;
    int timeout_seconds = 30;
    int max_attempts = 3;        // total attempts including the first
    int retry_backoff_ms = 250;  // doubled per retry
    int concurrency = 4;         // in-flight request cap per backend

    // CUBEQA_BASE_URL, CUBEQA_API_KEY, CUBEQA_CHAT_MODEL, CUBEQA_EMBED_MODEL,
    // CUBEQA_TIMEOUT_S, CUBEQA_MAX_ATTEMPTS, CUBEQA_CONCURRENCY
    static HttpBackendConfig from_env();
};

namespace detail {

// Shared POST-with-retry transport. Retries transport errors, 429 and 5xx
// with exponential backoff; any other 4xx fails immediately.
class HttpTransport {
public:
    explicit HttpTransport(HttpBackendConfig cfg);
    ~HttpTransport();
    std::string post_json(const std::string& route, const std::string& body);
    const HttpBackendConfig& config() const { return cfg_; }

private:
    HttpBackendConfig cfg_;
    std::string host_;         // scheme://host[:port]
    std::string path_prefix_;  // e.g. "/v1"
    std::counting_semaphore<4096> slots_;
};

}  // namespace detail

class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig cfg);

protected:
    ChatResponse do_complete(const ChatRequest& req) override;

private:
    std::unique_ptr<detail::HttpTransport> transport_;
};

class HttpEmbeddingBackend : public EmbeddingBackend {
public:
    explicit HttpEmbeddingBackend(HttpBackendConfig cfg);

protected:
    std::vector<std::vector<float>> do_embed(std::span<const std::string> texts) override;

private:
    std::unique_ptr<detail::HttpTransport> transport_;
};

}  // namespace cubeqa
