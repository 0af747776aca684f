#include "cubeqa/http_llm.hpp"

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace cubeqa {

using nlohmann::json;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : fallback;
}

int env_int_or(const char* name, int fallback) {
    const char* v = std::getenv(name);
    return v ? std::atoi(v) : fallback;
}

bool transient_status(int status) {
    return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

HttpBackendConfig HttpBackendConfig::from_env() {
    HttpBackendConfig cfg;
    cfg.base_url = env_or("CUBEQA_BASE_URL", "");
    cfg.api_key = env_or("CUBEQA_API_KEY", "");
    cfg.chat_model = env_or("CUBEQA_CHAT_MODEL", "gpt-4o-mini");
    cfg.embed_model = env_or("CUBEQA_EMBED_MODEL", "text-embedding-3-small");
    cfg.timeout_seconds = env_int_or("CUBEQA_TIMEOUT_S", 30);
    cfg.max_attempts = env_int_or("CUBEQA_MAX_ATTEMPTS", 3);
    cfg.concurrency = env_int_or("CUBEQA_CONCURRENCY", 4);
    return cfg;
}

namespace detail {

HttpTransport::HttpTransport(HttpBackendConfig cfg)
    : cfg_(std::move(cfg)),
      slots_(std::max(1, std::min(cfg_.concurrency, 4096))) {
    if (cfg_.base_url.empty())
        throw std::runtime_error("http backend: base URL not configured");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (cfg_.base_url.rfind("https://", 0) == 0)
        throw std::runtime_error("http backend: built without TLS support; use an http:// "
                                 "endpoint or rebuild with OpenSSL");
#endif
    // split scheme://host[:port] from the path prefix
    std::string url = cfg_.base_url;
    size_t scheme_end = url.find("://");
    size_t path_start =
        (scheme_end == std::string::npos) ? url.find('/') : url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        host_ = url;
    } else {
        host_ = url.substr(0, path_start);
        path_prefix_ = url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

HttpTransport::~HttpTransport() = default;

std::string HttpTransport::post_json(const std::string& route, const std::string& body) {
    slots_.acquire();
    struct Release {
        std::counting_semaphore<4096>& s;
        ~Release() { s.release(); }
    } release{slots_};

    httplib::Headers headers;
    if (!cfg_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    std::string last_error;
    int backoff_ms = cfg_.retry_backoff_ms;
    int attempts = std::max(1, cfg_.max_attempts);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        httplib::Client client(host_);
        client.set_connection_timeout(cfg_.timeout_seconds, 0);
        client.set_read_timeout(cfg_.timeout_seconds, 0);
        client.set_write_timeout(cfg_.timeout_seconds, 0);

        auto res = client.Post((path_prefix_ + route).c_str(), headers, body,
                               "application/json");
        if (res) {
            if (res->status >= 200 && res->status < 300) return res->body;
            if (res->status == 401 || res->status == 403)
                throw BackendError("http backend: authentication failed (status " +
                                   std::to_string(res->status) + ")");
            if (!transient_status(res->status))
                throw BackendError("http backend: request failed with status " +
                                   std::to_string(res->status) + ": " +
                                   res->body.substr(0, 200));
            last_error = "status " + std::to_string(res->status);
        } else {
            last_error = "transport error (" + httplib::to_string(res.error()) + ")";
        }
        if (attempt < attempts) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
    }
    throw BackendError("http backend: retries exhausted after " + std::to_string(attempts) +
                       " attempts; last error: " + last_error);
}

}  // namespace detail

HttpChatBackend::HttpChatBackend(HttpBackendConfig cfg)
    : transport_(std::make_unique<detail::HttpTransport>(std::move(cfg))) {}

ChatResponse HttpChatBackend::do_complete(const ChatRequest& req) {
    json messages = json::array();
    if (req.system) messages.push_back({{"role", "system"}, {"content", *req.system}});
    messages.push_back({{"role", "user"}, {"content", req.user}});
    json body = {
        {"model", transport_->config().chat_model},
        {"messages", messages},
        {"temperature", req.temperature},
        {"max_tokens", req.max_tokens},
    };

    std::string raw = transport_->post_json("/chat/completions", body.dump());
    json j = json::parse(raw, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || j["choices"].empty())
        throw BackendError("http backend: malformed chat response: " + raw.substr(0, 200));

    ChatResponse resp;
    resp.text = j["choices"][0].value("message", json::object()).value("content", "");
    if (j.contains("usage")) {
        TokenUsage usage;
        usage.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
        usage.completion_tokens = j["usage"].value("completion_tokens", 0L);
        resp.usage = usage;
    }
    return resp;
}

HttpEmbeddingBackend::HttpEmbeddingBackend(HttpBackendConfig cfg)
    : transport_(std::make_unique<detail::HttpTransport>(std::move(cfg))) {}

std::vector<std::vector<float>> HttpEmbeddingBackend::do_embed(
    std::span<const std::string> texts) {
    json input = json::array();
    for (const auto& t : texts) input.push_back(t);
    json body = {
        {"model", transport_->config().embed_model},
        {"input", input},
    };

    std::string raw = transport_->post_json("/embeddings", body.dump());
    json j = json::parse(raw, nullptr, false);
    if (j.is_discarded() || !j.contains("data"))
        throw BackendError("http backend: malformed embeddings response: " +
                           raw.substr(0, 200));

    std::vector<std::vector<float>> out(texts.size());
    for (const auto& item : j["data"]) {
        std::size_t idx = item.value("index", out.size());
        if (idx >= out.size())
            throw BackendError("http backend: embedding index out of range");
        out[idx] = item.value("embedding", std::vector<float>{});
    }
    return out;
}

}  // namespace cubeqa
