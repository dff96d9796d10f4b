#include <cstdlib>

#include <fmt/format.h>
#include <httplib.h>

#include "g2s/gateway.hpp"

namespace g2s {

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path without trailing slash
};

Endpoint split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("base_url needs a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    Endpoint ep;
    ep.origin = url.substr(0, path_start);
    ep.prefix = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
    return ep;
}

Json post_json(const BackendConfig& cfg, const std::string& route, const Json& body) {
    Endpoint ep = split_url(cfg.base_url);
    httplib::Client client(ep.origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    auto res = client.Post(ep.prefix + route, headers, body.dump(), "application/json");
    if (!res) {
        // Connection refused, reset, or timed out: all transient.
        throw TransportError(fmt::format("{}{}: {}", cfg.base_url, route, httplib::to_string(res.error())),
                             0, true);
    }
    const int status = res->status;
    if (status == 401 || status == 403)
        throw AuthError(fmt::format("{}{}: HTTP {}", cfg.base_url, route, status));
    if (status >= 400)
        throw TransportError(fmt::format("{}{}: HTTP {}: {:.200}", cfg.base_url, route, status, res->body),
                             status, status >= 500);

    Json j = Json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw ResponseShapeError("response body is not JSON");
    return j;
}

}  // namespace

ChatReply HttpTransport::chat(const BackendConfig& cfg, const ChatRequest& req) {
    Json messages = Json::array();
    if (req.system) messages.push_back({{"role", "system"}, {"content", *req.system}});
    messages.push_back({{"role", "user"}, {"content", req.user}});
    Json body{{"model", cfg.model_name},
              {"messages", std::move(messages)},
              {"temperature", cfg.temperature},
              {"max_tokens", cfg.max_tokens}};

    Json res = post_json(cfg, "/chat/completions", body);
    const Json* content = nullptr;
    if (res.contains("choices") && res["choices"].is_array() && !res["choices"].empty()) {
        const Json& choice = res["choices"][0];
        if (choice.contains("message") && choice["message"].contains("content"))
            content = &choice["message"]["content"];
    }
    if (!content || !content->is_string()) throw ResponseShapeError("chat response has no choices[0].message.content");

    ChatReply reply;
    reply.text = content->get<std::string>();
    if (res.contains("usage") && res["usage"].is_object()) {
        const Json& u = res["usage"];
        reply.usage.prompt_tokens = u.value("prompt_tokens", 0);
        reply.usage.completion_tokens = u.value("completion_tokens", 0);
        reply.usage.total_tokens = u.value("total_tokens", 0);
    }
    return reply;
}

std::vector<Vector> HttpTransport::embed(const BackendConfig& cfg, std::span<const std::string> texts) {
    Json body{{"model", cfg.model_name}, {"input", Json(std::vector<std::string>(texts.begin(), texts.end()))}};
    Json res = post_json(cfg, "/embeddings", body);
    if (!res.contains("data") || !res["data"].is_array()) throw ResponseShapeError("embedding response has no data array");

    std::vector<Vector> out(texts.size());
    std::size_t pos = 0;
    for (const auto& item : res["data"]) {
        std::size_t idx = item.value("index", pos);
        if (idx >= out.size() || !item.contains("embedding") || !item["embedding"].is_array())
            throw ResponseShapeError("malformed embedding item");
        out[idx] = item["embedding"].get<Vector>();
        ++pos;
    }
    if (pos != texts.size()) throw ResponseShapeError("embedding count does not match input count");
    return out;
}

}  // namespace g2s
