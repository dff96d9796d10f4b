#include <fstream>

#include <fmt/format.h>

#include "g2s/gateway.hpp"

namespace g2s {

ScriptedFixture ScriptedFixture::from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("scripted fixture must be a JSON object");
    ScriptedFixture f;
    try {
        for (const auto& e : j.value("chat", Json::array())) {
            ScriptedEntry entry;
            if (e.contains("match")) entry.contains = e.at("match").get<std::string>();
            if (e.contains("index")) entry.index = e.at("index").get<std::size_t>();
            entry.response = e.value("response", std::string{});
            entry.fail_status = e.value("fail_status", 0);
            entry.fail_timeout = e.value("fail_timeout", false);
            entry.repeat = e.value("repeat", false);
            f.chat.push_back(std::move(entry));
        }
        const Json embeddings = j.value("embeddings", Json::object());
        for (const auto& [text, vec] : embeddings.items()) f.embeddings[text] = vec.get<Vector>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scripted fixture: ") + e.what());
    }
    return f;
}

Json ScriptedFixture::to_json() const {
    Json chat_entries = Json::array();
    for (const auto& e : chat) {
        Json j{{"response", e.response}};
        if (e.contains) j["match"] = *e.contains;
        if (e.index) j["index"] = *e.index;
        if (e.fail_status) j["fail_status"] = e.fail_status;
        if (e.fail_timeout) j["fail_timeout"] = true;
        if (e.repeat) j["repeat"] = true;
        chat_entries.push_back(std::move(j));
    }
    return Json{{"chat", std::move(chat_entries)}, {"embeddings", embeddings}};
}

ScriptedFixture ScriptedFixture::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scripted fixture " + path.string());
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("scripted fixture is not valid JSON: " + path.string());
    return from_json(j);
}

ScriptedTransport::ScriptedTransport(ScriptedFixture fixture)
    : fixture_(std::move(fixture)), consumed_(fixture_.chat.size(), false) {}

ChatReply ScriptedTransport::chat(const BackendConfig&, const ChatRequest& req) {
    std::lock_guard lock(mu_);
    const std::size_t seq = requests_.size();
    requests_.push_back(req);

    std::string haystack = req.system.value_or("");
    haystack += '\n';
    haystack += req.user;

    for (std::size_t i = 0; i < fixture_.chat.size(); ++i) {
        const auto& e = fixture_.chat[i];
        if (consumed_[i]) continue;
        if (e.index && *e.index != seq) continue;
        if (e.contains && haystack.find(*e.contains) == std::string::npos) continue;
        if (!e.repeat) consumed_[i] = true;

        if (e.fail_timeout) throw TransportError("scripted timeout", 0, true);
        if (e.fail_status == 401 || e.fail_status == 403)
            throw AuthError(fmt::format("scripted HTTP {}", e.fail_status));
        if (e.fail_status != 0)
            throw TransportError(fmt::format("scripted HTTP {}", e.fail_status), e.fail_status,
                                 e.fail_status >= 500);
        return ChatReply{e.response, {}};
    }
    throw ScriptMismatchError(fmt::format("no scripted response for request #{} (tag '{}'): {:.120}",
                                          seq, req.tag, req.user));
}

std::vector<Vector> ScriptedTransport::embed(const BackendConfig&, std::span<const std::string> texts) {
    std::lock_guard lock(mu_);
    ++embed_requests_;
    embedded_texts_ += texts.size();
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        auto it = fixture_.embeddings.find(t);
        if (it == fixture_.embeddings.end())
            throw ScriptMismatchError(fmt::format("no scripted embedding for '{}'", t));
        out.push_back(it->second);
    }
    return out;
}

std::vector<ChatRequest> ScriptedTransport::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

std::size_t ScriptedTransport::embed_requests() const {
    std::lock_guard lock(mu_);
    return embed_requests_;
}

std::size_t ScriptedTransport::embedded_texts() const {
    std::lock_guard lock(mu_);
    return embedded_texts_;
}

std::size_t ScriptedTransport::unconsumed() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (std::size_t i = 0; i < consumed_.size(); ++i)
        if (!consumed_[i] && !fixture_.chat[i].repeat) ++n;
    return n;
}

}  // namespace g2s
