#include "g2s/gateway.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include <fmt/format.h>

namespace g2s {

void BackendConfig::validate() const {
    if (base_url.empty()) throw ConfigError("backend base_url is empty");
    if (model_name.empty()) throw ConfigError("backend model_name is empty");
    if (!(temperature >= 0.0 && temperature <= 2.0))
        throw ConfigError(fmt::format("temperature {} outside [0,2]", temperature));
    if (max_tokens <= 0) throw ConfigError("max_tokens must be positive");
    if (timeout.count() <= 0) throw ConfigError("timeout must be positive");
    if (max_retries < 0 || max_retries > 10) throw ConfigError("max_retries must be in [0,10]");
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
}

Json to_json(const BackendConfig& cfg) {
    return Json{{"base_url", cfg.base_url},
                {"model", cfg.model_name},
                {"temperature", cfg.temperature},
                {"max_tokens", cfg.max_tokens},
                {"timeout_ms", cfg.timeout.count()},
                {"max_retries", cfg.max_retries},
                {"api_key_env", cfg.api_key_env},
                {"max_in_flight", cfg.max_in_flight}};
}

BackendConfig backend_from_json(const Json& j, const BackendConfig& base) {
    if (!j.is_object()) throw ConfigError("backend section must be an object");
    if (j.contains("api_key")) throw ConfigError("API keys are read from environment variables only; use api_key_env");
    static constexpr std::string_view kKeys[] = {"base_url",    "model",       "temperature", "max_tokens",
                                                 "timeout_ms",  "max_retries", "api_key_env", "max_in_flight"};
    for (const auto& [key, value] : j.items())
        if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys))
            throw ConfigError("unknown backend key '" + key + "'");
    BackendConfig c = base;
    try {
        c.base_url = j.value("base_url", c.base_url);
        c.model_name = j.value("model", c.model_name);
        c.temperature = j.value("temperature", c.temperature);
        c.max_tokens = j.value("max_tokens", c.max_tokens);
        c.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<long long>(c.timeout.count())));
        c.max_retries = j.value("max_retries", c.max_retries);
        c.api_key_env = j.value("api_key_env", c.api_key_env);
        c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("backend section: ") + e.what());
    }
    c.validate();
    return c;
}

Json to_json(const ChatExchange& ex) {
    Json j{{"tag", ex.tag},
           {"model", ex.model},
           {"base_url", ex.base_url},
           {"user", ex.user_text},
           {"response", ex.response_text},
           {"usage", {{"prompt_tokens", ex.usage.prompt_tokens},
                      {"completion_tokens", ex.usage.completion_tokens},
                      {"total_tokens", ex.usage.total_tokens}}},
           {"latency_ms", ex.latency.count()},
           {"attempts", ex.attempts}};
    j["system"] = ex.system_text ? Json(*ex.system_text) : Json(nullptr);
    if (ex.error) j["error"] = *ex.error;
    return j;
}

// Counting semaphore keyed per endpoint.
class Gateway::Limiter {
public:
    explicit Limiter(int slots) : free_(slots) {}

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return free_ > 0; });
        --free_;
    }

    void release() {
        {
            std::lock_guard lock(mu_);
            ++free_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int free_;
};

namespace {

class SlotGuard {
public:
    template <typename L>
    explicit SlotGuard(L& l) : release_([&l] { l.release(); }) { l.acquire(); }
    ~SlotGuard() { release_(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

private:
    std::function<void()> release_;
};

}  // namespace

Gateway::Gateway(std::shared_ptr<Transport> transport, GatewayOptions opts)
    : transport_(std::move(transport)), opts_(std::move(opts)), rng_(opts_.jitter_seed) {
    if (!transport_) throw PreconditionError("gateway needs a transport");
    if (!opts_.sleeper) opts_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

Gateway::~Gateway() = default;

Gateway::Limiter& Gateway::limiter_for(const BackendConfig& cfg) {
    std::lock_guard lock(limiters_mu_);
    auto& slot = limiters_[cfg.base_url];
    if (!slot) slot = std::make_unique<Limiter>(cfg.max_in_flight);
    return *slot;
}

std::chrono::milliseconds Gateway::backoff(int retry_number) {
    const auto& p = opts_.retry;
    double base = static_cast<double>(p.initial_delay.count());
    for (int i = 1; i < retry_number; ++i) base *= p.multiplier;
    base = std::min(base, static_cast<double>(p.max_delay.count()));
    double factor = 1.0;
    if (p.jitter > 0) {
        std::lock_guard lock(rng_mu_);
        std::uniform_real_distribution<double> dist(1.0 - p.jitter, 1.0 + p.jitter);
        factor = dist(rng_);
    }
    return std::chrono::milliseconds(static_cast<long long>(base * factor));
}

template <typename F>
auto Gateway::with_retries(const BackendConfig& cfg, int& attempts, F&& call) -> decltype(call()) {
    SlotGuard slot(limiter_for(cfg));
    for (attempts = 1;; ++attempts) {
        try {
            return call();
        } catch (const TransportError& e) {
            if (!e.retryable() || attempts > cfg.max_retries) throw;
        }
        opts_.sleeper(backoff(attempts));
    }
}

ChatExchange Gateway::complete(const BackendConfig& cfg, const std::optional<std::string>& system,
                               const std::string& user, const std::string& tag) {
    ChatRequest req{system, user, tag};
    ChatExchange ex;
    ex.tag = tag;
    ex.model = cfg.model_name;
    ex.base_url = cfg.base_url;
    ex.system_text = system;
    ex.user_text = user;

    auto start = std::chrono::steady_clock::now();
    auto finish = [&] {
        ex.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start);
        std::lock_guard lock(log_mu_);
        log_.push_back(ex);
    };
    try {
        ChatReply reply = with_retries(cfg, ex.attempts, [&] { return transport_->chat(cfg, req); });
        ex.response_text = std::move(reply.text);
        ex.usage = reply.usage;
    } catch (const std::exception& e) {
        ex.error = e.what();
        finish();
        throw;
    }
    finish();
    return ex;
}

std::vector<Vector> Gateway::embed(const BackendConfig& cfg, std::span<const std::string> texts) {
    if (texts.empty()) throw PreconditionError("embed: no input texts");
    for (const auto& t : texts)
        if (t.empty()) throw PreconditionError("embed: empty input text");

    int attempts = 0;
    auto vectors = with_retries(cfg, attempts, [&] { return transport_->embed(cfg, texts); });
    {
        std::lock_guard lock(log_mu_);
        ++embed_calls_;
    }
    if (vectors.size() != texts.size())
        throw ResponseShapeError(fmt::format("embed: {} vectors for {} inputs", vectors.size(), texts.size()));
    for (const auto& v : vectors) {
        if (v.empty()) throw ResponseShapeError("embed: empty vector");
        if (v.size() != vectors.front().size()) throw ResponseShapeError("embed: dimension mismatch within batch");
    }
    return vectors;
}

std::vector<ChatExchange> Gateway::exchanges() const {
    std::lock_guard lock(log_mu_);
    return log_;
}

std::size_t Gateway::chat_calls(std::string_view tag) const {
    std::lock_guard lock(log_mu_);
    if (tag.empty()) return log_.size();
    return static_cast<std::size_t>(
        std::count_if(log_.begin(), log_.end(), [&](const ChatExchange& e) { return e.tag == tag; }));
}

std::size_t Gateway::embed_calls() const {
    std::lock_guard lock(log_mu_);
    return embed_calls_;
}

void Gateway::export_log(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write exchange log: " + path.string());
    for (const auto& ex : exchanges()) out << to_json(ex).dump() << '\n';
}

}  // namespace g2s
