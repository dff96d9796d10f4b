#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "g2s/core.hpp"

namespace g2s {

using Vector = std::vector<double>;

/// Connection and sampling settings for one model endpoint.
struct BackendConfig {
    std::string base_url = "http://localhost:11434/v1";
    std::string model_name = "qwen2.5:7b-instruct";
    double temperature = 0.3;
    int max_tokens = 2048;
    std::chrono::milliseconds timeout{120000};
    int max_retries = 3;
    /// Name of the environment variable holding the API key. The key itself
    /// is never stored in config.
    std::string api_key_env = "G2S_API_KEY";
    /// Cap on concurrent requests to this base_url.
    int max_in_flight = 4;

    /// Throws ConfigError when out of range.
    void validate() const;
};

Json to_json(const BackendConfig& cfg);
/// Missing keys keep the values from `base`.
BackendConfig backend_from_json(const Json& j, const BackendConfig& base = {});

struct TokenUsage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
    int total_tokens = 0;
};

struct ChatRequest {
    std::optional<std::string> system;
    std::string user;
    /// Free-form label carried into the exchange log (agent role, "judge"...).
    std::string tag;
};

struct ChatReply {
    std::string text;
    TokenUsage usage;
};

/// One logged chat call. `response_text` is verbatim.
struct ChatExchange {
    std::string tag;
    std::string model;
    std::string base_url;
    std::optional<std::string> system_text;
    std::string user_text;
    std::string response_text;
    TokenUsage usage;
    std::chrono::milliseconds latency{0};
    int attempts = 0;
    std::optional<std::string> error;
};

Json to_json(const ChatExchange& ex);

/// Wire-level access to a model server. Implementations throw
/// TransportError, AuthError or ResponseShapeError; retrying is the
/// gateway's job.
class Transport {
public:
    virtual ~Transport() = default;
    virtual ChatReply chat(const BackendConfig& cfg, const ChatRequest& req) = 0;
    virtual std::vector<Vector> embed(const BackendConfig& cfg, std::span<const std::string> texts) = 0;
    /// True when the transport never touches the network.
    virtual bool hermetic() const { return false; }
};

/// OpenAI-compatible HTTP(S) client: POST {base_url}/chat/completions and
/// {base_url}/embeddings.
class HttpTransport final : public Transport {
public:
    ChatReply chat(const BackendConfig& cfg, const ChatRequest& req) override;
    std::vector<Vector> embed(const BackendConfig& cfg, std::span<const std::string> texts) override;
};

/// A canned chat reply or injected fault.
struct ScriptedEntry {
    /// Matches when the request text (system + user) contains this substring.
    std::optional<std::string> contains;
    /// Matches only the request with this 0-based sequence number.
    std::optional<std::size_t> index;
    std::string response;
    /// Non-zero injects an HTTP-style failure instead of replying.
    int fail_status = 0;
    bool fail_timeout = false;
    /// Repeating entries are never consumed.
    bool repeat = false;
};

struct ScriptedFixture {
    std::vector<ScriptedEntry> chat;
    std::map<std::string, Vector> embeddings;

    static ScriptedFixture from_json(const Json& j);
    Json to_json() const;
    static ScriptedFixture load(const std::filesystem::path& path);
};

/// Deterministic in-memory backend. Each request takes the first unconsumed
/// entry that matches it; a request nothing matches throws
/// ScriptMismatchError. Embeddings are looked up by exact text.
class ScriptedTransport final : public Transport {
public:
    explicit ScriptedTransport(ScriptedFixture fixture);

    ChatReply chat(const BackendConfig& cfg, const ChatRequest& req) override;
    std::vector<Vector> embed(const BackendConfig& cfg, std::span<const std::string> texts) override;
    bool hermetic() const override { return true; }

    std::vector<ChatRequest> requests() const;
    std::size_t embed_requests() const;
    std::size_t embedded_texts() const;
    /// Non-repeating entries that were never used.
    std::size_t unconsumed() const;

private:
    mutable std::mutex mu_;
    ScriptedFixture fixture_;
    std::vector<bool> consumed_;
    std::vector<ChatRequest> requests_;
    std::size_t embed_requests_ = 0;
    std::size_t embedded_texts_ = 0;
};

struct RetryPolicy {
    std::chrono::milliseconds initial_delay{500};
    std::chrono::milliseconds max_delay{8000};
    double multiplier = 2.0;
    double jitter = 0.2;  ///< +/- fraction of the computed delay
};

struct GatewayOptions {
    RetryPolicy retry;
    std::function<void(std::chrono::milliseconds)> sleeper;  ///< defaults to sleep_for
    std::uint64_t jitter_seed = 0x9e3779b97f4a7c15ULL;
};

/// Uniform entry point for chat and embedding calls. Adds retries with
/// exponential backoff, a per-endpoint concurrency cap and an append-only
/// exchange log. Safe for concurrent use.
class Gateway {
public:
    explicit Gateway(std::shared_ptr<Transport> transport, GatewayOptions opts = {});
    ~Gateway();
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    ChatExchange complete(const BackendConfig& cfg, const std::optional<std::string>& system,
                          const std::string& user, const std::string& tag = {});
    std::vector<Vector> embed(const BackendConfig& cfg, std::span<const std::string> texts);

    std::vector<ChatExchange> exchanges() const;
    /// Number of logged chat calls whose tag equals `tag` (all calls if empty).
    std::size_t chat_calls(std::string_view tag = {}) const;
    std::size_t embed_calls() const;
    void export_log(const std::filesystem::path& path) const;

    Transport& transport() { return *transport_; }

private:
    class Limiter;

    template <typename F>
    auto with_retries(const BackendConfig& cfg, int& attempts, F&& call) -> decltype(call());
    std::chrono::milliseconds backoff(int retry_number);
    Limiter& limiter_for(const BackendConfig& cfg);

    std::shared_ptr<Transport> transport_;
    GatewayOptions opts_;

    mutable std::mutex log_mu_;
    std::vector<ChatExchange> log_;
    std::size_t embed_calls_ = 0;

    std::mutex rng_mu_;
    std::mt19937_64 rng_;

    std::mutex limiters_mu_;
    std::map<std::string, std::unique_ptr<Limiter>> limiters_;
};

}  // namespace g2s
