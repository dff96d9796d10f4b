#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "g2s/evalkit.hpp"
#include "g2s/fleet.hpp"
#include "g2s/gateway.hpp"

namespace g2s {

/// Backend sections a config may define besides "default".
inline constexpr std::array<std::string_view, 11> kBackendSections{
    "alpha_captain", "intelligence_officer", "delivery_coordinator", "tactical_officer", "format_doctor",
    "super_agent",   "judge",                "embedder",             "extractor",        "extractor_b",
    "default"};

struct TransportConfig {
    std::string kind = "http";  ///< "http" or "scripted"
    std::optional<std::filesystem::path> fixture;
};

/// Experiment configuration. Precedence: command-line flags, then the config
/// file, then built-in defaults. Relative paths resolve against the config
/// file's directory.
struct ExperimentConfig {
    std::string model_label;  ///< defaults to the default backend's model name
    TransportConfig transport;
    BackendConfig default_backend;
    std::map<std::string, BackendConfig, std::less<>> backends;  ///< merged over default
    FleetOptions fleet;
    Thresholds thresholds;
    ElementLabels labels;
    std::optional<std::filesystem::path> templates_dir;
    int workers = 1;
    std::uint64_t seed = 0;
    int quace_sample = 100;

    /// The section's backend, or the default one.
    const BackendConfig& backend(std::string_view section) const;
    RoleBackends role_backends() const;

    /// Throws ConfigError on any out-of-range value.
    void validate() const;
};

/// Unknown keys are rejected with ConfigError.
ExperimentConfig config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Snapshot for run manifests; never contains secrets.
Json to_json(const ExperimentConfig& cfg);

/// "a,b,c" into thresholds.
Thresholds parse_thresholds(std::string_view text);

/// Gateway over the configured transport. Scripted transports get a no-op
/// backoff sleeper.
std::unique_ptr<Gateway> make_gateway(const ExperimentConfig& cfg);

}  // namespace g2s
