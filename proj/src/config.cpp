#include "g2s/config.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

namespace g2s {

namespace {

void reject_unknown(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
    for (const auto& [key, _] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError(fmt::format("unknown key '{}' in {}", key, where));
}

template <typename T>
T get_as(const Json& j, const char* key, std::string_view where) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(fmt::format("{}.{} has the wrong type", where, key));
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

const BackendConfig& ExperimentConfig::backend(std::string_view section) const {
    auto it = backends.find(section);
    return it == backends.end() ? default_backend : it->second;
}

RoleBackends ExperimentConfig::role_backends() const {
    RoleBackends rb;
    rb.fallback = default_backend;
    for (const auto& [name, cfg] : backends)
        if (auto role = role_from_key(name)) rb.per_role[*role] = cfg;
    return rb;
}

void ExperimentConfig::validate() const {
    if (transport.kind != "http" && transport.kind != "scripted")
        throw ConfigError("transport.kind must be \"http\" or \"scripted\"");
    if (transport.kind == "scripted" && !transport.fixture)
        throw ConfigError("a scripted transport needs transport.fixture");
    default_backend.validate();
    for (const auto& [_, b] : backends) b.validate();
    fleet.validate();
    thresholds.validate();
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (quace_sample < 1) throw ConfigError("quace_sample must be >= 1");
}

ExperimentConfig config_from_json(const Json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j,
                   {"model_label", "transport", "backends", "fleet", "thresholds", "labels", "templates_dir",
                    "workers", "seed", "quace_sample"},
                   "config");
    ExperimentConfig c;

    if (j.contains("transport")) {
        const Json& t = j.at("transport");
        reject_unknown(t, {"kind", "fixture"}, "transport");
        if (t.contains("kind")) c.transport.kind = get_as<std::string>(t, "kind", "transport");
        if (t.contains("fixture")) c.transport.fixture = resolve(base_dir, get_as<std::string>(t, "fixture", "transport"));
    }

    if (j.contains("backends")) {
        const Json& b = j.at("backends");
        if (!b.is_object()) throw ConfigError("backends must be an object");
        for (const auto& [key, _] : b.items())
            if (std::find(kBackendSections.begin(), kBackendSections.end(), key) == kBackendSections.end())
                throw ConfigError(fmt::format("unknown backend section '{}'", key));
        if (b.contains("default")) c.default_backend = backend_from_json(b.at("default"));
        for (const auto& [key, value] : b.items())
            if (key != "default") c.backends[key] = backend_from_json(value, c.default_backend);
    }

    if (j.contains("fleet")) {
        const Json& f = j.at("fleet");
        reject_unknown(f, {"n", "cot", "profile", "fd_max_attempts"}, "fleet");
        if (f.contains("n")) c.fleet.n = get_as<int>(f, "n", "fleet");
        if (f.contains("cot")) c.fleet.cot_enabled = get_as<bool>(f, "cot", "fleet");
        if (f.contains("profile")) c.fleet.profile_enabled = get_as<bool>(f, "profile", "fleet");
        if (f.contains("fd_max_attempts")) c.fleet.fd_max_attempts = get_as<int>(f, "fd_max_attempts", "fleet");
    }

    if (j.contains("thresholds")) {
        const Json& t = j.at("thresholds");
        reject_unknown(t, {"actor", "action", "expected_outcome"}, "thresholds");
        if (t.contains("actor")) c.thresholds.actor = get_as<double>(t, "actor", "thresholds");
        if (t.contains("action")) c.thresholds.action = get_as<double>(t, "action", "thresholds");
        if (t.contains("expected_outcome"))
            c.thresholds.expected_outcome = get_as<double>(t, "expected_outcome", "thresholds");
    }

    if (j.contains("labels")) {
        const Json& l = j.at("labels");
        reject_unknown(l, {"impact", "deliverable"}, "labels");
        if (l.contains("impact")) c.labels.impact = get_as<std::string>(l, "impact", "labels");
        if (l.contains("deliverable")) c.labels.deliverable = get_as<std::string>(l, "deliverable", "labels");
    }

    if (j.contains("templates_dir")) c.templates_dir = resolve(base_dir, get_as<std::string>(j, "templates_dir", "config"));
    if (j.contains("workers")) c.workers = get_as<int>(j, "workers", "config");
    if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j, "seed", "config");
    if (j.contains("quace_sample")) c.quace_sample = get_as<int>(j, "quace_sample", "config");
    c.model_label = j.contains("model_label") ? get_as<std::string>(j, "model_label", "config")
                                              : c.default_backend.model_name;
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path.string());
    return config_from_json(j, path.parent_path());
}

Json to_json(const ExperimentConfig& c) {
    Json backends{{"default", to_json(c.default_backend)}};
    for (const auto& [k, b] : c.backends) backends[k] = to_json(b);
    Json transport{{"kind", c.transport.kind}};
    if (c.transport.fixture) transport["fixture"] = c.transport.fixture->generic_string();
    Json j{{"model_label", c.model_label},
           {"transport", transport},
           {"backends", backends},
           {"fleet",
            {{"n", c.fleet.n},
             {"cot", c.fleet.cot_enabled},
             {"profile", c.fleet.profile_enabled},
             {"fd_max_attempts", c.fleet.fd_max_attempts}}},
           {"thresholds",
            {{"actor", c.thresholds.actor},
             {"action", c.thresholds.action},
             {"expected_outcome", c.thresholds.expected_outcome}}},
           {"labels", {{"impact", c.labels.impact}, {"deliverable", c.labels.deliverable}}},
           {"workers", c.workers},
           {"seed", c.seed},
           {"quace_sample", c.quace_sample}};
    if (c.templates_dir) j["templates_dir"] = c.templates_dir->generic_string();
    return j;
}

Thresholds parse_thresholds(std::string_view text) {
    std::array<double, 3> v{};
    std::size_t pos = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        std::size_t end = i < 2 ? text.find(',', pos) : text.size();
        if (end == std::string_view::npos) throw ConfigError("--thresholds needs three comma-separated values");
        std::string part(text.substr(pos, end - pos));
        std::size_t used = 0;
        try {
            v[i] = std::stod(part, &used);
        } catch (const std::exception&) {
            used = std::string::npos;
        }
        if (used != part.size()) throw ConfigError(fmt::format("bad threshold value '{}'", part));
        pos = end + 1;
    }
    Thresholds th{v[0], v[1], v[2]};
    th.validate();
    return th;
}

std::unique_ptr<Gateway> make_gateway(const ExperimentConfig& cfg) {
    if (cfg.transport.kind == "scripted") {
        if (!cfg.transport.fixture) throw ConfigError("a scripted transport needs transport.fixture");
        GatewayOptions opts;
        opts.sleeper = [](std::chrono::milliseconds) {};
        return std::make_unique<Gateway>(
            std::make_shared<ScriptedTransport>(ScriptedFixture::load(*cfg.transport.fixture)), opts);
    }
    return std::make_unique<Gateway>(std::make_shared<HttpTransport>());
}

}  // namespace g2s
