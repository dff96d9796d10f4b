#pragma once

#include <string>
#include <vector>

#include "g2s/fleet.hpp"

namespace g2s {

struct SuperAgentOptions {
    int n = 2;
    /// Must stay true: the single-prompt baseline is only run with reasoning steps.
    bool cot_enabled = true;
    int fd_max_attempts = 2;

    void validate() const;
};

/// Output of the single-prompt baseline. Shortfalls are not errors: whatever
/// parsed is kept and `warnings` says what was missing.
struct SuperAgentResult {
    ImpactMapTree tree;
    std::vector<IMResult> results;
    std::vector<std::string> warnings;
    bool repaired = false;

    bool degraded() const { return !warnings.empty(); }
};

/// The whole impact map and every story from one completion.
class SuperAgent {
public:
    SuperAgent(const TemplateStore& templates, Gateway& gateway, BackendConfig backend,
               BackendConfig format_doctor_backend, SuperAgentOptions opts = {}, ElementLabels labels = {});

    /// System text and user text of the unified prompt.
    std::pair<std::string, std::string> build_prompt(const ProjectContext& context, const Goal& goal) const;

    /// One chat call (plus Format Doctor repairs). Throws FormatExhaustedError
    /// when the reply never parses.
    SuperAgentResult run(const ProjectContext& context, const Goal& goal);

private:
    const TemplateStore& templates_;
    Gateway& gateway_;
    BackendConfig backend_;
    BackendConfig fd_backend_;
    SuperAgentOptions opts_;
    ElementLabels labels_;
};

/// Lenient reader for the nested super-agent JSON; collects warnings instead
/// of throwing on missing or malformed branches.
SuperAgentResult parse_super_agent_output(const Json& doc, const Goal& goal, int n);

}  // namespace g2s
