#pragma once

#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "g2s/core.hpp"
#include "g2s/gateway.hpp"
#include "g2s/templates.hpp"

namespace g2s {

struct FleetOptions {
    int n = 2;  ///< branching factor at every level above the stories
    bool cot_enabled = false;
    bool profile_enabled = false;
    int fd_max_attempts = 2;

    void validate() const;
};

/// What an agent is told: fixed context plus exactly one selected element
/// per ancestor stage.
struct RefInfo {
    ProjectContext context;
    Goal goal;
    std::optional<Actor> actor;
    std::optional<Impact> impact;
    std::optional<Deliverable> deliverable;

    /// Impact requires Actor, Deliverable requires Impact.
    bool prefix_ok() const;
};

struct PromptBundle {
    std::string role_text;
    std::string ref_info_text;
    std::string task_text;
    std::string guidelines_text;
    std::string output_format_example;
    std::optional<std::string> cot_steps_text;

    /// System message: the role text.
    std::string system_text() const { return role_text; }
    /// User message assembled by `TemplateStore` layout "layout/agent".
    std::string user_text(const TemplateStore& templates) const;
};

/// Backend per agent role. Unset roles fall back to `fallback`.
struct RoleBackends {
    BackendConfig fallback;
    std::map<AgentRole, BackendConfig> per_role;

    const BackendConfig& for_role(AgentRole role) const;
};

struct FormatDoctorResult {
    std::string json_text;
    int repair_calls = 0;
    bool repaired() const { return repair_calls > 0; }
};

/// Returns `raw` unchanged, with no gateway call, when it already parses as
/// JSON. Otherwise asks the backend up to `max_attempts` times to repair the
/// original text and returns the first reply that parses. Throws
/// FormatExhaustedError carrying the original and every reply.
FormatDoctorResult format_doctor(const std::string& raw, int max_attempts, Gateway& gateway,
                                 const BackendConfig& cfg, const TemplateStore& templates);

bool is_valid_json(std::string_view text);

/// Output of one generation agent call. Stage AC/IO/DC fill `elements`,
/// TO fills `stories`.
struct AgentOutput {
    std::vector<std::string> elements;
    std::vector<UserStory> stories;
    Provenance provenance;
};

/// expand_goal failure; `partial` holds every node built before the error.
class FleetRunError : public Error {
public:
    FleetRunError(const std::string& what, AgentRole stage, ImpactMapTree partial,
                  std::exception_ptr cause = nullptr)
        : Error(what), stage_(stage), partial_(std::move(partial)), cause_(std::move(cause)) {}

    AgentRole stage() const noexcept { return stage_; }
    const ImpactMapTree& partial() const noexcept { return partial_; }
    /// The agent error that stopped the run.
    std::exception_ptr cause() const noexcept { return cause_; }

private:
    AgentRole stage_;
    ImpactMapTree partial_;
    std::exception_ptr cause_;
};

/// Four generation agents plus Format Doctor over a shared gateway.
///
/// A run is sequential: Alpha Captain once, then for each actor in order the
/// Intelligence Officer, for each impact the Delivery Coordinator, for each
/// deliverable the Tactical Officer (depth-first). Successful runs make
/// 1 + n + n^2 + n^3 generation calls; Format Doctor repairs are extra and
/// tagged "format_doctor" in the exchange log.
class Fleet {
public:
    Fleet(const TemplateStore& templates, Gateway& gateway, RoleBackends backends,
          FleetOptions opts = {}, ElementLabels labels = {});

    PromptBundle build_prompt(AgentRole role, const RefInfo& ref) const;
    AgentOutput run_agent(AgentRole role, const RefInfo& ref);
    ImpactMapTree expand_goal(const ProjectContext& context, const Goal& goal);

    const FleetOptions& options() const noexcept { return opts_; }

    /// Elements an agent must return: n, or 1 for the Tactical Officer.
    int expected_count(AgentRole role) const;

private:
    AgentOutput parse_output(AgentRole role, const std::string& json_text) const;

    const TemplateStore& templates_;
    Gateway& gateway_;
    RoleBackends backends_;
    FleetOptions opts_;
    ElementLabels labels_;
};

/// Renders the Ref Info block shared by the agents and the baseline.
std::string render_ref_info(const TemplateStore& templates, const RefInfo& ref,
                            const ElementLabels& labels);

/// Collapses runs of three or more newlines left by empty optional blocks.
std::string tidy_prompt(std::string text);

}  // namespace g2s
