#include "g2s/fleet.hpp"

#include <set>

#include <fmt/format.h>

#include "g2s/text.hpp"

namespace g2s {

namespace {

constexpr std::string_view kFormatDoctorTag = "format_doctor";

class DuplicateElementsError : public WrongOutputError {
public:
    using WrongOutputError::WrongOutputError;
};

std::string_view output_key(AgentRole role) {
    switch (role) {
        case AgentRole::AlphaCaptain: return "actors";
        case AgentRole::IntelligenceOfficer: return "impacts";
        case AgentRole::DeliveryCoordinator: return "deliverables";
        case AgentRole::TacticalOfficer: return "user_stories";
        case AgentRole::FormatDoctor:
        case AgentRole::SuperAgent: break;
    }
    throw PreconditionError(fmt::format("{} is not a fleet generation agent", role_name(role)));
}

// Which selections must (and must not) be present for each stage.
void check_stage(AgentRole role, const RefInfo& ref) {
    if (!ref.prefix_ok()) throw StageMismatchError("Ref Info path is not a prefix (impact without actor, ...)");
    const bool a = ref.actor.has_value();
    const bool i = ref.impact.has_value();
    const bool d = ref.deliverable.has_value();
    bool ok = false;
    switch (role) {
        case AgentRole::AlphaCaptain: ok = !a; break;
        case AgentRole::IntelligenceOfficer: ok = a && !i; break;
        case AgentRole::DeliveryCoordinator: ok = i && !d; break;
        case AgentRole::TacticalOfficer: ok = d; break;
        case AgentRole::FormatDoctor:
        case AgentRole::SuperAgent:
            throw PreconditionError(fmt::format("{} has no fleet prompt bundle", role_name(role)));
    }
    if (!ok)
        throw StageMismatchError(fmt::format("{} cannot run with the given Ref Info path", role_name(role)));
}

}  // namespace

void FleetOptions::validate() const {
    if (n < 1) throw ConfigError("branching factor n must be >= 1");
    if (fd_max_attempts < 1) throw ConfigError("fd_max_attempts must be >= 1");
}

bool RefInfo::prefix_ok() const {
    if (impact && !actor) return false;
    if (deliverable && !impact) return false;
    return true;
}

std::string tidy_prompt(std::string text) {
    std::string out;
    out.reserve(text.size());
    int newlines = 0;
    for (char c : text) {
        newlines = c == '\n' ? newlines + 1 : 0;
        if (newlines <= 2) out.push_back(c);
    }
    return out;
}

std::string PromptBundle::user_text(const TemplateStore& templates) const {
    std::string cot;
    if (cot_steps_text) cot = templates.render("layout", "cot_block", {{"steps", *cot_steps_text}}) + "\n\n";
    return tidy_prompt(templates.render("layout", "agent",
                                        {{"ref_info", ref_info_text},
                                         {"task", task_text},
                                         {"guidelines", guidelines_text},
                                         {"cot", cot},
                                         {"output_format", output_format_example}}));
}

const BackendConfig& RoleBackends::for_role(AgentRole role) const {
    auto it = per_role.find(role);
    return it == per_role.end() ? fallback : it->second;
}

bool is_valid_json(std::string_view text) {
    return Json::accept(text);
}

FormatDoctorResult format_doctor(const std::string& raw, int max_attempts, Gateway& gateway,
                                 const BackendConfig& cfg, const TemplateStore& templates) {
    if (is_valid_json(raw)) return {raw, 0};
    if (max_attempts < 1) throw PreconditionError("format_doctor: max_attempts must be >= 1");

    const std::string prompt = templates.render("format_doctor", "repair", {{"content", raw}});
    std::vector<std::string> tried{raw};
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        auto ex = gateway.complete(cfg, std::nullopt, prompt, std::string(kFormatDoctorTag));
        if (is_valid_json(ex.response_text)) return {ex.response_text, attempt};
        tried.push_back(ex.response_text);
    }
    throw FormatExhaustedError(fmt::format("output still not valid JSON after {} repair attempts", max_attempts),
                               std::move(tried));
}

std::string render_ref_info(const TemplateStore& templates, const RefInfo& ref, const ElementLabels& labels) {
    Vars vars{{"background", ref.context.background},
              {"problems", ref.context.problems},
              {"goal", ref.goal.text},
              {"impact_label", labels.impact},
              {"deliverable_label", labels.deliverable}};
    std::string out = templates.render("ref_info", "base", vars);
    if (ref.actor) {
        vars["actor"] = ref.actor->text;
        out += "\n" + templates.render("ref_info", "actor", vars);
    }
    if (ref.impact) {
        vars["impact"] = ref.impact->text;
        out += "\n" + templates.render("ref_info", "impact", vars);
    }
    if (ref.deliverable) {
        vars["deliverable"] = ref.deliverable->text;
        out += "\n" + templates.render("ref_info", "deliverable", vars);
    }
    return out;
}

Fleet::Fleet(const TemplateStore& templates, Gateway& gateway, RoleBackends backends, FleetOptions opts,
             ElementLabels labels)
    : templates_(templates),
      gateway_(gateway),
      backends_(std::move(backends)),
      opts_(opts),
      labels_(std::move(labels)) {
    opts_.validate();
}

int Fleet::expected_count(AgentRole role) const {
    return role == AgentRole::TacticalOfficer ? 1 : opts_.n;
}

PromptBundle Fleet::build_prompt(AgentRole role, const RefInfo& ref) const {
    check_stage(role, ref);
    const std::string file(role_key(role));
    const Vars vars{{"n", std::to_string(expected_count(role))},
                    {"impact_label", labels_.impact},
                    {"deliverable_label", labels_.deliverable},
                    {"element", templates_.get(file, "element")}};

    PromptBundle b;
    b.role_text = templates_.render(file, "role", vars);
    if (opts_.profile_enabled) b.role_text += "\n" + templates_.render("profile_" + file, "profile", vars);
    b.ref_info_text = render_ref_info(templates_, ref, labels_);
    b.task_text = templates_.render(file, "task", vars);
    b.guidelines_text = templates_.render(file, "guidelines", vars);
    b.output_format_example = templates_.render(file, "output_format", vars);
    if (!is_valid_json(b.output_format_example))
        throw TemplateError(fmt::format("{}/output_format is not valid JSON", file));
    if (opts_.cot_enabled) b.cot_steps_text = templates_.render("cot", "steps", vars);
    return b;
}

AgentOutput Fleet::parse_output(AgentRole role, const std::string& json_text) const {
    const Json doc = Json::parse(json_text);
    const std::string key(output_key(role));
    if (!doc.is_object() || !doc.contains(key) || !doc.at(key).is_array())
        throw WrongOutputError(fmt::format("{}: expected an object with array \"{}\"", role_name(role), key));
    const Json& items = doc.at(key);
    const int want = expected_count(role);
    if (static_cast<int>(items.size()) != want)
        throw WrongOutputError(
            fmt::format("{}: expected {} {}, got {}", role_name(role), want, key, items.size()));

    AgentOutput out;
    std::set<std::string> seen;
    for (const auto& item : items) {
        std::string norm;
        if (role == AgentRole::TacticalOfficer) {
            UserStory us;
            try {
                us = user_story_from_json(item, key);
            } catch (const SchemaError& e) {
                throw WrongOutputError(fmt::format("{}: {}", role_name(role), e.what()));
            }
            if (auto v = validate_user_story(us); !v.empty())
                throw InvariantError(std::move(v), std::string(role_name(role)));
            norm = text::normalize(us.actor + "\n" + us.action + "\n" + us.expected_outcome);
            out.stories.push_back(std::move(us));
        } else {
            if (!item.is_string())
                throw WrongOutputError(fmt::format("{}: {} entries must be strings", role_name(role), key));
            std::string value = text::trim(item.get<std::string>());
            if (text::is_blank(value))
                throw InvariantError({fmt::format("{}:empty", key)}, std::string(role_name(role)));
            norm = text::normalize(value);
            out.elements.push_back(std::move(value));
        }
        if (!seen.insert(norm).second)
            throw DuplicateElementsError(fmt::format("{}: duplicate {} '{}'", role_name(role), key, norm));
    }
    return out;
}

AgentOutput Fleet::run_agent(AgentRole role, const RefInfo& ref) {
    const PromptBundle bundle = build_prompt(role, ref);
    const std::string user = bundle.user_text(templates_);
    const BackendConfig& cfg = backends_.for_role(role);
    const BackendConfig& fd_cfg = backends_.for_role(AgentRole::FormatDoctor);

    // One regeneration is allowed when siblings come back duplicated.
    constexpr int kMaxGenerations = 2;
    for (int attempt = 1;; ++attempt) {
        auto ex = gateway_.complete(cfg, bundle.system_text(), user, std::string(role_key(role)));
        auto fixed = format_doctor(ex.response_text, opts_.fd_max_attempts, gateway_, fd_cfg, templates_);
        try {
            AgentOutput out = parse_output(role, fixed.json_text);
            out.provenance = Provenance{role, attempt, fixed.repaired()};
            return out;
        } catch (const DuplicateElementsError&) {
            if (attempt >= kMaxGenerations) throw;
        }
    }
}

ImpactMapTree Fleet::expand_goal(const ProjectContext& context, const Goal& goal) {
    if (auto v = validate_context(context); !v.empty()) throw InvariantError(std::move(v), "project context");
    if (auto v = validate_goal(goal); !v.empty()) throw InvariantError(std::move(v), "goal");

    ImpactMapTree tree;
    tree.goal = goal;
    AgentRole stage = AgentRole::AlphaCaptain;
    try {
        RefInfo ref{context, goal, {}, {}, {}};
        auto actors = run_agent(stage, ref);
        for (auto& a : actors.elements) tree.actors.push_back({Actor{a}, actors.provenance, {}});

        for (auto& actor_node : tree.actors) {
            ref.actor = actor_node.actor;
            ref.impact.reset();
            ref.deliverable.reset();
            stage = AgentRole::IntelligenceOfficer;
            auto impacts = run_agent(stage, ref);
            for (auto& i : impacts.elements)
                actor_node.impacts.push_back({Impact{i, actor_node.actor.text}, impacts.provenance, {}});

            for (auto& impact_node : actor_node.impacts) {
                ref.impact = impact_node.impact;
                ref.deliverable.reset();
                stage = AgentRole::DeliveryCoordinator;
                auto deliverables = run_agent(stage, ref);
                for (auto& d : deliverables.elements)
                    impact_node.deliverables.push_back(
                        {Deliverable{d, impact_node.impact.text}, deliverables.provenance, {}});

                for (auto& deliverable_node : impact_node.deliverables) {
                    ref.deliverable = deliverable_node.deliverable;
                    stage = AgentRole::TacticalOfficer;
                    auto stories = run_agent(stage, ref);
                    for (auto& s : stories.stories)
                        deliverable_node.stories.push_back({std::move(s), stories.provenance});
                }
            }
        }
    } catch (const Error& e) {
        throw FleetRunError(fmt::format("{} failed: {}", role_name(stage), e.what()), stage, tree,
                            std::current_exception());
    }
    return tree;
}

}  // namespace g2s
