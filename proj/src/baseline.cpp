#include "g2s/baseline.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "g2s/text.hpp"

namespace g2s {

namespace {

constexpr AgentRole kStages[] = {AgentRole::AlphaCaptain, AgentRole::IntelligenceOfficer,
                                 AgentRole::DeliveryCoordinator, AgentRole::TacticalOfficer};

const Provenance kSuperAgentProvenance{AgentRole::SuperAgent, 1, false};

std::string_view stage_heading(AgentRole role) {
    switch (role) {
        case AgentRole::AlphaCaptain: return "Actors";
        case AgentRole::IntelligenceOfficer: return "Impacts";
        case AgentRole::DeliveryCoordinator: return "Deliverables";
        default: return "User stories";
    }
}

std::optional<std::string> text_field(const Json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_string()) return std::nullopt;
    std::string v = text::trim(obj.at(key).get<std::string>());
    if (text::is_blank(v)) return std::nullopt;
    return v;
}

const Json* array_field(const Json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_array()) return nullptr;
    return &obj.at(key);
}

}  // namespace

void SuperAgentOptions::validate() const {
    if (n < 1) throw ConfigError("branching factor n must be >= 1");
    if (!cot_enabled) throw ConfigError("the super-agent baseline always runs with reasoning steps enabled");
    if (fd_max_attempts < 1) throw ConfigError("fd_max_attempts must be >= 1");
}

SuperAgent::SuperAgent(const TemplateStore& templates, Gateway& gateway, BackendConfig backend,
                       BackendConfig format_doctor_backend, SuperAgentOptions opts, ElementLabels labels)
    : templates_(templates),
      gateway_(gateway),
      backend_(std::move(backend)),
      fd_backend_(std::move(format_doctor_backend)),
      opts_(opts),
      labels_(std::move(labels)) {
    opts_.validate();
}

std::pair<std::string, std::string> SuperAgent::build_prompt(const ProjectContext& context,
                                                             const Goal& goal) const {
    const int n = opts_.n;
    const Vars vars{{"n", std::to_string(n)},
                    {"total", std::to_string(n * n * n)},
                    {"impact_label", labels_.impact},
                    {"deliverable_label", labels_.deliverable}};

    // Same guideline fragments the fleet agents see, one block per level.
    std::string guidelines;
    for (AgentRole role : kStages) {
        const std::string file(role_key(role));
        Vars role_vars = vars;
        role_vars["n"] = role == AgentRole::TacticalOfficer ? "1" : std::to_string(n);
        if (!guidelines.empty()) guidelines += "\n\n";
        guidelines += stage_heading(role);
        guidelines += ":\n";
        guidelines += templates_.render(file, "guidelines", role_vars);
    }

    std::string cot = templates_.render("layout", "cot_block",
                                        {{"steps", templates_.render("super_agent", "cot", vars)}}) +
                      "\n\n";
    std::string user = templates_.render(
        "layout", "super_agent",
        {{"ref_info", render_ref_info(templates_, RefInfo{context, goal, {}, {}, {}}, labels_)},
         {"task", templates_.render("super_agent", "task", vars)},
         {"guidelines", guidelines},
         {"cot", cot},
         {"output_format", templates_.render("super_agent", "output_format", vars)}});
    return {templates_.render("super_agent", "role", vars), tidy_prompt(std::move(user))};
}

SuperAgentResult SuperAgent::run(const ProjectContext& context, const Goal& goal) {
    if (auto v = validate_context(context); !v.empty()) throw InvariantError(std::move(v), "project context");
    if (auto v = validate_goal(goal); !v.empty()) throw InvariantError(std::move(v), "goal");

    auto [system, user] = build_prompt(context, goal);
    auto ex = gateway_.complete(backend_, system, user, "super_agent");
    auto fixed = format_doctor(ex.response_text, opts_.fd_max_attempts, gateway_, fd_backend_, templates_);
    SuperAgentResult result = parse_super_agent_output(Json::parse(fixed.json_text), goal, opts_.n);
    result.repaired = fixed.repaired();
    return result;
}

SuperAgentResult parse_super_agent_output(const Json& doc, const Goal& goal, int n) {
    SuperAgentResult r;
    r.tree.goal = goal;
    auto warn = [&](std::string msg) { r.warnings.push_back(std::move(msg)); };

    const Json* actors = array_field(doc, "actors");
    if (!actors) {
        warn("response has no \"actors\" array");
    } else {
        for (std::size_t ai = 0; ai < actors->size(); ++ai) {
            const Json& ja = (*actors)[ai];
            auto actor = text_field(ja, "actor");
            if (!actor) {
                warn(fmt::format("actors[{}]: missing actor text", ai));
                continue;
            }
            ActorNode an{Actor{*actor}, kSuperAgentProvenance, {}};
            const Json* impacts = array_field(ja, "impacts");
            if (!impacts) warn(fmt::format("actors[{}]: missing impacts", ai));
            for (std::size_t ii = 0; impacts && ii < impacts->size(); ++ii) {
                const Json& ji = (*impacts)[ii];
                auto impact = text_field(ji, "impact");
                if (!impact) {
                    warn(fmt::format("actors[{}].impacts[{}]: missing impact text", ai, ii));
                    continue;
                }
                ImpactNode in{Impact{*impact, an.actor.text}, kSuperAgentProvenance, {}};
                const Json* deliverables = array_field(ji, "deliverables");
                if (!deliverables) warn(fmt::format("actors[{}].impacts[{}]: missing deliverables", ai, ii));
                for (std::size_t di = 0; deliverables && di < deliverables->size(); ++di) {
                    const Json& jd = (*deliverables)[di];
                    auto deliverable = text_field(jd, "deliverable");
                    std::string where = fmt::format("actors[{}].impacts[{}].deliverables[{}]", ai, ii, di);
                    if (!deliverable) {
                        warn(where + ": missing deliverable text");
                        continue;
                    }
                    DeliverableNode dn{Deliverable{*deliverable, in.impact.text}, kSuperAgentProvenance, {}};
                    if (!jd.is_object() || !jd.contains("user_story")) {
                        warn(where + ": missing user_story");
                    } else {
                        try {
                            UserStory us = user_story_from_json(jd.at("user_story"));
                            if (auto v = validate_user_story(us); v.empty())
                                dn.stories.push_back({std::move(us), kSuperAgentProvenance});
                            else
                                warn(fmt::format("{}: user story dropped ({})", where, fmt::join(v, ", ")));
                        } catch (const SchemaError& e) {
                            warn(where + ": " + e.what());
                        }
                    }
                    in.deliverables.push_back(std::move(dn));
                }
                an.impacts.push_back(std::move(in));
            }
            r.tree.actors.push_back(std::move(an));
        }
    }

    r.results = tree_to_results(r.tree);
    const std::size_t expected = static_cast<std::size_t>(n) * n * n;
    if (r.results.size() < expected)
        warn(fmt::format("degraded output: {} of {} expected user stories", r.results.size(), expected));
    return r;
}

}  // namespace g2s
