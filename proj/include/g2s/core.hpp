#pragma once

#include <json.hpp>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "g2s/errors.hpp"

namespace g2s {

using Json = nlohmann::json;

struct ProjectContext {
    std::string background;
    std::string problems;
    std::optional<std::string> solutions;  // dataset records only

    bool operator==(const ProjectContext&) const = default;
};

struct Goal {
    std::string text;
    bool operator==(const Goal&) const = default;
};

struct Actor {
    std::string text;
    bool operator==(const Actor&) const = default;
};

/// `actor` is the parent reference: the text of the actor this impact hangs off.
struct Impact {
    std::string text;
    std::string actor;
    bool operator==(const Impact&) const = default;
};

/// `impact` is the parent reference: the text of the owning impact.
struct Deliverable {
    std::string text;
    std::string impact;
    bool operator==(const Deliverable&) const = default;
};

struct UserStory {
    std::string actor;
    std::string action;
    std::string expected_outcome;
    bool operator==(const UserStory&) const = default;
};

/// One goal -> actor -> impact -> deliverable -> story path.
struct IMResult {
    Goal goal;
    Actor actor;
    Impact impact;
    Deliverable deliverable;
    UserStory user_story;
    bool operator==(const IMResult&) const = default;
};

struct StorySeekRecord {
    std::string project_id;
    IMResult im_result;
    ProjectContext project_info;
    bool operator==(const StorySeekRecord&) const = default;
};

enum class AgentRole {
    AlphaCaptain,
    IntelligenceOfficer,
    DeliveryCoordinator,
    TacticalOfficer,
    FormatDoctor,
    SuperAgent,  ///< single-prompt baseline, not part of the fleet
};

/// snake_case identifier, e.g. "alpha_captain". Used for config keys and asset names.
std::string_view role_key(AgentRole role);
/// Human label, e.g. "Alpha Captain".
std::string_view role_name(AgentRole role);
std::optional<AgentRole> role_from_key(std::string_view key);

/// Which agent call produced a tree node.
struct Provenance {
    AgentRole role = AgentRole::AlphaCaptain;
    int attempts = 1;
    bool repaired = false;
    bool operator==(const Provenance&) const = default;
};

struct StoryNode {
    UserStory story;
    Provenance provenance;
};

struct DeliverableNode {
    Deliverable deliverable;
    Provenance provenance;
    std::vector<StoryNode> stories;
};

struct ImpactNode {
    Impact impact;
    Provenance provenance;
    std::vector<DeliverableNode> deliverables;
};

struct ActorNode {
    Actor actor;
    Provenance provenance;
    std::vector<ImpactNode> impacts;
};

struct ImpactMapTree {
    Goal goal;
    std::vector<ActorNode> actors;
};

struct TreeCounts {
    std::size_t actors = 0;
    std::size_t impacts = 0;
    std::size_t deliverables = 0;
    std::size_t stories = 0;
    bool operator==(const TreeCounts&) const = default;
};

TreeCounts count_nodes(const ImpactMapTree& tree);

/// Display labels for the middle two levels of the map.
struct ElementLabels {
    std::string impact = "What";
    std::string deliverable = "How";
};

// ---------------------------------------------------------------------------
// Validation. Violations are "field:rule" labels; empty means valid.

std::vector<std::string> validate_user_story(const UserStory& us);
std::vector<std::string> validate_context(const ProjectContext& ctx);
std::vector<std::string> validate_goal(const Goal& goal);
std::vector<std::string> validate_im_result(const IMResult& r);
std::vector<std::string> validate_record(const StorySeekRecord& rec);

/// Structural subset of validate_record: drops lexical rules such as
/// "action:not_verb_leading" that imported data may legitimately break.
std::vector<std::string> validate_record_structure(const StorySeekRecord& rec);

/// True for first tokens that rule out a verb-leading action
/// (articles, pronouns, prepositions, auxiliaries).
bool is_non_verb_lead(std::string_view token);

// ---------------------------------------------------------------------------
// Canonical JSON. Field names are fixed: goal, actor, impact, deliverable,
// user_story, action, expected_outcome, background, problems, solutions,
// project_id. Unknown keys are ignored on input.

Json to_json(const UserStory& us);
Json to_json(const IMResult& r);
Json to_json(const StorySeekRecord& rec);
Json to_json(const ProjectContext& ctx);
Json to_json(const Provenance& p);
Json to_json(const ImpactMapTree& tree);

UserStory user_story_from_json(const Json& j, std::string_view prefix = "user_story");
IMResult im_result_from_json(const Json& j);
StorySeekRecord record_from_json(const Json& j);
ProjectContext context_from_json(const Json& j);
Provenance provenance_from_json(const Json& j);
ImpactMapTree tree_from_json(const Json& j);

std::string serialize_im_result(const IMResult& r);
IMResult deserialize_im_result(std::string_view text);

/// Flattens the tree in depth-first generation order, one result per story.
std::vector<IMResult> tree_to_results(const ImpactMapTree& tree);

/// Stable identifier for a (project, goal) pair; goal text is normalized first.
std::string make_goal_id(std::string_view project_id, std::string_view goal_text);

}  // namespace g2s
