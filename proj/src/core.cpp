#include "g2s/core.hpp"

#include <array>
#include <fmt/format.h>

#include "g2s/text.hpp"

namespace g2s {

namespace {

struct RoleInfo {
    AgentRole role;
    std::string_view key;
    std::string_view name;
};

constexpr std::array<RoleInfo, 6> kRoles{{
    {AgentRole::AlphaCaptain, "alpha_captain", "Alpha Captain"},
    {AgentRole::IntelligenceOfficer, "intelligence_officer", "Intelligence Officer"},
    {AgentRole::DeliveryCoordinator, "delivery_coordinator", "Delivery Coordinator"},
    {AgentRole::TacticalOfficer, "tactical_officer", "Tactical Officer"},
    {AgentRole::FormatDoctor, "format_doctor", "Format Doctor"},
    {AgentRole::SuperAgent, "super_agent", "Super-Agent"},
}};

// Lexical stand-in for "starts with a verb": any of these as the first
// token means the action is phrased as a noun phrase, clause or passive.
constexpr std::string_view kNonVerbLeads[] = {
    // articles and determiners
    "a", "an", "the", "this", "that", "these", "those", "some", "any", "each", "every",
    // pronouns
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them",
    "my", "your", "his", "its", "our", "their", "there",
    // prepositions
    "in", "on", "at", "to", "for", "with", "by", "from", "of", "about", "as", "into",
    "onto", "upon", "within", "without", "through", "over", "under", "after", "before",
    "during",
    // auxiliaries and modals
    "is", "are", "was", "were", "be", "been", "being", "am", "will", "shall", "should",
    "would", "can", "could", "may", "might", "must", "has", "have", "had",
};

void require_string(const Json& j, std::string_view key, const std::string& path) {
    if (!j.contains(key)) throw SchemaError(path, "missing");
    if (!j.at(key).is_string()) throw SchemaError(path, "expected string");
}

std::string get_string(const Json& j, std::string_view key, std::string_view prefix = {}) {
    std::string path = prefix.empty() ? std::string(key) : fmt::format("{}.{}", prefix, key);
    require_string(j, key, path);
    return j.at(key).get<std::string>();
}

void require_object(const Json& j, std::string_view path) {
    if (!j.is_object()) throw SchemaError(std::string(path.empty() ? "<root>" : path), "expected object");
}

void check_empty(std::vector<std::string>& out, std::string_view field, std::string_view value) {
    if (text::is_blank(value)) out.push_back(fmt::format("{}:empty", field));
}

void append_prefixed(std::vector<std::string>& out, std::string_view prefix,
                     const std::vector<std::string>& in) {
    for (const auto& v : in) out.push_back(fmt::format("{}.{}", prefix, v));
}

bool same_text(std::string_view a, std::string_view b) {
    return text::normalize(a) == text::normalize(b);
}

}  // namespace

std::string_view role_key(AgentRole role) {
    for (const auto& r : kRoles)
        if (r.role == role) return r.key;
    return "unknown";
}

std::string_view role_name(AgentRole role) {
    for (const auto& r : kRoles)
        if (r.role == role) return r.name;
    return "Unknown";
}

std::optional<AgentRole> role_from_key(std::string_view key) {
    for (const auto& r : kRoles)
        if (r.key == key) return r.role;
    return std::nullopt;
}

TreeCounts count_nodes(const ImpactMapTree& tree) {
    TreeCounts c;
    for (const auto& a : tree.actors) {
        ++c.actors;
        for (const auto& i : a.impacts) {
            ++c.impacts;
            for (const auto& d : i.deliverables) {
                ++c.deliverables;
                c.stories += d.stories.size();
            }
        }
    }
    return c;
}

bool is_non_verb_lead(std::string_view token) {
    for (auto w : kNonVerbLeads)
        if (w == token) return true;
    return false;
}

std::vector<std::string> validate_user_story(const UserStory& us) {
    std::vector<std::string> out;
    check_empty(out, "actor", us.actor);
    check_empty(out, "action", us.action);
    check_empty(out, "expected_outcome", us.expected_outcome);
    if (!text::is_blank(us.action) && is_non_verb_lead(text::first_token(us.action)))
        out.emplace_back("action:not_verb_leading");
    return out;
}

std::vector<std::string> validate_context(const ProjectContext& ctx) {
    std::vector<std::string> out;
    check_empty(out, "background", ctx.background);
    check_empty(out, "problems", ctx.problems);
    return out;
}

std::vector<std::string> validate_goal(const Goal& goal) {
    std::vector<std::string> out;
    check_empty(out, "goal", goal.text);
    return out;
}

std::vector<std::string> validate_im_result(const IMResult& r) {
    std::vector<std::string> out = validate_goal(r.goal);
    check_empty(out, "actor", r.actor.text);
    check_empty(out, "impact", r.impact.text);
    check_empty(out, "deliverable", r.deliverable.text);
    if (!same_text(r.impact.actor, r.actor.text)) out.emplace_back("impact:parent_mismatch");
    if (!same_text(r.deliverable.impact, r.impact.text))
        out.emplace_back("deliverable:parent_mismatch");
    append_prefixed(out, "user_story", validate_user_story(r.user_story));
    return out;
}

std::vector<std::string> validate_record(const StorySeekRecord& rec) {
    std::vector<std::string> out;
    check_empty(out, "project_id", rec.project_id);
    auto r = validate_im_result(rec.im_result);
    out.insert(out.end(), r.begin(), r.end());
    auto c = validate_context(rec.project_info);
    out.insert(out.end(), c.begin(), c.end());
    return out;
}

std::vector<std::string> validate_record_structure(const StorySeekRecord& rec) {
    auto all = validate_record(rec);
    std::erase_if(all, [](const std::string& v) { return v.ends_with(":not_verb_leading"); });
    return all;
}

// ---------------------------------------------------------------------------

Json to_json(const UserStory& us) {
    return Json{{"actor", us.actor}, {"action", us.action}, {"expected_outcome", us.expected_outcome}};
}

Json to_json(const IMResult& r) {
    return Json{{"goal", r.goal.text},
                {"actor", r.actor.text},
                {"impact", r.impact.text},
                {"deliverable", r.deliverable.text},
                {"user_story", to_json(r.user_story)}};
}

Json to_json(const ProjectContext& ctx) {
    Json j{{"background", ctx.background}, {"problems", ctx.problems}};
    if (ctx.solutions) j["solutions"] = *ctx.solutions;
    return j;
}

Json to_json(const StorySeekRecord& rec) {
    Json j = to_json(rec.im_result);
    j["project_id"] = rec.project_id;
    j.update(to_json(rec.project_info));
    return j;
}

Json to_json(const Provenance& p) {
    return Json{{"agent", role_key(p.role)}, {"attempts", p.attempts}, {"repaired", p.repaired}};
}

Json to_json(const ImpactMapTree& tree) {
    Json actors = Json::array();
    for (const auto& a : tree.actors) {
        Json impacts = Json::array();
        for (const auto& i : a.impacts) {
            Json deliverables = Json::array();
            for (const auto& d : i.deliverables) {
                Json stories = Json::array();
                for (const auto& s : d.stories)
                    stories.push_back({{"user_story", to_json(s.story)}, {"provenance", to_json(s.provenance)}});
                deliverables.push_back({{"deliverable", d.deliverable.text},
                                        {"provenance", to_json(d.provenance)},
                                        {"user_stories", std::move(stories)}});
            }
            impacts.push_back({{"impact", i.impact.text},
                               {"provenance", to_json(i.provenance)},
                               {"deliverables", std::move(deliverables)}});
        }
        actors.push_back({{"actor", a.actor.text},
                          {"provenance", to_json(a.provenance)},
                          {"impacts", std::move(impacts)}});
    }
    return Json{{"goal", tree.goal.text}, {"actors", std::move(actors)}};
}

UserStory user_story_from_json(const Json& j, std::string_view prefix) {
    require_object(j, prefix);
    UserStory us;
    us.actor = get_string(j, "actor", prefix);
    us.action = get_string(j, "action", prefix);
    us.expected_outcome = get_string(j, "expected_outcome", prefix);
    return us;
}

IMResult im_result_from_json(const Json& j) {
    require_object(j, "");
    IMResult r;
    r.goal.text = get_string(j, "goal");
    r.actor.text = get_string(j, "actor");
    r.impact.text = get_string(j, "impact");
    r.impact.actor = r.actor.text;
    r.deliverable.text = get_string(j, "deliverable");
    r.deliverable.impact = r.impact.text;
    if (!j.contains("user_story")) throw SchemaError("user_story", "missing");
    r.user_story = user_story_from_json(j.at("user_story"));
    return r;
}

ProjectContext context_from_json(const Json& j) {
    require_object(j, "");
    ProjectContext ctx;
    ctx.background = get_string(j, "background");
    ctx.problems = get_string(j, "problems");
    if (j.contains("solutions") && !j.at("solutions").is_null()) {
        if (!j.at("solutions").is_string()) throw SchemaError("solutions", "expected string");
        ctx.solutions = j.at("solutions").get<std::string>();
    }
    return ctx;
}

StorySeekRecord record_from_json(const Json& j) {
    require_object(j, "");
    StorySeekRecord rec;
    rec.project_id = get_string(j, "project_id");
    rec.im_result = im_result_from_json(j);
    rec.project_info = context_from_json(j);
    return rec;
}

Provenance provenance_from_json(const Json& j) {
    require_object(j, "provenance");
    Provenance p;
    auto role = role_from_key(get_string(j, "agent", "provenance"));
    if (!role) throw SchemaError("provenance.agent", "unknown agent role");
    p.role = *role;
    p.attempts = j.value("attempts", 1);
    p.repaired = j.value("repaired", false);
    return p;
}

ImpactMapTree tree_from_json(const Json& j) {
    require_object(j, "tree");
    ImpactMapTree tree;
    tree.goal.text = get_string(j, "goal", "tree");
    for (const auto& ja : j.value("actors", Json::array())) {
        ActorNode a;
        a.actor.text = get_string(ja, "actor", "tree.actors");
        a.provenance = provenance_from_json(ja.at("provenance"));
        for (const auto& ji : ja.value("impacts", Json::array())) {
            ImpactNode i;
            i.impact = {get_string(ji, "impact", "tree.impacts"), a.actor.text};
            i.provenance = provenance_from_json(ji.at("provenance"));
            for (const auto& jd : ji.value("deliverables", Json::array())) {
                DeliverableNode d;
                d.deliverable = {get_string(jd, "deliverable", "tree.deliverables"), i.impact.text};
                d.provenance = provenance_from_json(jd.at("provenance"));
                for (const auto& js : jd.value("user_stories", Json::array()))
                    d.stories.push_back({user_story_from_json(js.at("user_story")),
                                         provenance_from_json(js.at("provenance"))});
                i.deliverables.push_back(std::move(d));
            }
            a.impacts.push_back(std::move(i));
        }
        tree.actors.push_back(std::move(a));
    }
    return tree;
}

std::string serialize_im_result(const IMResult& r) {
    return to_json(r).dump();
}

IMResult deserialize_im_result(std::string_view text) {
    Json j = Json::parse(text, nullptr, false);
    if (j.is_discarded()) throw SchemaError("<root>", "not valid JSON");
    return im_result_from_json(j);
}

std::vector<IMResult> tree_to_results(const ImpactMapTree& tree) {
    std::vector<IMResult> out;
    for (const auto& a : tree.actors)
        for (const auto& i : a.impacts)
            for (const auto& d : i.deliverables)
                for (const auto& s : d.stories)
                    out.push_back({tree.goal, a.actor, i.impact, d.deliverable, s.story});
    return out;
}

std::string make_goal_id(std::string_view project_id, std::string_view goal_text) {
    return fmt::format("{}#{:016x}", project_id, text::fnv1a64(text::normalize(goal_text)));
}

}  // namespace g2s
