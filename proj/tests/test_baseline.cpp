#include <doctest.h>

#include "g2s/baseline.hpp"
#include "testkit.hpp"

using namespace g2s;
using namespace g2s::testkit;

namespace {

const TemplateStore& templates() {
    static const TemplateStore t = TemplateStore::load_default();
    return t;
}

const std::string kGoal = "Halve no-show bookings";

ScriptedFixture sa_fixture(std::string reply) {
    ScriptedFixture fx;
    ScriptedEntry e;
    e.contains = kGoal;
    e.response = std::move(reply);
    fx.chat.push_back(e);
    return fx;
}

}  // namespace

TEST_SUITE("baseline") {
    TEST_CASE("full reply gives n^3 results from one call") {
        ScriptedEnv env(sa_fixture(super_agent_reply("s", 2)));
        SuperAgent sa(templates(), env.gateway, {}, {});
        auto r = sa.run(sample_context(), {kGoal});
        CHECK(r.results.size() == 8);
        CHECK_FALSE(r.degraded());
        CHECK(env.gateway.chat_calls() == 1);
        CHECK(env.gateway.chat_calls("super_agent") == 1);
        for (const auto& res : r.results) CHECK(validate_im_result(res).empty());
        CHECK(r.tree.actors[0].provenance.role == AgentRole::SuperAgent);
    }

    TEST_CASE("one call regardless of n") {
        for (int n = 1; n <= 3; ++n) {
            ScriptedEnv env(sa_fixture(super_agent_reply("s", n)));
            SuperAgentOptions o;
            o.n = n;
            SuperAgent sa(templates(), env.gateway, {}, {}, o);
            CHECK(sa.run(sample_context(), {kGoal}).results.size() == static_cast<std::size_t>(n * n * n));
            CHECK(env.gateway.chat_calls() == 1);
        }
    }

    TEST_CASE("short reply is degraded, not an error") {
        ScriptedEnv env(sa_fixture(super_agent_reply("s", 2, 2)));
        SuperAgent sa(templates(), env.gateway, {}, {});
        auto r = sa.run(sample_context(), {kGoal});
        CHECK(r.results.size() == 6);
        REQUIRE(r.degraded());
        CHECK(r.warnings.back().find("6 of 8") != std::string::npos);
    }

    TEST_CASE("unparseable reply exhausts the format doctor") {
        ScriptedFixture fx = sa_fixture("{\"actors\": [");
        ScriptedEntry bad;
        bad.contains = "Please repair";
        bad.response = "nope";
        bad.repeat = true;
        fx.chat.push_back(bad);
        ScriptedEnv env(fx);
        SuperAgent sa(templates(), env.gateway, {}, {});
        CHECK_THROWS_AS(sa.run(sample_context(), {kGoal}), FormatExhaustedError);
    }

    TEST_CASE("reasoning steps cannot be switched off") {
        ScriptedEnv env({});
        SuperAgentOptions o;
        o.cot_enabled = false;
        CHECK_THROWS_AS(SuperAgent(templates(), env.gateway, {}, {}, o), ConfigError);
    }

    TEST_CASE("prompt reuses the fleet guideline fragments") {
        ScriptedEnv env({});
        SuperAgent sa(templates(), env.gateway, {}, {});
        auto [system, user] = sa.build_prompt(sample_context(), {kGoal});
        for (const char* role : {"alpha_captain", "intelligence_officer", "delivery_coordinator"}) {
            std::string g = templates().render(role, "guidelines", {{"n", "2"}, {"impact_label", "What"},
                                                                  {"deliverable_label", "How"}});
            CHECK(user.find(g) != std::string::npos);
        }
        CHECK(user.find("Understanding the given Ref Info") != std::string::npos);
        CHECK(user.find(kGoal) != std::string::npos);
        CHECK_FALSE(system.empty());
    }

    TEST_CASE("lenient parser reports malformed branches") {
        Json doc = Json::parse(super_agent_reply("s", 2));
        doc["actors"][1].erase("impacts");
        doc["actors"][0]["impacts"][0]["deliverables"][0]["user_story"]["action"] = "the thing";
        auto r = parse_super_agent_output(doc, {kGoal}, 2);
        CHECK(r.results.size() == 3);
        CHECK(r.warnings.size() == 3);
        auto empty = parse_super_agent_output(Json::object(), {kGoal}, 2);
        CHECK(empty.results.empty());
        CHECK(empty.degraded());
    }
}
