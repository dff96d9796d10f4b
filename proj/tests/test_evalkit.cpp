#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "g2s/evalkit.hpp"
#include "g2s/reports.hpp"
#include "testkit.hpp"

using namespace g2s;
using namespace g2s::testkit;

namespace {

const TemplateStore& templates() {
    static const TemplateStore t = TemplateStore::load_default();
    return t;
}

/// Embedder whose three element similarities are chosen directly: actor,
/// action and outcome texts of the reference embed to e1, the generated ones
/// to (s, sqrt(1 - s^2)).
class ScoreEmbedder final : public Embedder {
public:
    explicit ScoreEmbedder(std::map<std::string, Vector> t) : table_(std::move(t)) {}
    std::vector<Vector> embed(std::span<const std::string> texts) override {
        std::vector<Vector> v;
        for (const auto& t : texts) v.push_back(table_.at(t));
        return v;
    }

private:
    std::map<std::string, Vector> table_;
};

Vector at_angle(double s) { return {s, std::sqrt(std::max(0.0, 1.0 - s * s))}; }

ElementHit scored_hit(double a, double b, double c, const Thresholds& th = {}) {
    ScoreEmbedder e({{"ra", {1, 0}}, {"rb", {1, 0}}, {"rc", {1, 0}},
                     {"ga", at_angle(a)}, {"gb", at_angle(b)}, {"gc", at_angle(c)}});
    return element_hit({"ga", "gb", "gc"}, {"ra", "rb", "rc"}, th, e);
}

}  // namespace

TEST_SUITE("evalkit") {
    TEST_CASE("cosine examples") {
        std::vector<double> a{1, 0}, b{0, 1}, c{1, 2, 2}, d{2, 1, 2};
        CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
        CHECK(cosine_similarity(a, b) == doctest::Approx(0.0));
        CHECK(cosine_similarity(c, d) == doctest::Approx(8.0 / 9.0));
        std::vector<double> scaled{10, 20, 20};
        CHECK(cosine_similarity(scaled, d) == doctest::Approx(cosine_similarity(c, d)));
        CHECK(cosine_similarity(c, d) == doctest::Approx(cosine_similarity(d, c)));
        std::vector<double> z{0, 0};
        CHECK_THROWS_AS(cosine_similarity(a, z), PreconditionError);
        CHECK_THROWS_AS(cosine_similarity(a, c), PreconditionError);
    }

    TEST_CASE("thresholds and element hits") {
        Thresholds th;
        CHECK(th.actor == 0.70);
        CHECK(th.action == 0.60);
        CHECK(th.expected_outcome == 0.60);
        CHECK(passes({0.72, 0.61, 0.65}, th));
        CHECK_FALSE(passes({0.69, 0.99, 0.99}, th));
        CHECK(scored_hit(0.72, 0.61, 0.65).pass);
        CHECK_FALSE(scored_hit(0.69, 0.99, 0.99).pass);
        CHECK_THROWS_AS((Thresholds{1.5, 0, 0}.validate()), ConfigError);

        ScoreEmbedder same({{"x", {0.3, 0.4}}, {"y", {1, 1}}, {"z", {2, 0}}});
        auto h = element_hit({"x", "y", "z"}, {"x", "y", "z"}, th, same);
        CHECK(h.pass);
        for (double s : h.scores) CHECK(s == doctest::Approx(1.0));
    }

    TEST_CASE("goal_hit examples") {
        auto table = one_hot({"A1", "B1", "C1", "A2", "B2", "C2", "R1a", "R1b", "R1c", "R2a", "R2b", "R2c"});
        // gen2 equals ref1 on every element.
        table["A2"] = table["R1a"];
        table["B2"] = table["R1b"];
        table["C2"] = table["R1c"];
        TableEmbedder e(table);
        std::vector<UserStory> gen{{"A1", "B1", "C1"}, {"A2", "B2", "C2"}};
        std::vector<UserStory> ref{{"R1a", "R1b", "R1c"}, {"R2a", "R2b", "R2c"}};
        auto r = goal_hit(gen, ref, {}, e, "goal");
        CHECK(r.hit);
        REQUIRE(r.evidence.size() == 4);
        int passing = 0;
        for (const auto& ev : r.evidence) {
            if (ev.pass) {
                ++passing;
                CHECK(ev.generated_index == 1);
                CHECK(ev.reference_index == 0);
            }
        }
        CHECK(passing == 1);
        CHECK(e.calls == 1);

        std::vector<UserStory> eight(8, UserStory{"A1", "B1", "C1"});
        std::vector<UserStory> one{{"R2a", "R2b", "R2c"}};
        CHECK_FALSE(goal_hit(eight, one, {}, e).hit);
        CHECK_THROWS_AS(goal_hit({}, one, {}, e), PreconditionError);
        CHECK_THROWS_AS(goal_hit(eight, {}, {}, e), PreconditionError);
    }

    TEST_CASE("embedding cache never asks twice") {
        TableEmbedder inner(one_hot({"a", "b", "c"}));
        CachedEmbedder cache(inner);
        std::vector<std::string> t1{"a", "b", "a"}, t2{"b", "c"}, t3{"a"};
        cache.embed(t1);
        cache.embed(t2);
        cache.embed(t3);
        CHECK(inner.calls == 2);
        CHECK(inner.texts_seen == 3);
        CHECK(cache.size() == 3);
    }

    TEST_CASE("compute_fhr per-project arithmetic") {
        // Four goals in one project, hits T F T T.
        std::vector<StorySeekRecord> ds;
        std::vector<GoalRun> runs;
        std::vector<std::string> texts;
        for (int g = 0; g < 4; ++g) {
            UserStory ref{"ra" + std::to_string(g), "rb" + std::to_string(g), "rc" + std::to_string(g)};
            ds.push_back(make_record("p", "goal " + std::to_string(g), ref));
            UserStory gen = g == 1 ? UserStory{"x", "y", "z"} : ref;
            runs.push_back({"p", make_goal_id("p", "goal " + std::to_string(g)), {gen}});
            texts.insert(texts.end(), {ref.actor, ref.action, ref.expected_outcome});
        }
        texts.insert(texts.end(), {"x", "y", "z"});
        TableEmbedder e(one_hot(texts));
        auto rep = compute_fhr(runs, ds, {}, e);
        REQUIRE(rep.projects.size() == 1);
        CHECK(rep.projects[0].hits == 3);
        CHECK(rep.projects[0].total == 4);
        CHECK(rep.projects[0].rate() == 0.75);
        CHECK(rep.macro_mean == 0.75);
        CHECK(rep.micro_rate == 0.75);
        CHECK(e.calls <= texts.size());

        runs.pop_back();  // a goal without a run is a miss
        CHECK(compute_fhr(runs, ds, {}, e).projects[0].hits == 2);

        runs.push_back({"p", make_goal_id("p", "unknown"), {{"x", "y", "z"}}});
        CHECK_THROWS_AS(compute_fhr(runs, ds, {}, e), UnmatchedGoalError);
    }

    TEST_CASE("macro mean of a ten-project row") {
        std::vector<double> row{0.6667, 0.5385, 0.5152, 0.7843, 0.6827, 0.6696, 0.7357, 0.6250, 0.6442, 0.6084};
        CHECK(std::abs(macro_mean(row) * 100.0 - 64.70) <= 0.005);
        CHECK_THROWS_AS(macro_mean({}), PreconditionError);
    }

    TEST_CASE("randomized fhr properties") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int trial = 0; trial < 30; ++trial) {
            std::map<std::string, Vector> table;
            std::vector<std::string> pool;
            for (int k = 0; k < 12; ++k) {
                pool.push_back("t" + std::to_string(k));
                Vector v(3);
                for (auto& x : v) x = std::abs(u(rng)) + 0.01;  // non-negative similarities
                table[pool.back()] = v;
            }
            auto pick = [&] {
                auto s = [&] { return pool[rng() % pool.size()]; };
                return UserStory{s(), s(), s()};
            };
            std::vector<StorySeekRecord> ds;
            std::vector<GoalRun> runs;
            for (int g = 0; g < 5; ++g) {
                std::string project = g % 2 ? "odd" : "even";
                std::string goal = "goal " + std::to_string(g);
                ds.push_back(make_record(project, goal, pick()));
                runs.push_back({project, make_goal_id(project, goal), {pick(), pick()}});
            }
            TableEmbedder e(table);
            auto zero = compute_fhr(runs, ds, {0, 0, 0}, e);
            for (const auto& p : zero.projects) CHECK(p.rate() == 1.0);
            auto high = compute_fhr(runs, ds, {1.0 + 1e-9, 1.0 + 1e-9, 1.0 + 1e-9}, e);
            // thresholds above 1 are invalid config but still make every goal miss
            for (const auto& p : high.projects) CHECK(p.rate() == 0.0);

            Thresholds th{0.9, 0.9, 0.9};
            auto before = compute_fhr(runs, ds, th, e);
            runs[trial % runs.size()].stories.push_back(pick());
            auto after = compute_fhr(runs, ds, th, e);
            for (std::size_t p = 0; p < before.projects.size(); ++p)
                CHECK(after.projects[p].rate() >= before.projects[p].rate());
        }
    }

    TEST_CASE("judge verdict parsing") {
        auto ok = parse_judge_verdict(R"({"score":1,"failed":[]})");
        CHECK(ok.score == 1);
        CHECK(ok.failed_criteria.empty());
        auto bad = parse_judge_verdict(R"({"score":0,"failed":["syntactic"]})");
        CHECK(bad.score == 0);
        CHECK(bad.failed_criteria == std::vector<std::string>{"syntactic"});
        auto fixed = parse_judge_verdict(R"({"score":1,"failed":["semantic"]})");
        CHECK(fixed.score == 0);
        CHECK(parse_judge_verdict(R"({"score":"1"})").score == 1);
        CHECK_THROWS_AS(parse_judge_verdict(R"({"score":2})"), JudgeFormatError);
        CHECK_THROWS_AS(parse_judge_verdict(R"({"score":0,"failed":["vibes"]})"), JudgeFormatError);
        CHECK_THROWS_AS(parse_judge_verdict(R"({"score":0,"failed":[]})"), JudgeFormatError);
        CHECK_THROWS_AS(parse_judge_verdict("1"), JudgeFormatError);
    }

    TEST_CASE("judge prompt modes") {
        UserStory us{"Member", "book a court online", "skip the phone queue"};
        auto [sys, gen] = build_judge_prompt(templates(), us, sample_context(), {"g"}, QuaceMode::Generated);
        auto [sys2, chk] = build_judge_prompt(templates(), us, sample_context(), {"g"}, QuaceMode::DatasetCheck);
        CHECK(gen.find("must include elements of actor") != std::string::npos);
        CHECK(gen.find("consistency_factual") == std::string::npos);
        CHECK(chk.find("consistency_factual") != std::string::npos);
        CHECK(gen.find("book a court online") != std::string::npos);
        CHECK(sys == sys2);
    }

    TEST_CASE("quace_evaluate replays and repairs once") {
        UserStory us{"Member", "book a court online", "skip the phone queue"};
        ScriptedFixture fx;
        fx.chat.push_back(judge_entry("Validation Agent", 0, {"pragmatic"}, false));
        ScriptedEntry broken;
        broken.contains = "Validation Agent";
        broken.response = "{\"score\": 1, \"failed\": [],}";
        fx.chat.push_back(broken);
        ScriptedEntry repair;
        repair.contains = "Please repair";
        repair.response = "{\"score\": 1, \"failed\": []}";
        fx.chat.push_back(repair);
        fx.chat.push_back(broken);
        ScriptedEntry still;
        still.contains = "Please repair";
        still.response = "nope";
        fx.chat.push_back(still);
        ScriptedEnv env(fx);
        auto v1 = quace_evaluate(us, sample_context(), {"g"}, {}, QuaceMode::Generated, env.gateway, templates());
        CHECK(v1.score == 0);
        CHECK(v1.failed_criteria == std::vector<std::string>{"pragmatic"});
        auto v2 = quace_evaluate(us, sample_context(), {"g"}, {}, QuaceMode::Generated, env.gateway, templates());
        CHECK(v2.score == 1);
        CHECK(v2.judge_raw == broken.response);
        CHECK_THROWS_AS(
            quace_evaluate(us, sample_context(), {"g"}, {}, QuaceMode::Generated, env.gateway, templates()),
            JudgeFormatError);
        CHECK(env.gateway.chat_calls("judge") == 3);
    }

    TEST_CASE("quace_rate") {
        auto v = [](int s) { return QuaceVerdict{s, s ? std::vector<std::string>{} : std::vector<std::string>{"semantic"}, ""}; };
        std::vector<QuaceVerdict> four{v(1), v(1), v(0), v(1)};
        CHECK(quace_rate(four) == 0.75);
        std::vector<QuaceVerdict> all(5, v(1));
        CHECK(quace_rate(all) == 1.0);
        std::vector<QuaceVerdict> big(1005, v(1));
        for (int k = 0; k < 20; ++k) big[k * 50] = v(0);
        CHECK(std::abs(quace_rate(big) - 0.9801) <= 0.0001);
        CHECK_THROWS_AS(quace_rate({}), PreconditionError);
    }

    TEST_CASE("seeded sampling") {
        auto a = seeded_sample(100, 10, 42);
        CHECK(a == seeded_sample(100, 10, 42));
        CHECK(a != seeded_sample(100, 10, 43));
        CHECK(a.size() == 10);
        CHECK(std::is_sorted(a.begin(), a.end()));
        CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
        CHECK(seeded_sample(3, 10, 1) == std::vector<std::size_t>{0, 1, 2});
        // Rough uniformity: every index is drawn in 2000 draws of 1 from 10.
        std::vector<int> hits(10);
        for (std::uint64_t s = 0; s < 2000; ++s) ++hits[seeded_sample(10, 1, s)[0]];
        for (int h : hits) CHECK(h > 120);
    }

    TEST_CASE("alignment metrics") {
        auto t2 = alignment_metrics(ConfusionTable::from_rows(23, 8, 7, 22));
        CHECK(*t2.precision * 100 == doctest::Approx(76.67).epsilon(0.0001));
        CHECK(*t2.recall * 100 == doctest::Approx(74.19).epsilon(0.0001));
        CHECK(*t2.f1 * 100 == doctest::Approx(75.41).epsilon(0.0001));
        CHECK(*t2.alignment_rate * 100 == doctest::Approx(75.00).epsilon(0.0001));
        CHECK(*t2.fpr * 100 == doctest::Approx(24.14).epsilon(0.0001));

        auto perfect = alignment_metrics({10, 0, 0, 10});
        CHECK(*perfect.precision == 1.0);
        CHECK(*perfect.recall == 1.0);
        CHECK(*perfect.f1 == 1.0);
        CHECK(*perfect.alignment_rate == 1.0);
        CHECK(*perfect.fpr == 0.0);

        auto no_pos = alignment_metrics({0, 0, 0, 5});
        CHECK_FALSE(no_pos.precision.has_value());
        CHECK_FALSE(no_pos.recall.has_value());
        CHECK_FALSE(no_pos.f1.has_value());
        CHECK(*no_pos.fpr == 0.0);
        CHECK_THROWS_AS(alignment_metrics({0, 0, 0, 0}), PreconditionError);
        CHECK(format_percent(no_pos.precision) == "undefined");
    }
}

TEST_SUITE("reports") {
    TEST_CASE("csv and markdown") {
        FhrReport r;
        r.projects = {{"alpha", 3, 4}, {"b,eta", 1, 3}};
        r.macro_mean = (0.75 + 1.0 / 3.0) / 2;
        CHECK(fhr_csv(r) == "project_id,hits,total,rate\nalpha,3,4,0.750000\n\"b,eta\",1,3,0.333333\n");
        FhrReport other;
        other.projects = {{"alpha", 1, 4}};
        other.macro_mean = 0.25;
        auto md = summary_markdown({{"fleet", "m1", r, 0.9}, {"super_agent", "m1", other, std::nullopt}});
        CHECK(md.find("| Method | Model | alpha | b,eta | Mean | QuACE |") == 0);
        CHECK(md.find("| fleet | m1 | 75.00 | 33.33 | 54.17 | 90.00 |") != std::string::npos);
        CHECK(md.find("| super_agent | m1 | 25.00 | - | 25.00 | - |") != std::string::npos);
    }

    TEST_CASE("alignment text marks undefined values") {
        ConfusionTable ct{0, 0, 3, 2};
        auto txt = alignment_text(ct, alignment_metrics(ct));
        CHECK(txt.find("recall: undefined") != std::string::npos);
        CHECK(txt.find("fpr: 60.00") != std::string::npos);
    }

    TEST_CASE("evidence lines") {
        FhrReport r;
        r.goals.push_back({"g1", true, {{0, 0, {1, 1, 1}, {true, true, true}, true}}});
        r.goals.push_back({"g2", false, {}});
        auto lines = evidence_jsonl(r);
        CHECK(std::count(lines.begin(), lines.end(), '\n') == 2);
        CHECK(Json::parse(lines.substr(0, lines.find('\n')))["hit"] == true);
    }
}
