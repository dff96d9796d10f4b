#include <doctest.h>

#include <sstream>

#include "g2s/cli.hpp"
#include "g2s/config.hpp"
#include "testkit.hpp"

using namespace g2s;
using namespace g2s::testkit;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

Json read_json(const fs::path& p) { return Json::parse(read_file(p)); }

std::size_t story_count(const fs::path& results_dir) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(results_dir)) n += read_json(e.path()).at("results").size();
    return n;
}

}  // namespace

TEST_SUITE("config") {
    TEST_CASE("defaults, merging and path resolution") {
        Json j{{"transport", {{"kind", "scripted"}, {"fixture", "fx.json"}}},
               {"backends",
                {{"default", {{"model", "base-model"}, {"temperature", 0.3}}},
                 {"judge", {{"model", "judge-model"}}}}},
               {"fleet", {{"n", 3}, {"cot", false}}},
               {"thresholds", {{"actor", 0.8}}}};
        auto cfg = config_from_json(j, "/tmp/cfgdir");
        CHECK(cfg.model_label == "base-model");
        CHECK(cfg.backend("judge").model_name == "judge-model");
        CHECK(cfg.backend("judge").temperature == doctest::Approx(0.3));
        CHECK(cfg.backend("tactical_officer").model_name == "base-model");
        CHECK(cfg.fleet.n == 3);
        CHECK_FALSE(cfg.fleet.cot_enabled);
        CHECK(cfg.thresholds.actor == 0.8);
        CHECK(cfg.thresholds.action == 0.6);
        REQUIRE(cfg.transport.fixture.has_value());
        CHECK(*cfg.transport.fixture == fs::path("/tmp/cfgdir/fx.json"));
        CHECK(to_json(cfg).dump().find("api_key\"") == std::string::npos);
    }

    TEST_CASE("unknown keys and bad values are rejected") {
        CHECK_THROWS_AS(config_from_json(Json{{"modle_label", "x"}}), ConfigError);
        CHECK_THROWS_AS(config_from_json(Json{{"backends", {{"captain", Json::object()}}}}), ConfigError);
        CHECK_THROWS_AS(config_from_json(Json{{"fleet", {{"n", 0}}}}).validate(), ConfigError);
        CHECK_THROWS_AS(config_from_json(Json{{"transport", {{"kind", "carrier-pigeon"}}}}).validate(), ConfigError);
    }

    TEST_CASE("threshold parsing") {
        auto t = parse_thresholds("0.5,0.4,0.3");
        CHECK(t.actor == 0.5);
        CHECK(t.action == 0.4);
        CHECK(t.expected_outcome == 0.3);
        CHECK_THROWS_AS(parse_thresholds("0.5,0.4"), ConfigError);
        CHECK_THROWS_AS(parse_thresholds("a,b,c"), ConfigError);
        CHECK_THROWS_AS(parse_thresholds("0.5,0.4,0.3,0.2"), ConfigError);
    }
}

TEST_SUITE("cli") {
    TEST_CASE("help and usage errors") {
        auto help = cli({"--help"});
        CHECK(help.code == 0);
        CHECK(help.out.find("eval-fhr") != std::string::npos);
        CHECK(cli({}).code == kExitUsage);
        CHECK(cli({"frobnicate"}).code == kExitUsage);
        CHECK(cli({"run"}).code == kExitUsage);
    }

    TEST_CASE("run, eval-fhr, eval-quace and report") {
        TempDir dir;
        auto ws = make_cli_workspace(dir.path);
        const auto gen = (dir.path / "gen").string();
        auto r = cli({"--config", ws.fleet_config.string(), "--output", gen, "run", "--dataset", ws.dataset.string()});
        INFO(r.err);
        REQUIRE(r.code == kExitOk);
        CHECK(std::distance(fs::directory_iterator(dir.path / "gen" / "results"), fs::directory_iterator{}) == 2);
        CHECK(story_count(dir.path / "gen" / "results") == 16);
        Json manifest = read_json(dir.path / "gen" / "run_manifest.json");
        CHECK(manifest["exit_status"] == 0);
        CHECK(manifest["counts"]["chat_calls"] == 30);
        CHECK(fs::exists(dir.path / "gen" / "exchanges.jsonl"));

        const auto fhr = (dir.path / "fhr").string();
        auto e = cli({"--config", ws.eval_config.string(), "--output", fhr, "eval-fhr", "--results", gen,
                      "--dataset", ws.dataset.string()});
        INFO(e.err);
        REQUIRE(e.code == kExitOk);
        Json s = read_json(dir.path / "fhr" / "fhr_summary.json");
        REQUIRE(s["projects"].size() == 2);
        CHECK(s["projects"][0]["project_id"] == "alpha");
        CHECK(s["projects"][0]["rate"].get<double>() == 1.0);
        CHECK(s["projects"][1]["rate"].get<double>() == 0.0);
        CHECK(s["macro_mean"].get<double>() == 0.5);
        CHECK(s["method"] == "fleet");
        CHECK(read_file(dir.path / "fhr" / "fhr.csv").find("alpha,1,1,1.000000") != std::string::npos);

        // Zero thresholds turn every goal into a hit.
        const auto loose = (dir.path / "loose").string();
        CHECK(cli({"--config", ws.eval_config.string(), "--output", loose, "--thresholds", "0,0,0", "eval-fhr",
                   "--results", gen, "--dataset", ws.dataset.string()})
                  .code == kExitOk);
        CHECK(read_json(dir.path / "loose" / "fhr_summary.json")["macro_mean"].get<double>() == 1.0);

        const auto q1 = (dir.path / "q1").string(), q2 = (dir.path / "q2").string();
        for (const auto& out : {q1, q2})
            REQUIRE(cli({"--config", ws.eval_config.string(), "--output", out, "eval-quace", "--results", gen})
                        .code == kExitOk);
        CHECK(read_file(dir.path / "q1" / "quace.jsonl") == read_file(dir.path / "q2" / "quace.jsonl"));
        Json qs = read_json(dir.path / "q1" / "quace_summary.json");
        CHECK(qs["sampled"] == 5);
        CHECK(qs["population"] == 16);

        auto big = cli({"--config", ws.eval_config.string(), "--output", (dir.path / "q3").string(), "eval-quace",
                        "--results", gen, "--sample", "40"});
        CHECK(big.code == kExitOk);
        CHECK(big.err.find("exceeds") != std::string::npos);
        CHECK(read_json(dir.path / "q3" / "quace_summary.json")["sampled"] == 16);

        auto rep = cli({"--output", (dir.path / "rep").string(), "report", "--from", fhr, "--from", q1});
        REQUIRE(rep.code == kExitOk);
        auto md = read_file(dir.path / "rep" / "summary.md");
        CHECK(md.find("| fleet | scripted-7b | 100.00 | 0.00 | 50.00 | 80.00 |") != std::string::npos);
        CHECK(cli({"--output", (dir.path / "rep2").string(), "report", "--from", q1}).code == kExitUsage);
        CHECK(cli({"--output", (dir.path / "rep3").string(), "report", "--from", gen}).code == kExitUsage);
    }

    TEST_CASE("a failing goal gives a partial exit and a recorded failure") {
        TempDir dir;
        auto ws = make_cli_workspace(dir.path);
        ScriptedFixture fx;
        add_fleet_goal(fx, {ws.goal_texts[0], "g0", 2});
        add_fleet_goal(fx, {ws.goal_texts[1], "g1", 2, Fault::FailDeliverables});
        write_file(dir.path / "fleet_fixture.json", fx.to_json().dump());
        auto r = cli({"--config", ws.fleet_config.string(), "--output", (dir.path / "out").string(), "run",
                      "--dataset", ws.dataset.string()});
        CHECK(r.code == kExitPartial);
        Json m = read_json(dir.path / "out" / "run_manifest.json");
        CHECK(m["counts"]["failed"] == 1);
        CHECK(m["goals"][1]["status"] == "failed");
        CHECK(m["goals"][1]["failed_stage"] == "delivery_coordinator");
        CHECK(std::distance(fs::directory_iterator(dir.path / "out" / "results"), fs::directory_iterator{}) == 1);
    }

    TEST_CASE("input errors exit with usage status") {
        TempDir dir;
        auto ws = make_cli_workspace(dir.path);
        write_file(dir.path / "empty.jsonl", "");
        auto r = cli({"--config", ws.fleet_config.string(), "--output", (dir.path / "o").string(), "run",
                      "--dataset", (dir.path / "empty.jsonl").string()});
        CHECK(r.code == kExitUsage);
        CHECK(read_json(dir.path / "o" / "run_manifest.json")["error"].is_string());
        auto missing = cli({"--config", ws.eval_config.string(), "--output", (dir.path / "p").string(), "eval-fhr",
                            "--results", (dir.path / "nope").string(), "--dataset", ws.dataset.string()});
        CHECK(missing.code != kExitOk);
        write_file(dir.path / "bad.json", R"({"colour": "blue"})");
        CHECK(cli({"--config", (dir.path / "bad.json").string(), "--output", (dir.path / "q").string(), "run",
                   "--dataset", ws.dataset.string()})
                  .code == kExitUsage);
        CHECK(cli({"--config", ws.fleet_config.string(), "--thresholds", "1,2", "--output",
                   (dir.path / "t").string(), "run", "--dataset", ws.dataset.string()})
                  .code == kExitUsage);
    }

    TEST_CASE("baseline reports degraded goals") {
        TempDir dir;
        auto ws = make_cli_workspace(dir.path);
        auto r = cli({"--config", ws.baseline_config.string(), "--output", (dir.path / "b").string(), "baseline",
                      "--dataset", ws.dataset.string()});
        INFO(r.err);
        CHECK(r.code == kExitOk);
        Json m = read_json(dir.path / "b" / "run_manifest.json");
        CHECK(m["goals"][0]["status"] == "ok");
        CHECK(m["goals"][1]["status"] == "degraded");
        CHECK(m["counts"]["stories"] == 14);
        CHECK(m["counts"]["chat_calls"] == 2);
        CHECK(cli({"--config", ws.baseline_config.string(), "--no-cot", "--output", (dir.path / "c").string(),
                   "baseline", "--dataset", ws.dataset.string()})
                  .code == kExitUsage);
    }

    TEST_CASE("build-dataset and check-dataset") {
        TempDir dir;
        auto ws = make_cli_workspace(dir.path);
        const auto out = (dir.path / "ds").string();
        auto r = cli({"--config", ws.build_config.string(), "--output", out, "build-dataset", "--raw",
                      ws.raw.string()});
        INFO(r.err);
        REQUIRE(r.code == kExitOk);
        auto built = read_file(dir.path / "ds" / "dataset.jsonl");
        CHECK(std::count(built.begin(), built.end(), '\n') == 2);
        Json manifest = read_json(dir.path / "ds" / "manifest.json");
        CHECK(manifest["record_count"] == 2);
        CHECK(manifest["construction"]["model"] == "scripted-7b");
        auto audit = read_file(dir.path / "ds" / "audit.jsonl");
        CHECK(std::count(audit.begin(), audit.end(), '\n') == 2);
        // The second record's project id comes from the raw issue.
        CHECK(built.find("\"project_id\":\"beta\"") != std::string::npos);

        auto c = cli({"--config", ws.eval_config.string(), "--output", (dir.path / "chk").string(), "check-dataset",
                      "--dataset", ws.dataset.string()});
        INFO(c.err);
        REQUIRE(c.code == kExitOk);
        Json cs = read_json(dir.path / "chk" / "check_summary.json");
        CHECK(cs["records"] == 3);
        CHECK(cs["scored"] == 3);
        CHECK(cs["rate"].get<double>() == doctest::Approx(2.0 / 3.0));
    }

    TEST_CASE("alignment command") {
        auto r = cli({"alignment", "--tp", "23", "--fn", "8", "--fp", "7", "--tn", "22"});
        CHECK(r.code == kExitOk);
        CHECK(r.out.find("precision: 76.67") != std::string::npos);
        CHECK(r.out.find("fpr: 24.14") != std::string::npos);
        auto u = cli({"alignment", "--tp", "0", "--fn", "0", "--fp", "4", "--tn", "1"});
        CHECK(u.out.find("recall: undefined") != std::string::npos);
        CHECK(cli({"alignment", "--tp", "1"}).code == kExitUsage);

        TempDir dir;
        write_file(dir.path / "c.json", R"({"tp": 33, "fn": 10, "fp": 12, "tn": 5})");
        auto f = cli({"--output", (dir.path / "a").string(), "alignment", "--counts", (dir.path / "c.json").string()});
        CHECK(f.code == kExitOk);
        CHECK(f.out.find("alignment_rate: 63.33") != std::string::npos);
        CHECK(fs::exists(dir.path / "a" / "alignment.json"));
    }
}
