#include "g2s/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <tuple>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>

#include "g2s/baseline.hpp"
#include "g2s/config.hpp"
#include "g2s/fleet.hpp"
#include "g2s/parallel.hpp"
#include "g2s/reports.hpp"
#include "g2s/storyseek.hpp"
#include "g2s/text.hpp"

namespace g2s {

namespace fs = std::filesystem;

namespace {

struct GlobalFlags {
    std::optional<std::string> config;
    std::string output = "g2s-out";
    bool output_given = false;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<int> n;
    std::optional<bool> cot;
    std::optional<bool> profile;
    std::optional<std::string> thresholds;
};

struct Ctx {
    GlobalFlags flags;
    std::ostream& out;
    std::ostream& err;
};

std::string utc_now() {
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr)));
}

Json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw PreconditionError("cannot open " + path.string());
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw SchemaError("<root>", "not valid JSON: " + path.string());
    return j;
}

std::string jsonl(const std::vector<Json>& rows) {
    std::string s;
    for (const auto& r : rows) s += r.dump() + "\n";
    return s;
}

/// Run bookkeeping, flushed to run_manifest.json whatever happens.
class Manifest {
public:
    Manifest(std::string command, fs::path dir) : dir_(std::move(dir)) {
        j_["command"] = std::move(command);
        j_["started_at"] = utc_now();
        j_["outputs"] = Json::array();
    }

    Json& operator[](const char* key) { return j_[key]; }

    void write_output(const fs::path& name, const std::string& content) {
        write_text(dir_ / name, content);
        j_["outputs"].push_back((dir_ / name).generic_string());
    }

    void finish(int status, const std::optional<std::string>& error) {
        j_["finished_at"] = utc_now();
        j_["exit_status"] = status;
        if (error) j_["error"] = *error;
        j_["outputs"].push_back((dir_ / "run_manifest.json").generic_string());
        write_text(dir_ / "run_manifest.json", j_.dump(2) + "\n");
    }

    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    Json j_;
};

ExperimentConfig resolve_config(const GlobalFlags& f) {
    ExperimentConfig cfg = f.config ? load_config(*f.config) : ExperimentConfig{};
    if (f.seed) cfg.seed = *f.seed;
    if (f.workers) cfg.workers = *f.workers;
    if (f.n) cfg.fleet.n = *f.n;
    if (f.cot) cfg.fleet.cot_enabled = *f.cot;
    if (f.profile) cfg.fleet.profile_enabled = *f.profile;
    if (f.thresholds) cfg.thresholds = parse_thresholds(*f.thresholds);
    cfg.validate();
    return cfg;
}

TemplateStore load_templates(const ExperimentConfig& cfg) {
    return cfg.templates_dir ? TemplateStore::load(*cfg.templates_dir) : TemplateStore::load_default();
}

/// Runs `body` and always writes the manifest. Input and config problems map
/// to kExitUsage, anything else that escapes to kExitPartial.
int guarded(Ctx& ctx, const std::string& command, const std::function<int(Manifest&)>& body) {
    Manifest m(command, ctx.flags.output);
    int status = kExitOk;
    std::optional<std::string> error;
    try {
        status = body(m);
    } catch (const ConfigError& e) {
        status = kExitUsage, error = e.what();
    } catch (const SchemaError& e) {
        status = kExitUsage, error = e.what();
    } catch (const PreconditionError& e) {
        status = kExitUsage, error = e.what();
    } catch (const TemplateError& e) {
        status = kExitUsage, error = e.what();
    } catch (const UnmatchedGoalError& e) {
        status = kExitUsage, error = e.what();
    } catch (const std::exception& e) {
        status = kExitPartial, error = e.what();
    }
    if (error) ctx.err << "error: " << *error << "\n";
    try {
        m.finish(status, error);
    } catch (const std::exception& e) {
        ctx.err << "error: could not write manifest: " << e.what() << "\n";
        if (status == kExitOk) status = kExitPartial;
    }
    return status;
}

// ---------------------------------------------------------------------------
// run / baseline

struct GoalJob {
    std::string goal_id;
    std::string project_id;
    ProjectContext context;
    Goal goal;
};

std::vector<GoalJob> distinct_goals(const std::vector<StorySeekRecord>& records) {
    std::vector<GoalJob> jobs;
    std::set<std::string> seen;
    for (const auto& r : records) {
        std::string id = make_goal_id(r.project_id, r.im_result.goal.text);
        if (seen.insert(id).second) jobs.push_back({id, r.project_id, r.project_info, r.im_result.goal});
    }
    return jobs;
}

struct GoalOutcome {
    ImpactMapTree tree;
    std::vector<std::string> warnings;
};

std::string error_text(const std::exception_ptr& ep) {
    try {
        std::rethrow_exception(ep);
    } catch (const std::exception& e) {
        return e.what();
    } catch (...) {
        return "unknown error";
    }
}

int generate(Ctx& ctx, Manifest& m, const std::string& method, const std::string& dataset_path,
             const std::function<GoalOutcome(Gateway&, const TemplateStore&, const ExperimentConfig&, const GoalJob&)>&
                 expand,
             ExperimentConfig cfg) {
    m["config"] = to_json(cfg);
    m["seed"] = cfg.seed;
    m["inputs"] = {{"dataset", dataset_path}};
    m["method"] = method;

    LoadedDataset ds = load_dataset(dataset_path);
    for (const auto& w : ds.warnings) ctx.err << "warning: " << w << "\n";
    auto jobs = distinct_goals(ds.records);
    const TemplateStore templates = load_templates(cfg);
    auto gateway = make_gateway(cfg);

    auto outcomes = parallel_map(jobs.size(), cfg.workers, [&](std::size_t i) {
        return expand(*gateway, templates, cfg, jobs[i]);
    });

    Json goals = Json::array();
    std::size_t failed = 0, stories = 0;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& job = jobs[i];
        Json entry{{"goal_id", job.goal_id}, {"project_id", job.project_id}};
        if (!outcomes[i].ok()) {
            ++failed;
            entry["status"] = "failed";
            entry["error"] = error_text(outcomes[i].error);
            try {
                std::rethrow_exception(outcomes[i].error);
            } catch (const FleetRunError& e) {
                entry["failed_stage"] = std::string(role_key(e.stage()));
                entry["partial_stories"] = count_nodes(e.partial()).stories;
            } catch (...) {
            }
            goals.push_back(std::move(entry));
            continue;
        }
        const GoalOutcome& o = *outcomes[i].value;
        auto results = tree_to_results(o.tree);
        stories += results.size();
        Json result{{"method", method},
                    {"model", cfg.model_label},
                    {"project_id", job.project_id},
                    {"goal_id", job.goal_id},
                    {"goal", job.goal.text},
                    {"background", job.context.background},
                    {"problems", job.context.problems},
                    {"tree", to_json(o.tree)},
                    {"results", Json::array()}};
        if (job.context.solutions) result["solutions"] = *job.context.solutions;
        for (const auto& r : results) result["results"].push_back(to_json(r));
        if (!o.warnings.empty()) result["warnings"] = o.warnings;

        const fs::path file = fs::path("results") / (text::sanitize_filename(job.goal_id) + ".json");
        m.write_output(file, result.dump(2) + "\n");
        entry["status"] = o.warnings.empty() ? "ok" : "degraded";
        entry["stories"] = results.size();
        entry["result_file"] = file.generic_string();
        if (!o.warnings.empty()) entry["warnings"] = o.warnings;
        goals.push_back(std::move(entry));
    }
    m["goals"] = goals;
    m["counts"] = {{"goals", jobs.size()},
                   {"succeeded", jobs.size() - failed},
                   {"failed", failed},
                   {"stories", stories},
                   {"chat_calls", gateway->chat_calls()}};
    gateway->export_log(m.dir() / "exchanges.jsonl");
    m["outputs"].push_back((m.dir() / "exchanges.jsonl").generic_string());

    ctx.out << fmt::format("{}: {} goals, {} failed, {} user stories\n", method, jobs.size(), failed, stories);
    return failed ? kExitPartial : kExitOk;
}

int cmd_run(Ctx& ctx, const std::string& dataset) {
    return guarded(ctx, "run", [&](Manifest& m) {
        return generate(
            ctx, m, "fleet", dataset,
            [](Gateway& gw, const TemplateStore& t, const ExperimentConfig& cfg, const GoalJob& job) {
                Fleet fleet(t, gw, cfg.role_backends(), cfg.fleet, cfg.labels);
                return GoalOutcome{fleet.expand_goal(job.context, job.goal), {}};
            },
            resolve_config(ctx.flags));
    });
}

int cmd_baseline(Ctx& ctx, const std::string& dataset) {
    return guarded(ctx, "baseline", [&](Manifest& m) {
        ExperimentConfig cfg = resolve_config(ctx.flags);
        SuperAgentOptions opts;
        opts.n = cfg.fleet.n;
        opts.cot_enabled = ctx.flags.cot.value_or(true);
        opts.fd_max_attempts = cfg.fleet.fd_max_attempts;
        opts.validate();
        return generate(
            ctx, m, "super_agent", dataset,
            [opts](Gateway& gw, const TemplateStore& t, const ExperimentConfig& c, const GoalJob& job) {
                SuperAgent sa(t, gw, c.backend("super_agent"), c.backend("format_doctor"), opts, c.labels);
                auto r = sa.run(job.context, job.goal);
                return GoalOutcome{std::move(r.tree), std::move(r.warnings)};
            },
            cfg);
    });
}

// ---------------------------------------------------------------------------
// evaluation

struct ResultFile {
    Json doc;
    fs::path path;
};

std::vector<ResultFile> read_results(const fs::path& dir_in) {
    fs::path dir = dir_in;
    if (fs::is_directory(dir / "results")) dir /= "results";
    if (!fs::is_directory(dir)) throw PreconditionError("results directory not found: " + dir_in.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw PreconditionError("no result files in " + dir.string());
    std::vector<ResultFile> out;
    for (const auto& f : files) {
        Json j = read_json_file(f);
        for (const char* key : {"project_id", "goal_id", "goal", "background", "problems", "results"})
            if (!j.contains(key)) throw SchemaError(key, "missing in result file " + f.string());
        out.push_back({std::move(j), f});
    }
    return out;
}

std::pair<std::string, std::string> method_and_model(const std::vector<ResultFile>& files, std::ostream& err) {
    const auto method = files.front().doc.value("method", std::string("unknown"));
    const auto model = files.front().doc.value("model", std::string("unknown"));
    for (const auto& f : files)
        if (f.doc.value("method", method) != method || f.doc.value("model", model) != model)
            err << "warning: result files mix methods or models; labelling the report with the first one\n";
    return {method, model};
}

int cmd_eval_fhr(Ctx& ctx, const std::string& results_dir, const std::string& dataset_path) {
    return guarded(ctx, "eval-fhr", [&](Manifest& m) {
        ExperimentConfig cfg = resolve_config(ctx.flags);
        m["config"] = to_json(cfg);
        m["inputs"] = {{"results", results_dir}, {"dataset", dataset_path}};

        LoadedDataset ds = load_dataset(dataset_path);
        auto files = read_results(results_dir);
        auto [method, model] = method_and_model(files, ctx.err);

        std::vector<GoalRun> runs;
        for (const auto& f : files) {
            GoalRun run{f.doc.at("project_id").get<std::string>(), f.doc.at("goal_id").get<std::string>(), {}};
            for (const auto& r : f.doc.at("results")) run.stories.push_back(im_result_from_json(r).user_story);
            runs.push_back(std::move(run));
        }

        auto gateway = make_gateway(cfg);
        GatewayEmbedder remote(*gateway, cfg.backend("embedder"));
        CachedEmbedder cache(remote);
        FhrReport report = compute_fhr(runs, ds.records, cfg.thresholds, cache);

        Json summary = to_json(report);
        summary["method"] = method;
        summary["model"] = model;
        summary["thresholds"] = {{"actor", cfg.thresholds.actor},
                                 {"action", cfg.thresholds.action},
                                 {"expected_outcome", cfg.thresholds.expected_outcome}};
        m.write_output("fhr.csv", fhr_csv(report));
        m.write_output("fhr.md", summary_markdown({SummaryRow{method, model, report, std::nullopt}}));
        m.write_output("evidence.jsonl", evidence_jsonl(report));
        m.write_output("fhr_summary.json", summary.dump(2) + "\n");
        m["counts"] = {{"goals", report.goals.size()}, {"embed_calls", gateway->embed_calls()}};

        ctx.out << fmt::format("FHR mean {}% (micro {}%) over {} projects\n", format_percent(report.macro_mean),
                               format_percent(report.micro_rate), report.projects.size());
        return kExitOk;
    });
}

int cmd_eval_quace(Ctx& ctx, const std::string& results_dir, std::optional<int> sample_flag) {
    return guarded(ctx, "eval-quace", [&](Manifest& m) {
        ExperimentConfig cfg = resolve_config(ctx.flags);
        if (sample_flag) {
            if (*sample_flag < 1) throw ConfigError("--sample must be >= 1");
            cfg.quace_sample = *sample_flag;
        }
        m["config"] = to_json(cfg);
        m["seed"] = cfg.seed;
        m["inputs"] = {{"results", results_dir}};

        auto files = read_results(results_dir);
        auto [method, model] = method_and_model(files, ctx.err);

        struct Item {
            std::string project_id, goal_id;
            ProjectContext context;
            Goal goal;
            UserStory story;
        };
        std::vector<Item> population;
        for (const auto& f : files) {
            ProjectContext pc = context_from_json(f.doc);
            Goal g{f.doc.at("goal").get<std::string>()};
            for (const auto& r : f.doc.at("results"))
                population.push_back({f.doc.at("project_id").get<std::string>(),
                                      f.doc.at("goal_id").get<std::string>(), pc, g,
                                      im_result_from_json(r).user_story});
        }
        const auto k = static_cast<std::size_t>(cfg.quace_sample);
        if (k > population.size())
            ctx.err << fmt::format("warning: sample size {} exceeds the {} available stories; evaluating all\n", k,
                                   population.size());
        auto picked = seeded_sample(population.size(), k, cfg.seed);

        const TemplateStore templates = load_templates(cfg);
        auto gateway = make_gateway(cfg);
        const BackendConfig judge = cfg.backend("judge");
        auto outcomes = parallel_map(picked.size(), cfg.workers, [&](std::size_t i) {
            const Item& it = population[picked[i]];
            return quace_evaluate(it.story, it.context, it.goal, judge, QuaceMode::Generated, *gateway, templates);
        });

        std::vector<Json> rows;
        std::vector<QuaceVerdict> scored;
        std::size_t failures = 0;
        for (std::size_t i = 0; i < picked.size(); ++i) {
            const Item& it = population[picked[i]];
            Json row{{"index", picked[i]},
                     {"project_id", it.project_id},
                     {"goal_id", it.goal_id},
                     {"user_story", to_json(it.story)}};
            if (outcomes[i].ok()) {
                row.update(to_json(*outcomes[i].value));
                scored.push_back(*outcomes[i].value);
            } else {
                ++failures;
                row["error"] = error_text(outcomes[i].error);
            }
            rows.push_back(std::move(row));
        }
        std::optional<double> rate;
        if (!scored.empty()) rate = quace_rate(scored);
        Json summary{{"method", method},
                     {"model", model},
                     {"population", population.size()},
                     {"sampled", picked.size()},
                     {"scored", scored.size()},
                     {"failures", failures},
                     {"seed", cfg.seed},
                     {"rate", rate ? Json(*rate) : Json("undefined")}};
        m.write_output("quace.jsonl", jsonl(rows));
        m.write_output("quace_summary.json", summary.dump(2) + "\n");
        ctx.out << fmt::format("QuACE {}% over {} scored stories, {} judge failures\n", format_percent(rate),
                               scored.size(), failures);
        return failures ? kExitPartial : kExitOk;
    });
}

// ---------------------------------------------------------------------------
// dataset tooling

int cmd_build_dataset(Ctx& ctx, const std::string& raw_path, bool paired) {
    return guarded(ctx, "build-dataset", [&](Manifest& m) {
        ExperimentConfig cfg = resolve_config(ctx.flags);
        m["config"] = to_json(cfg);
        m["inputs"] = {{"raw", raw_path}};

        auto raw = load_raw_issues(raw_path);
        auto kept = filter_raw(raw);
        const TemplateStore templates = load_templates(cfg);
        auto gateway = make_gateway(cfg);
        const BackendConfig extractor = cfg.backend("extractor");
        const BackendConfig fd = cfg.backend("format_doctor");
        ExtractOptions xo{cfg.fleet.fd_max_attempts, cfg.labels};

        auto outcomes = parallel_map(kept.size(), cfg.workers, [&](std::size_t i) {
            return extract_im(kept[i], extractor, fd, *gateway, templates, xo);
        });

        std::vector<StorySeekRecord> records;
        std::vector<Json> audit;
        Json failures = Json::array();
        std::size_t repaired = 0;
        for (std::size_t i = 0; i < kept.size(); ++i) {
            if (outcomes[i].ok()) {
                const auto& r = *outcomes[i].value;
                records.push_back(r.record);
                repaired += r.repaired ? 1 : 0;
                audit.push_back(to_json(r.audit));
                continue;
            }
            const std::string msg = error_text(outcomes[i].error);
            try {
                std::rethrow_exception(outcomes[i].error);
            } catch (const ExtractionError& e) {
                audit.push_back(to_json(e.audit()));
            } catch (...) {
                audit.push_back(Json{{"project_id", kept[i].project_id}, {"raw_text", kept[i].text}, {"error", msg}});
            }
            failures.push_back({{"index", i}, {"project_id", kept[i].project_id}, {"error", msg}});
        }

        auto manifest = DatasetManifest::compute(records, ConstructionParams{extractor.model_name, extractor.temperature});
        write_dataset(m.dir() / "dataset.jsonl", records, manifest);
        m["outputs"].push_back((m.dir() / "dataset.jsonl").generic_string());
        m["outputs"].push_back((m.dir() / "manifest.json").generic_string());
        m.write_output("audit.jsonl", jsonl(audit));

        if (paired) {
            auto pairs = extract_paired(kept, extractor, cfg.backend("extractor_b"), fd, *gateway, templates,
                                        cfg.workers, xo);
            std::vector<Json> rows;
            for (const auto& p : pairs) rows.push_back(to_json(p));
            m.write_output("paired.jsonl", jsonl(rows));
        }
        gateway->export_log(m.dir() / "exchanges.jsonl");
        m["outputs"].push_back((m.dir() / "exchanges.jsonl").generic_string());

        m["failures"] = failures;
        m["counts"] = {{"raw", raw.size()},
                       {"filtered_out", raw.size() - kept.size()},
                       {"extracted", records.size()},
                       {"repaired", repaired},
                       {"failed", failures.size()}};
        ctx.out << fmt::format("dataset: {} raw, {} kept, {} extracted, {} failed\n", raw.size(), kept.size(),
                               records.size(), failures.size());
        return failures.empty() ? kExitOk : kExitPartial;
    });
}

int cmd_check_dataset(Ctx& ctx, const std::string& dataset_path) {
    return guarded(ctx, "check-dataset", [&](Manifest& m) {
        ExperimentConfig cfg = resolve_config(ctx.flags);
        m["config"] = to_json(cfg);
        m["inputs"] = {{"dataset", dataset_path}};

        LoadedDataset ds = load_dataset(dataset_path);
        const TemplateStore templates = load_templates(cfg);
        auto gateway = make_gateway(cfg);
        QualitySummary q = dataset_quality_check(ds.records, cfg.backend("judge"), *gateway, templates, cfg.workers);

        std::vector<Json> rows;
        for (std::size_t i = 0; i < ds.records.size(); ++i) {
            Json row{{"index", i}, {"project_id", ds.records[i].project_id}};
            if (q.verdicts[i]) row.update(to_json(*q.verdicts[i]));
            rows.push_back(std::move(row));
        }
        for (const auto& f : q.failures) rows[f.index]["error"] = f.error;
        Json summary{{"records", ds.records.size()},
                     {"scored", ds.records.size() - q.failures.size()},
                     {"failures", q.failures.size()},
                     {"rate", q.rate ? Json(*q.rate) : Json("undefined")}};
        m.write_output("check.jsonl", jsonl(rows));
        m.write_output("check_summary.json", summary.dump(2) + "\n");
        ctx.out << fmt::format("dataset check: {}% of {} scored records pass, {} judge failures\n",
                               format_percent(q.rate), ds.records.size() - q.failures.size(), q.failures.size());
        return q.failures.empty() ? kExitOk : kExitPartial;
    });
}

// ---------------------------------------------------------------------------
// alignment / report

struct Counts {
    std::optional<std::size_t> tp, fn, fp, tn;
    std::optional<std::string> file;
};

int cmd_alignment(Ctx& ctx, const Counts& c) {
    auto body = [&](Manifest* m) {
        ConfusionTable ct;
        if (c.file) {
            Json j = read_json_file(*c.file);
            for (const char* key : {"tp", "fn", "fp", "tn"})
                if (!j.contains(key) || !j.at(key).is_number_unsigned())
                    throw SchemaError(key, "missing or not a non-negative integer");
            ct = {j.at("tp").get<std::size_t>(), j.at("fn").get<std::size_t>(), j.at("fp").get<std::size_t>(),
                  j.at("tn").get<std::size_t>()};
        } else {
            if (!c.tp || !c.fn || !c.fp || !c.tn) throw ConfigError("alignment needs --tp --fn --fp --tn or --counts");
            ct = {*c.tp, *c.fn, *c.fp, *c.tn};
        }
        auto report = alignment_metrics(ct);
        const std::string txt = alignment_text(ct, report);
        ctx.out << txt;
        if (m) {
            Json j = to_json(report);
            j["counts"] = {{"tp", ct.tp}, {"fn", ct.fn}, {"fp", ct.fp}, {"tn", ct.tn}};
            m->write_output("alignment.txt", txt);
            m->write_output("alignment.json", j.dump(2) + "\n");
        }
        return kExitOk;
    };
    if (ctx.flags.output_given) return guarded(ctx, "alignment", [&](Manifest& m) { return body(&m); });
    try {
        return body(nullptr);
    } catch (const std::exception& e) {
        ctx.err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

int cmd_report(Ctx& ctx, const std::vector<std::string>& dirs) {
    return guarded(ctx, "report", [&](Manifest& m) {
        m["inputs"] = {{"from", dirs}};
        // Rows are keyed by (method, model); QuACE summaries attach to the matching FHR row.
        std::vector<SummaryRow> rows;
        std::vector<std::pair<std::pair<std::string, std::string>, double>> quace;
        auto key_of = [](const Json& j) {
            return std::pair{j.value("method", std::string("unknown")), j.value("model", std::string("unknown"))};
        };
        for (const auto& d : dirs) {
            const fs::path fhr_path = fs::path(d) / "fhr_summary.json";
            const fs::path q_path = fs::path(d) / "quace_summary.json";
            if (!fs::exists(fhr_path) && !fs::exists(q_path))
                throw PreconditionError("no fhr_summary.json or quace_summary.json in " + d);
            if (fs::exists(fhr_path)) {
                Json j = read_json_file(fhr_path);
                SummaryRow row;
                std::tie(row.method, row.model) = key_of(j);
                for (const auto& p : j.at("projects"))
                    row.fhr.projects.push_back({p.at("project_id").get<std::string>(),
                                                p.at("hits").get<std::size_t>(), p.at("total").get<std::size_t>()});
                row.fhr.macro_mean = j.at("macro_mean").get<double>();
                row.fhr.micro_rate = j.at("micro_rate").get<double>();
                rows.push_back(std::move(row));
            }
            if (fs::exists(q_path)) {
                Json q = read_json_file(q_path);
                if (q.at("rate").is_number()) quace.push_back({key_of(q), q.at("rate").get<double>()});
            }
        }
        for (const auto& [key, rate] : quace) {
            auto it = std::find_if(rows.begin(), rows.end(),
                                   [&](const SummaryRow& r) { return r.method == key.first && r.model == key.second; });
            if (it == rows.end())
                throw PreconditionError(
                    fmt::format("QuACE summary for {} / {} has no matching FHR summary", key.first, key.second));
            it->quace = rate;
        }
        const std::string md = summary_markdown(rows);
        m.write_output("summary.md", md);
        ctx.out << md;
        return kExitOk;
    });
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Goal-driven user story generation and evaluation", "g2s"};
    app.fallthrough();
    app.require_subcommand(1);

    GlobalFlags flags;
    app.add_option("--config", flags.config, "JSON experiment config");
    auto* output_opt = app.add_option("--output", flags.output, "Output directory");
    app.add_option("--seed", flags.seed, "Random seed");
    app.add_option("--workers", flags.workers, "Concurrent goals or records");
    app.add_option("--n", flags.n, "Branching factor");
    app.add_flag_callback("--cot", [&] { flags.cot = true; }, "Enable reasoning steps");
    app.add_flag_callback("--no-cot", [&] { flags.cot = false; }, "Disable reasoning steps");
    app.add_flag_callback("--profile", [&] { flags.profile = true; }, "Enable role profiles");
    app.add_flag_callback("--no-profile", [&] { flags.profile = false; }, "Disable role profiles");
    app.add_option("--thresholds", flags.thresholds, "actor,action,outcome similarity thresholds");

    std::string dataset, results, raw;
    std::optional<int> sample;
    bool paired = false;
    Counts counts;
    std::vector<std::string> from;

    auto* run = app.add_subcommand("run", "Expand every dataset goal with the agent fleet");
    run->add_option("--dataset", dataset, "StorySeek dataset (JSON lines or array)")->required();
    auto* baseline = app.add_subcommand("baseline", "Single-prompt baseline over every dataset goal");
    baseline->add_option("--dataset", dataset, "StorySeek dataset")->required();
    auto* eval_fhr = app.add_subcommand("eval-fhr", "Factuality hit rate of generated stories");
    eval_fhr->add_option("--results", results, "Output directory of run or baseline")->required();
    eval_fhr->add_option("--dataset", dataset, "StorySeek dataset")->required();
    auto* eval_quace = app.add_subcommand("eval-quace", "Judge a seeded sample of generated stories");
    eval_quace->add_option("--results", results, "Output directory of run or baseline")->required();
    eval_quace->add_option("--sample", sample, "Sample size (default from config, 100)");
    auto* build = app.add_subcommand("build-dataset", "Filter raw issues and extract dataset records");
    build->add_option("--raw", raw, "Raw issues, JSON lines")->required();
    build->add_flag("--paired", paired, "Also extract with the extractor_b backend for comparison");
    auto* check = app.add_subcommand("check-dataset", "Judge every dataset record, factual criterion included");
    check->add_option("--dataset", dataset, "StorySeek dataset")->required();
    auto* align = app.add_subcommand("alignment", "Agreement metrics from a 2x2 table (rows = ground truth)");
    align->add_option("--tp", counts.tp);
    align->add_option("--fn", counts.fn);
    align->add_option("--fp", counts.fp);
    align->add_option("--tn", counts.tn);
    align->add_option("--counts", counts.file, "JSON file with tp, fn, fp, tn");
    auto* report = app.add_subcommand("report", "Combine evaluation outputs into one summary table");
    report->add_option("--from", from, "Evaluation output directories")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }
    flags.output_given = output_opt->count() > 0;

    Ctx ctx{flags, out, err};
    if (*run) return cmd_run(ctx, dataset);
    if (*baseline) return cmd_baseline(ctx, dataset);
    if (*eval_fhr) return cmd_eval_fhr(ctx, results, dataset);
    if (*eval_quace) return cmd_eval_quace(ctx, results, sample);
    if (*build) return cmd_build_dataset(ctx, raw, paired);
    if (*check) return cmd_check_dataset(ctx, dataset);
    if (*align) return cmd_alignment(ctx, counts);
    if (*report) return cmd_report(ctx, from);
    return kExitUsage;
}

}  // namespace g2s
