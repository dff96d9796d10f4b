#include "g2s/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <unordered_set>

#include <fmt/format.h>

#include "g2s/fleet.hpp"
#include "g2s/text.hpp"

namespace g2s {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw PreconditionError(fmt::format("cosine: dimension mismatch {} vs {}", a.size(), b.size()));
    if (a.empty()) throw PreconditionError("cosine: empty vectors");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw PreconditionError("cosine: zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<Vector> GatewayEmbedder::embed(std::span<const std::string> texts) {
    return gateway_.embed(cfg_, texts);
}

std::vector<Vector> CachedEmbedder::embed(std::span<const std::string> texts) {
    std::vector<std::string> missing;
    std::unordered_set<std::string> queued;
    for (const auto& t : texts)
        if (!cache_.contains(t) && queued.insert(t).second) missing.push_back(t);
    if (!missing.empty()) {
        auto vectors = inner_.embed(missing);
        if (vectors.size() != missing.size()) throw ResponseShapeError("embedder returned wrong vector count");
        for (std::size_t i = 0; i < missing.size(); ++i) cache_.emplace(missing[i], std::move(vectors[i]));
    }
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(cache_.at(t));
    return out;
}

const Vector& CachedEmbedder::lookup(const std::string& text) const {
    auto it = cache_.find(text);
    if (it == cache_.end()) throw PreconditionError("text not embedded yet: " + text);
    return it->second;
}

void Thresholds::validate() const {
    for (double t : {actor, action, expected_outcome})
        if (!(t >= 0.0 && t <= 1.0)) throw ConfigError(fmt::format("threshold {} outside [0,1]", t));
}

bool passes(const ElementScores& s, const Thresholds& th) {
    return s[0] >= th.actor && s[1] >= th.action && s[2] >= th.expected_outcome;
}

namespace {

std::array<const std::string*, 3> fields(const UserStory& us) {
    return {&us.actor, &us.action, &us.expected_outcome};
}

ElementScores score_pair(const UserStory& gen, const UserStory& ref, const CachedEmbedder& cache) {
    ElementScores s{};
    auto g = fields(gen);
    auto r = fields(ref);
    for (std::size_t e = 0; e < 3; ++e) s[e] = cosine_similarity(cache.lookup(*g[e]), cache.lookup(*r[e]));
    return s;
}

void require_valid(std::span<const UserStory> stories, const char* what) {
    for (const auto& us : stories)
        for (const std::string* f : fields(us))
            if (text::is_blank(*f)) throw PreconditionError(fmt::format("{} story has an empty field", what));
}

}  // namespace

ElementHit element_hit(const UserStory& generated, const UserStory& reference, const Thresholds& th,
                       Embedder& embedder) {
    auto report = goal_hit(std::span(&generated, 1), std::span(&reference, 1), th, embedder);
    return {report.hit, report.evidence.front().scores};
}

HitReport goal_hit(std::span<const UserStory> generated, std::span<const UserStory> references,
                   const Thresholds& th, Embedder& embedder, std::string goal_id) {
    if (generated.empty()) throw PreconditionError("goal_hit: no generated stories");
    if (references.empty()) throw PreconditionError("goal_hit: no reference stories");
    require_valid(generated, "generated");
    require_valid(references, "reference");

    CachedEmbedder cache(embedder);
    std::vector<std::string> texts;
    for (auto group : {generated, references})
        for (const auto& us : group)
            for (const std::string* f : fields(us)) texts.push_back(*f);
    cache.embed(texts);

    HitReport report;
    report.goal_id = std::move(goal_id);
    report.evidence.reserve(generated.size() * references.size());
    for (std::size_t gi = 0; gi < generated.size(); ++gi) {
        for (std::size_t ri = 0; ri < references.size(); ++ri) {
            Evidence ev;
            ev.generated_index = gi;
            ev.reference_index = ri;
            ev.scores = score_pair(generated[gi], references[ri], cache);
            ev.element_pass = {ev.scores[0] >= th.actor, ev.scores[1] >= th.action,
                               ev.scores[2] >= th.expected_outcome};
            ev.pass = passes(ev.scores, th);
            report.hit = report.hit || ev.pass;
            report.evidence.push_back(ev);
        }
    }
    return report;
}

double macro_mean(std::span<const double> rates) {
    if (rates.empty()) throw PreconditionError("macro_mean: no rates");
    double sum = 0.0;
    for (double r : rates) sum += r;
    return sum / static_cast<double>(rates.size());
}

FhrReport compute_fhr(std::span<const GoalRun> runs, std::span<const StorySeekRecord> dataset,
                      const Thresholds& th, Embedder& embedder) {
    if (dataset.empty()) throw PreconditionError("compute_fhr: empty dataset");

    struct GoalGroup {
        std::string project_id;
        std::string goal_id;
        std::vector<UserStory> references;
        std::vector<UserStory> generated;
        bool has_run = false;
    };
    std::vector<GoalGroup> goals;
    std::map<std::string, std::size_t> goal_index;
    std::vector<std::string> project_order;
    for (const auto& rec : dataset) {
        std::string id = make_goal_id(rec.project_id, rec.im_result.goal.text);
        auto [it, inserted] = goal_index.emplace(id, goals.size());
        if (inserted) {
            goals.push_back({rec.project_id, id, {}, {}, false});
            if (std::find(project_order.begin(), project_order.end(), rec.project_id) == project_order.end())
                project_order.push_back(rec.project_id);
        }
        goals[it->second].references.push_back(rec.im_result.user_story);
    }

    for (const auto& run : runs) {
        auto it = goal_index.find(run.goal_id);
        if (it == goal_index.end()) throw UnmatchedGoalError("run references unknown goal id " + run.goal_id);
        auto& g = goals[it->second];
        g.has_run = true;
        g.generated.insert(g.generated.end(), run.stories.begin(), run.stories.end());
    }

    CachedEmbedder cache(embedder);
    FhrReport report;
    std::map<std::string, ProjectFhr> per_project;
    for (const auto& p : project_order) per_project[p] = ProjectFhr{p, 0, 0};

    std::size_t hit_goals = 0;
    for (auto& g : goals) {
        HitReport hr;
        hr.goal_id = g.goal_id;
        if (!g.generated.empty()) hr = goal_hit(g.generated, g.references, th, cache, g.goal_id);
        auto& pf = per_project[g.project_id];
        ++pf.total;
        if (hr.hit) {
            ++pf.hits;
            ++hit_goals;
        }
        report.goals.push_back(std::move(hr));
    }

    std::vector<double> rates;
    for (const auto& p : project_order) {
        report.projects.push_back(per_project[p]);
        rates.push_back(per_project[p].rate());
    }
    report.macro_mean = macro_mean(rates);
    report.micro_rate = static_cast<double>(hit_goals) / static_cast<double>(goals.size());
    return report;
}

// ---------------------------------------------------------------------------

Json to_json(const QuaceVerdict& v) {
    return Json{{"score", v.score}, {"failed", v.failed_criteria}, {"judge_raw", v.judge_raw}};
}

std::pair<std::string, std::string> build_judge_prompt(const TemplateStore& templates, const UserStory& us,
                                                       const ProjectContext& context, const Goal& goal,
                                                       QuaceMode mode) {
    std::string criteria = templates.get("validation_agent", "criteria");
    if (mode == QuaceMode::DatasetCheck) criteria += "\n" + templates.get("validation_agent", "factual");
    Vars vars{{"background", context.background},
              {"problems", context.problems},
              {"goal", goal.text},
              {"actor", us.actor},
              {"action", us.action},
              {"expected_outcome", us.expected_outcome}};
    std::string user = templates.render("layout", "judge",
                                        {{"criteria", criteria},
                                         {"task", templates.render("validation_agent", "task", vars)},
                                         {"output_format", templates.get("validation_agent", "output_format")}});
    return {templates.get("validation_agent", "role"), std::move(user)};
}

QuaceVerdict parse_judge_verdict(const std::string& json_text) {
    Json j = Json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw JudgeFormatError("judge output is not JSON", json_text);
    if (!j.is_object() || !j.contains("score")) throw JudgeFormatError("judge output lacks \"score\"", json_text);

    QuaceVerdict v;
    v.judge_raw = json_text;
    const Json& score = j.at("score");
    if (score.is_number_integer() || score.is_number_unsigned()) {
        v.score = score.get<int>();
    } else if (score.is_string() && (score == "0" || score == "1")) {
        v.score = score.get<std::string>() == "1" ? 1 : 0;
    } else {
        throw JudgeFormatError("judge score must be 0 or 1", json_text);
    }
    if (v.score != 0 && v.score != 1) throw JudgeFormatError("judge score must be 0 or 1", json_text);

    if (j.contains("failed") && !j.at("failed").is_null()) {
        if (!j.at("failed").is_array()) throw JudgeFormatError("\"failed\" must be an array", json_text);
        for (const auto& f : j.at("failed")) {
            if (!f.is_string()) throw JudgeFormatError("failed criteria must be strings", json_text);
            std::string name = text::normalize(f.get<std::string>());
            std::transform(name.begin(), name.end(), name.begin(),
                           [](unsigned char c) { return c == ' ' || c == '-' ? '_' : static_cast<char>(std::tolower(c)); });
            if (std::find(kQuaceCriteria.begin(), kQuaceCriteria.end(), name) == kQuaceCriteria.end())
                throw JudgeFormatError("unknown criterion '" + name + "'", json_text);
            if (std::find(v.failed_criteria.begin(), v.failed_criteria.end(), name) == v.failed_criteria.end())
                v.failed_criteria.push_back(std::move(name));
        }
    }
    if (!v.failed_criteria.empty()) v.score = 0;
    if (v.score == 0 && v.failed_criteria.empty())
        throw JudgeFormatError("score 0 without any failed criterion", json_text);
    return v;
}

QuaceVerdict quace_evaluate(const UserStory& us, const ProjectContext& context, const Goal& goal,
                            const BackendConfig& judge, QuaceMode mode, Gateway& gateway,
                            const TemplateStore& templates) {
    auto [system, user] = build_judge_prompt(templates, us, context, goal, mode);
    auto ex = gateway.complete(judge, system, user, "judge");
    std::string json_text;
    try {
        json_text = format_doctor(ex.response_text, 1, gateway, judge, templates).json_text;
    } catch (const FormatExhaustedError&) {
        throw JudgeFormatError("judge output not JSON after one repair", ex.response_text);
    }
    QuaceVerdict v = parse_judge_verdict(json_text);
    v.judge_raw = ex.response_text;
    return v;
}

double quace_rate(std::span<const QuaceVerdict> verdicts) {
    if (verdicts.empty()) throw PreconditionError("quace_rate: no verdicts");
    auto ones = std::count_if(verdicts.begin(), verdicts.end(), [](const QuaceVerdict& v) { return v.score == 1; });
    return static_cast<double>(ones) / static_cast<double>(verdicts.size());
}

std::vector<std::size_t> seeded_sample(std::size_t population, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> idx(population);
    for (std::size_t i = 0; i < population; ++i) idx[i] = i;
    if (k >= population) return idx;
    std::mt19937_64 rng(seed);
    auto bounded = [&](std::uint64_t n) {
        const std::uint64_t floor = (std::uint64_t{0} - n) % n;  // 2^64 mod n
        std::uint64_t x;
        do {
            x = rng();
        } while (x < floor);
        return x % n;
    };
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + bounded(population - i)]);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

// ---------------------------------------------------------------------------

AlignmentReport alignment_metrics(const ConfusionTable& ct) {
    if (ct.total() == 0) throw PreconditionError("alignment_metrics: all-zero confusion table");
    auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    AlignmentReport r;
    r.precision = ratio(ct.tp, ct.tp + ct.fp);
    r.recall = ratio(ct.tp, ct.tp + ct.fn);
    if (r.precision && r.recall && *r.precision + *r.recall > 0.0)
        r.f1 = 2.0 * *r.precision * *r.recall / (*r.precision + *r.recall);
    r.alignment_rate = ratio(ct.tp + ct.tn, ct.total());
    r.fpr = ratio(ct.fp, ct.fp + ct.tn);
    return r;
}

}  // namespace g2s
