#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "g2s/core.hpp"
#include "g2s/gateway.hpp"
#include "g2s/templates.hpp"

namespace g2s {

// ---------------------------------------------------------------------------
// Similarity and embeddings

/// Cosine of the angle between `a` and `b`. Throws PreconditionError on a
/// dimension mismatch or an all-zero vector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

class Embedder {
public:
    virtual ~Embedder() = default;
    /// One vector per text, same order.
    virtual std::vector<Vector> embed(std::span<const std::string> texts) = 0;
};

class GatewayEmbedder final : public Embedder {
public:
    GatewayEmbedder(Gateway& gateway, BackendConfig cfg) : gateway_(gateway), cfg_(std::move(cfg)) {}
    std::vector<Vector> embed(std::span<const std::string> texts) override;

private:
    Gateway& gateway_;
    BackendConfig cfg_;
};

/// Memoizes another embedder by exact text; each call forwards at most one
/// batch containing only unseen, de-duplicated texts.
class CachedEmbedder final : public Embedder {
public:
    explicit CachedEmbedder(Embedder& inner) : inner_(inner) {}
    std::vector<Vector> embed(std::span<const std::string> texts) override;
    const Vector& lookup(const std::string& text) const;
    std::size_t size() const { return cache_.size(); }

private:
    Embedder& inner_;
    std::unordered_map<std::string, Vector> cache_;
};

// ---------------------------------------------------------------------------
// Factuality hit rate

/// Per-element minimum similarity for a generated story to hit a reference.
struct Thresholds {
    double actor = 0.70;
    double action = 0.60;
    double expected_outcome = 0.60;

    void validate() const;
};

/// Similarities in (actor, action, expected_outcome) order.
using ElementScores = std::array<double, 3>;

/// True iff every score meets its threshold.
bool passes(const ElementScores& scores, const Thresholds& th);

struct ElementHit {
    bool pass = false;
    ElementScores scores{};
};

ElementHit element_hit(const UserStory& generated, const UserStory& reference, const Thresholds& th,
                       Embedder& embedder);

struct Evidence {
    std::size_t generated_index = 0;
    std::size_t reference_index = 0;
    ElementScores scores{};
    std::array<bool, 3> element_pass{};
    bool pass = false;
};

struct HitReport {
    std::string goal_id;
    bool hit = false;
    /// One row per (generated, reference) pair, generated-major.
    std::vector<Evidence> evidence;
};

/// Compares every generated story with every reference story. All texts are
/// embedded through one CachedEmbedder batch.
HitReport goal_hit(std::span<const UserStory> generated, std::span<const UserStory> references,
                   const Thresholds& th, Embedder& embedder, std::string goal_id = {});

struct GoalRun {
    std::string project_id;
    std::string goal_id;
    std::vector<UserStory> stories;
};

struct ProjectFhr {
    std::string project_id;
    std::size_t hits = 0;
    std::size_t total = 0;
    double rate() const { return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total); }
};

struct FhrReport {
    std::vector<ProjectFhr> projects;  ///< in order of first appearance in the dataset
    double macro_mean = 0.0;           ///< unweighted mean of per-project rates
    double micro_rate = 0.0;           ///< hit goals over all goals
    std::vector<HitReport> goals;      ///< dataset goal order
};

/// Unweighted mean. Throws PreconditionError on an empty list.
double macro_mean(std::span<const double> rates);

/// Groups the dataset by (project_id, normalized goal), runs goal_hit for
/// every goal against all stories sharing it, and aggregates per project.
/// Dataset goals with no run count as misses. Throws UnmatchedGoalError when
/// a run names a goal the dataset does not contain.
FhrReport compute_fhr(std::span<const GoalRun> runs, std::span<const StorySeekRecord> dataset,
                      const Thresholds& th, Embedder& embedder);

// ---------------------------------------------------------------------------
// QuACE

enum class QuaceMode {
    Generated,     ///< four criteria
    DatasetCheck,  ///< adds factual consistency with the project context
};

/// Criterion names accepted from the judge.
inline constexpr std::array<std::string_view, 5> kQuaceCriteria{
    "syntactic", "semantic", "pragmatic", "consistency_goal", "consistency_factual"};

struct QuaceVerdict {
    int score = 0;
    std::vector<std::string> failed_criteria;
    std::string judge_raw;
};

Json to_json(const QuaceVerdict& v);

/// Judge prompt (system, user) for one story.
std::pair<std::string, std::string> build_judge_prompt(const TemplateStore& templates, const UserStory& us,
                                                       const ProjectContext& context, const Goal& goal,
                                                       QuaceMode mode);

/// Parses {"score": 0|1, "failed": [...]}. A score of 1 with failures is
/// downgraded to 0. Throws JudgeFormatError on anything else.
QuaceVerdict parse_judge_verdict(const std::string& json_text);

/// Asks the judge once; unparseable output gets one Format Doctor repair
/// before a JudgeFormatError.
QuaceVerdict quace_evaluate(const UserStory& us, const ProjectContext& context, const Goal& goal,
                            const BackendConfig& judge, QuaceMode mode, Gateway& gateway,
                            const TemplateStore& templates);

/// Fraction of verdicts with score 1.
double quace_rate(std::span<const QuaceVerdict> verdicts);

/// `k` distinct indices drawn uniformly from [0, population), ascending. The
/// draw depends only on the seed (mt19937_64 with rejection sampling, no
/// library distributions). Returns every index when k >= population.
std::vector<std::size_t> seeded_sample(std::size_t population, std::size_t k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Agreement with human labels

/// 2x2 table with rows = ground truth, columns = prediction.
struct ConfusionTable {
    std::size_t tp = 0;  ///< truth positive, predicted positive
    std::size_t fn = 0;  ///< truth positive, predicted negative
    std::size_t fp = 0;  ///< truth negative, predicted positive
    std::size_t tn = 0;  ///< truth negative, predicted negative

    /// Reads the table row-major with ground-truth rows.
    static ConfusionTable from_rows(std::size_t r0c0, std::size_t r0c1, std::size_t r1c0, std::size_t r1c1) {
        return {r0c0, r0c1, r1c0, r1c1};
    }
    std::size_t total() const { return tp + fn + fp + tn; }
};

/// Each metric is nullopt when its denominator is zero.
struct AlignmentReport {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> alignment_rate;
    std::optional<double> fpr;
};

AlignmentReport alignment_metrics(const ConfusionTable& ct);

}  // namespace g2s
