#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "g2s/core.hpp"
#include "g2s/evalkit.hpp"
#include "g2s/gateway.hpp"
#include "g2s/templates.hpp"

namespace g2s {

inline constexpr std::string_view kDatasetSchemaVersion = "1";
inline constexpr std::size_t kMinContextWords = 11;

struct RawIssueRecord {
    std::string project_id;
    std::string text;  ///< title + description + context
    std::optional<std::string> source_url;
};

Json to_json(const RawIssueRecord& r);
RawIssueRecord raw_issue_from_json(const Json& j);

/// JSON lines of RawIssueRecord. Throws SchemaError with the line's record index.
std::vector<RawIssueRecord> load_raw_issues(const std::filesystem::path& path);

struct ConstructionParams {
    std::string model_name;
    double temperature = 0.3;
};

struct DatasetManifest {
    std::size_t record_count = 0;
    std::map<std::string, std::size_t> per_project;
    std::string schema_version{kDatasetSchemaVersion};
    std::optional<ConstructionParams> construction;

    static DatasetManifest compute(const std::vector<StorySeekRecord>& records,
                                   std::optional<ConstructionParams> construction = std::nullopt);
};

Json to_json(const DatasetManifest& m);

struct LoadedDataset {
    std::vector<StorySeekRecord> records;
    DatasetManifest manifest;
    /// Soft findings (e.g. a story action that does not lead with a verb).
    std::vector<std::string> warnings;
};

/// Accepts JSON lines or one JSON array. Records are kept in file order,
/// duplicates included. Throws SchemaError naming the record index and field;
/// an empty file is a PreconditionError.
LoadedDataset load_dataset(const std::filesystem::path& path);

/// Writes JSON lines to `path` and the manifest to `manifest.json` next to it.
void write_dataset(const std::filesystem::path& path, const std::vector<StorySeekRecord>& records,
                   const DatasetManifest& manifest);

/// Keeps records with a non-empty project id and at least 11 words of text.
std::vector<RawIssueRecord> filter_raw(const std::vector<RawIssueRecord>& records);

/// Material for the manual review step of dataset construction.
struct ExtractionAudit {
    std::string project_id;
    std::string raw_text;
    std::string system_text;
    std::string user_text;
    std::string response_text;
    std::optional<std::string> repaired_text;
    std::optional<std::string> error;
};

Json to_json(const ExtractionAudit& a);

struct ExtractionResult {
    StorySeekRecord record;
    bool repaired = false;
    ExtractionAudit audit;
};

/// Extraction failure carrying the audit for manual triage.
class ExtractionError : public Error {
public:
    ExtractionError(const std::string& what, ExtractionAudit audit) : Error(what), audit_(std::move(audit)) {}
    const ExtractionAudit& audit() const noexcept { return audit_; }

private:
    ExtractionAudit audit_;
};

struct ExtractOptions {
    int fd_max_attempts = 2;
    ElementLabels labels;
};

/// One completion producing IM-Result and project info; the project id always
/// comes from the input record. Throws ExtractionError on Format Doctor
/// exhaustion, schema or invariant failure.
ExtractionResult extract_im(const RawIssueRecord& raw, const BackendConfig& extractor,
                            const BackendConfig& format_doctor, Gateway& gateway,
                            const TemplateStore& templates, const ExtractOptions& opts = {});

/// Same record extracted under two configs, for side-by-side human review.
struct PairedExtraction {
    RawIssueRecord raw;
    std::optional<ExtractionResult> first;
    std::optional<ExtractionResult> second;
    std::optional<std::string> first_error;
    std::optional<std::string> second_error;
};

Json to_json(const PairedExtraction& p);

std::vector<PairedExtraction> extract_paired(const std::vector<RawIssueRecord>& records, const BackendConfig& a,
                                             const BackendConfig& b, const BackendConfig& format_doctor,
                                             Gateway& gateway, const TemplateStore& templates, int workers,
                                             const ExtractOptions& opts = {});

struct RecordFailure {
    std::size_t index = 0;
    std::string error;
};

struct QualitySummary {
    /// Verdicts per record; nullopt where the judge failed.
    std::vector<std::optional<QuaceVerdict>> verdicts;
    std::vector<RecordFailure> failures;
    /// Over scored records only; nullopt when nothing was scored.
    std::optional<double> rate;
};

/// QuACE in dataset-check mode for every record. Judge errors are recorded
/// per record and the batch continues.
QualitySummary dataset_quality_check(const std::vector<StorySeekRecord>& records, const BackendConfig& judge,
                                     Gateway& gateway, const TemplateStore& templates, int workers = 1);

}  // namespace g2s
