#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "g2s/evalkit.hpp"

namespace g2s {

/// "64.70" style percentage with two decimals, or "undefined".
std::string format_percent(std::optional<double> fraction);

/// project_id,hits,total,rate with rate to six decimals. Fields containing
/// commas or quotes are quoted.
std::string fhr_csv(const FhrReport& report);

/// One row of the summary table: a method run with one model.
struct SummaryRow {
    std::string method;
    std::string model;
    FhrReport fhr;
    std::optional<double> quace;
};

/// Method | Model | one column per project | Mean | QuACE. Project columns are
/// the union over rows in first-seen order; cells for projects a row lacks
/// are "-".
std::string summary_markdown(const std::vector<SummaryRow>& rows);

/// One HitReport per line.
std::string evidence_jsonl(const FhrReport& report);
Json to_json(const HitReport& h);
Json to_json(const ProjectFhr& p);
Json to_json(const FhrReport& r);

/// Five lines "name: value".
std::string alignment_text(const ConfusionTable& ct, const AlignmentReport& r);
Json to_json(const AlignmentReport& r);

/// Writes `content` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& content);

}  // namespace g2s
