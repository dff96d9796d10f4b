#include "g2s/reports.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

namespace g2s {

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string md_cell(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '|') out += '\\';
        out += c == '\n' ? ' ' : c;
    }
    return out;
}

Json optional_number(const std::optional<double>& v) {
    return v ? Json(*v) : Json("undefined");
}

}  // namespace

std::string format_percent(std::optional<double> fraction) {
    if (!fraction) return "undefined";
    return fmt::format("{:.2f}", *fraction * 100.0);
}

std::string fhr_csv(const FhrReport& report) {
    std::string out = "project_id,hits,total,rate\n";
    for (const auto& p : report.projects)
        out += fmt::format("{},{},{},{:.6f}\n", csv_field(p.project_id), p.hits, p.total, p.rate());
    return out;
}

std::string summary_markdown(const std::vector<SummaryRow>& rows) {
    std::vector<std::string> projects;
    for (const auto& row : rows)
        for (const auto& p : row.fhr.projects)
            if (std::find(projects.begin(), projects.end(), p.project_id) == projects.end())
                projects.push_back(p.project_id);

    std::string out = "| Method | Model |";
    std::string rule = "|---|---|";
    for (const auto& p : projects) {
        out += " " + md_cell(p) + " |";
        rule += "---:|";
    }
    out += " Mean | QuACE |\n";
    rule += "---:|---:|\n";
    out += rule;

    for (const auto& row : rows) {
        out += "| " + md_cell(row.method) + " | " + md_cell(row.model) + " |";
        for (const auto& p : projects) {
            auto it = std::find_if(row.fhr.projects.begin(), row.fhr.projects.end(),
                                   [&](const ProjectFhr& f) { return f.project_id == p; });
            out += " " + (it == row.fhr.projects.end() ? std::string("-") : format_percent(it->rate())) + " |";
        }
        out += " " + (row.fhr.projects.empty() ? std::string("-") : format_percent(row.fhr.macro_mean)) + " |";
        out += " " + (row.quace ? format_percent(row.quace) : std::string("-")) + " |\n";
    }
    return out;
}

Json to_json(const HitReport& h) {
    Json ev = Json::array();
    for (const auto& e : h.evidence)
        ev.push_back({{"generated_index", e.generated_index},
                      {"reference_index", e.reference_index},
                      {"scores", e.scores},
                      {"element_pass", e.element_pass},
                      {"pass", e.pass}});
    return Json{{"goal_id", h.goal_id}, {"hit", h.hit}, {"evidence", std::move(ev)}};
}

Json to_json(const ProjectFhr& p) {
    return Json{{"project_id", p.project_id}, {"hits", p.hits}, {"total", p.total}, {"rate", p.rate()}};
}

Json to_json(const FhrReport& r) {
    Json projects = Json::array();
    for (const auto& p : r.projects) projects.push_back(to_json(p));
    return Json{{"projects", std::move(projects)}, {"macro_mean", r.macro_mean}, {"micro_rate", r.micro_rate}};
}

std::string evidence_jsonl(const FhrReport& report) {
    std::string out;
    for (const auto& g : report.goals) out += to_json(g).dump() + "\n";
    return out;
}

std::string alignment_text(const ConfusionTable& ct, const AlignmentReport& r) {
    return fmt::format(
        "counts (rows = ground truth): TP={} FN={} FP={} TN={}\n"
        "precision: {}\nrecall: {}\nf1: {}\nalignment_rate: {}\nfpr: {}\n",
        ct.tp, ct.fn, ct.fp, ct.tn, format_percent(r.precision), format_percent(r.recall), format_percent(r.f1),
        format_percent(r.alignment_rate), format_percent(r.fpr));
}

Json to_json(const AlignmentReport& r) {
    return Json{{"precision", optional_number(r.precision)},
                {"recall", optional_number(r.recall)},
                {"f1", optional_number(r.f1)},
                {"alignment_rate", optional_number(r.alignment_rate)},
                {"fpr", optional_number(r.fpr)}};
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PreconditionError("cannot write " + path.string());
    out << content;
}

}  // namespace g2s
