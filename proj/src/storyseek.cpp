#include "g2s/storyseek.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "g2s/fleet.hpp"
#include "g2s/parallel.hpp"
#include "g2s/text.hpp"

namespace g2s {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PreconditionError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Non-blank lines of a JSON-lines file, parsed; the index is the record index.
std::vector<Json> parse_json_lines(const std::string& content) {
    std::vector<Json> docs;
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) throw SchemaError("<root>", "line is not valid JSON", docs.size());
        docs.push_back(std::move(j));
    }
    return docs;
}

std::string first_field(const std::string& violation) {
    return violation.substr(0, violation.find(':'));
}

std::string error_text(const std::exception_ptr& ep) {
    try {
        std::rethrow_exception(ep);
    } catch (const std::exception& e) {
        return e.what();
    } catch (...) {
        return "unknown error";
    }
}

}  // namespace

Json to_json(const RawIssueRecord& r) {
    Json j{{"project_id", r.project_id}, {"text", r.text}};
    if (r.source_url) j["source_url"] = *r.source_url;
    return j;
}

RawIssueRecord raw_issue_from_json(const Json& j) {
    if (!j.is_object()) throw SchemaError("<root>", "expected an object");
    RawIssueRecord r;
    for (const char* key : {"project_id", "text"})
        if (!j.contains(key) || !j.at(key).is_string()) throw SchemaError(key, "missing or not a string");
    r.project_id = j.at("project_id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    if (j.contains("source_url") && j.at("source_url").is_string()) r.source_url = j.at("source_url").get<std::string>();
    return r;
}

std::vector<RawIssueRecord> load_raw_issues(const std::filesystem::path& path) {
    std::vector<RawIssueRecord> out;
    auto docs = parse_json_lines(read_file(path));
    for (std::size_t i = 0; i < docs.size(); ++i) {
        try {
            out.push_back(raw_issue_from_json(docs[i]));
        } catch (const SchemaError& e) {
            throw SchemaError(e.field(), "missing or not a string", i);
        }
    }
    return out;
}

DatasetManifest DatasetManifest::compute(const std::vector<StorySeekRecord>& records,
                                         std::optional<ConstructionParams> construction) {
    DatasetManifest m;
    m.record_count = records.size();
    for (const auto& r : records) ++m.per_project[r.project_id];
    m.construction = std::move(construction);
    return m;
}

Json to_json(const DatasetManifest& m) {
    Json j{{"record_count", m.record_count},
           {"per_project", m.per_project},
           {"schema_version", m.schema_version}};
    if (m.construction)
        j["construction"] = {{"model", m.construction->model_name}, {"temperature", m.construction->temperature}};
    return j;
}

LoadedDataset load_dataset(const std::filesystem::path& path) {
    const std::string content = read_file(path);
    const std::string trimmed = text::trim(content);
    if (trimmed.empty()) throw PreconditionError("dataset file is empty: " + path.string());

    std::vector<Json> docs;
    if (trimmed.front() == '[') {
        Json arr = Json::parse(trimmed, nullptr, false);
        if (arr.is_discarded()) throw SchemaError("<root>", "dataset is not a valid JSON array");
        docs.assign(arr.begin(), arr.end());
    } else {
        docs = parse_json_lines(content);
    }
    if (docs.empty()) throw PreconditionError("dataset contains no records: " + path.string());

    LoadedDataset out;
    out.records.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        StorySeekRecord rec;
        try {
            rec = record_from_json(docs[i]);
        } catch (const SchemaError& e) {
            throw SchemaError(e.field(), "missing or mistyped", i);
        }
        if (auto v = validate_record_structure(rec); !v.empty())
            throw SchemaError(first_field(v.front()), v.front(), i);
        for (const auto& w : validate_record(rec)) out.warnings.push_back(fmt::format("record {}: {}", i, w));
        out.records.push_back(std::move(rec));
    }
    out.manifest = DatasetManifest::compute(out.records);
    return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<StorySeekRecord>& records,
                   const DatasetManifest& manifest) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw PreconditionError("cannot write " + path.string());
        for (const auto& r : records) out << to_json(r).dump() << '\n';
    }
    std::ofstream m(path.parent_path() / "manifest.json", std::ios::binary);
    if (!m) throw PreconditionError("cannot write manifest next to " + path.string());
    m << to_json(manifest).dump(2) << '\n';
}

std::vector<RawIssueRecord> filter_raw(const std::vector<RawIssueRecord>& records) {
    std::vector<RawIssueRecord> kept;
    for (const auto& r : records)
        if (!text::is_blank(r.project_id) && text::word_count(r.text) >= kMinContextWords) kept.push_back(r);
    return kept;
}

Json to_json(const ExtractionAudit& a) {
    Json j{{"project_id", a.project_id},
           {"raw_text", a.raw_text},
           {"system", a.system_text},
           {"prompt", a.user_text},
           {"response", a.response_text}};
    if (a.repaired_text) j["repaired"] = *a.repaired_text;
    if (a.error) j["error"] = *a.error;
    return j;
}

ExtractionResult extract_im(const RawIssueRecord& raw, const BackendConfig& extractor,
                            const BackendConfig& format_doctor_cfg, Gateway& gateway,
                            const TemplateStore& templates, const ExtractOptions& opts) {
    if (text::is_blank(raw.text)) throw PreconditionError("raw issue text is empty");
    const Vars vars{{"project_id", raw.project_id},
                    {"issue", raw.text},
                    {"impact_label", opts.labels.impact},
                    {"deliverable_label", opts.labels.deliverable}};

    ExtractionAudit audit;
    audit.project_id = raw.project_id;
    audit.raw_text = raw.text;
    audit.system_text = templates.render("extractor", "role", vars);
    audit.user_text = templates.render("layout", "extract",
                                       {{"task", templates.render("extractor", "task", vars)},
                                        {"guidelines", templates.render("extractor", "guidelines", vars)},
                                        {"output_format", templates.get("extractor", "output_format")}});

    auto fail = [&](const std::string& what) -> ExtractionError {
        audit.error = what;
        return ExtractionError(fmt::format("extraction failed for project {}: {}", raw.project_id, what), audit);
    };

    auto ex = gateway.complete(extractor, audit.system_text, audit.user_text, "extractor");
    audit.response_text = ex.response_text;

    FormatDoctorResult fixed;
    try {
        fixed = format_doctor(ex.response_text, opts.fd_max_attempts, gateway, format_doctor_cfg, templates);
    } catch (const FormatExhaustedError& e) {
        throw fail(e.what());
    }
    if (fixed.repaired()) audit.repaired_text = fixed.json_text;

    Json doc = Json::parse(fixed.json_text);
    if (!doc.is_object()) throw fail("extractor output is not a JSON object");
    doc["project_id"] = raw.project_id;

    ExtractionResult result;
    try {
        result.record = record_from_json(doc);
    } catch (const SchemaError& e) {
        throw fail(e.what());
    }
    if (auto v = validate_record(result.record); !v.empty()) throw fail(InvariantError(v, "record").what());
    result.repaired = fixed.repaired();
    result.audit = std::move(audit);
    return result;
}

Json to_json(const PairedExtraction& p) {
    auto side = [](const std::optional<ExtractionResult>& r, const std::optional<std::string>& err) {
        if (r) return Json{{"record", to_json(r->record)}, {"repaired", r->repaired}};
        return Json{{"error", err.value_or("")}};
    };
    return Json{{"raw", to_json(p.raw)}, {"first", side(p.first, p.first_error)},
                {"second", side(p.second, p.second_error)}};
}

std::vector<PairedExtraction> extract_paired(const std::vector<RawIssueRecord>& records, const BackendConfig& a,
                                             const BackendConfig& b, const BackendConfig& format_doctor_cfg,
                                             Gateway& gateway, const TemplateStore& templates, int workers,
                                             const ExtractOptions& opts) {
    auto outcomes = parallel_map(records.size(), workers, [&](std::size_t i) {
        PairedExtraction p;
        p.raw = records[i];
        try {
            p.first = extract_im(records[i], a, format_doctor_cfg, gateway, templates, opts);
        } catch (const std::exception& e) {
            p.first_error = e.what();
        }
        try {
            p.second = extract_im(records[i], b, format_doctor_cfg, gateway, templates, opts);
        } catch (const std::exception& e) {
            p.second_error = e.what();
        }
        return p;
    });
    std::vector<PairedExtraction> out;
    for (auto& o : outcomes) {
        if (!o.ok()) std::rethrow_exception(o.error);
        out.push_back(std::move(*o.value));
    }
    return out;
}

QualitySummary dataset_quality_check(const std::vector<StorySeekRecord>& records, const BackendConfig& judge,
                                     Gateway& gateway, const TemplateStore& templates, int workers) {
    auto outcomes = parallel_map(records.size(), workers, [&](std::size_t i) {
        const auto& r = records[i];
        return quace_evaluate(r.im_result.user_story, r.project_info, r.im_result.goal, judge,
                              QuaceMode::DatasetCheck, gateway, templates);
    });

    QualitySummary s;
    std::vector<QuaceVerdict> scored;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        s.verdicts.push_back(outcomes[i].value);
        if (outcomes[i].ok())
            scored.push_back(*outcomes[i].value);
        else
            s.failures.push_back({i, error_text(outcomes[i].error)});
    }
    if (!scored.empty()) s.rate = quace_rate(scored);
    return s;
}

}  // namespace g2s
