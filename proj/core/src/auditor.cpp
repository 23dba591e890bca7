#include "confdrift/auditor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

#include "confdrift/error.hpp"

namespace confdrift {

namespace {

using nlohmann::json;

std::string key_as_string(const json& value, const char* field) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number_integer()) return value.dump();
    fail(ErrorCode::kInvalidRecord, std::string("field '") + field + "' must be a string or integer");
}

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string quoted = "\"";
    for (char c : text) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    return quoted + '"';
}

std::string csv_number(double value) {
    // Same shortest round-trip form as the JSON reports.
    return json(value).dump();
}

}  // namespace

void validate_record(const ConfidenceRecord& record) {
    if (!std::isfinite(record.confidence) || record.confidence < 0.0 || record.confidence > 1.0) {
        fail(ErrorCode::kInvalidRecord, "confidence must be a finite value in [0, 1]");
    }
    if (record.label.empty()) {
        fail(ErrorCode::kInvalidRecord, "label must not be empty");
    }
    if (!record.probs) return;
    const auto& probs = *record.probs;
    if (probs.empty()) {
        fail(ErrorCode::kInvalidRecord, "probs must not be empty");
    }
    double sum = 0.0;
    double peak = -1.0;
    for (const auto& [label, p] : probs) {
        if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
            fail(ErrorCode::kInvalidRecord, "probability for '" + label + "' outside [0, 1]");
        }
        sum += p;
        peak = std::max(peak, p);
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        fail(ErrorCode::kInvalidRecord, "probs must sum to 1");
    }
    if (std::abs(peak - record.confidence) > 1e-9) {
        fail(ErrorCode::kInvalidRecord, "confidence must equal the largest probability");
    }
    const auto it = probs.find(record.label);
    if (it == probs.end() || it->second != peak) {
        fail(ErrorCode::kInvalidRecord, "label must be the argmax of probs");
    }
}

ConfidenceRecord parse_record(std::string_view line) {
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::kInvalidRecord, std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        fail(ErrorCode::kInvalidRecord, "record must be a JSON object");
    }
    for (const char* field : {"id", "label", "confidence"}) {
        if (!doc.contains(field)) {
            fail(ErrorCode::kInvalidRecord, std::string("missing field '") + field + "'");
        }
    }
    ConfidenceRecord record;
    record.id = key_as_string(doc["id"], "id");
    record.label = key_as_string(doc["label"], "label");
    if (!doc["confidence"].is_number()) {
        fail(ErrorCode::kInvalidRecord, "field 'confidence' must be a number");
    }
    record.confidence = doc["confidence"].get<double>();
    if (doc.contains("probs") && !doc["probs"].is_null()) {
        const json& probs = doc["probs"];
        if (!probs.is_object()) {
            fail(ErrorCode::kInvalidRecord, "field 'probs' must be an object");
        }
        std::map<std::string, double> parsed;
        for (const auto& [label, p] : probs.items()) {
            if (!p.is_number()) {
                fail(ErrorCode::kInvalidRecord, "probability for '" + label + "' must be a number");
            }
            parsed.emplace(label, p.get<double>());
        }
        record.probs = std::move(parsed);
    }
    validate_record(record);
    return record;
}

RecordLog read_records(std::istream& in) {
    RecordLog log;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++log.lines;
        try {
            log.records.push_back(parse_record(line));
        } catch (const Error& e) {
            ++log.malformed;
            if (log.first_errors.size() < 5) {
                log.first_errors.push_back("line " + std::to_string(line_number) + ": " + e.what());
            }
        }
    }
    return log;
}

RecordLog read_records_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
    return read_records(in);
}

void write_record(std::ostream& out, const ConfidenceRecord& record) {
    json doc = {{"id", record.id}, {"label", record.label}, {"confidence", record.confidence}};
    if (record.probs) doc["probs"] = *record.probs;
    out << doc.dump() << '\n';
}

void BaselineProfile::validate() const {
    require(total == winning_confidences.size(), ErrorCode::kFormat,
            "baseline total must equal the number of winning confidences");
    std::size_t counted = 0;
    for (const auto& [label, count] : label_counts) {
        const auto it = per_label_confidences.find(label);
        require(it != per_label_confidences.end() && it->second.size() == count, ErrorCode::kFormat,
                "per-label sample size must equal label count for '" + label + "'");
        counted += count;
    }
    require(per_label_confidences.size() == label_counts.size(), ErrorCode::kFormat,
            "per-label samples and label counts disagree");
    require(counted == total, ErrorCode::kFormat, "label counts must sum to total");
    require(total >= kMinBaselineRecords, ErrorCode::kInsufficientData,
            "baseline needs at least " + std::to_string(kMinBaselineRecords) + " records");
    for (double c : winning_confidences) {
        require(std::isfinite(c) && c >= 0.0 && c <= 1.0, ErrorCode::kFormat,
                "baseline confidences must lie in [0, 1]");
    }
}

BaselineProfile build_baseline(std::span<const ConfidenceRecord> records, std::string created_from) {
    if (records.size() < kMinBaselineRecords) {
        fail(ErrorCode::kInsufficientData,
             "baseline needs at least " + std::to_string(kMinBaselineRecords) + " records, got " +
                 std::to_string(records.size()));
    }
    BaselineProfile profile;
    profile.created_from = std::move(created_from);
    profile.winning_confidences.reserve(records.size());
    for (const ConfidenceRecord& r : records) {
        validate_record(r);
        profile.winning_confidences.push_back(r.confidence);
        profile.per_label_confidences[r.label].push_back(r.confidence);
        ++profile.label_counts[r.label];
    }
    profile.total = records.size();
    return profile;
}

std::string_view to_string(AuditMode mode) noexcept {
    switch (mode) {
        case AuditMode::kLabelAgnostic: return "label-agnostic";
        case AuditMode::kPerLabel: return "per-label";
        case AuditMode::kBoth: return "both";
    }
    return "both";
}

AuditMode parse_audit_mode(std::string_view name) {
    if (name == "label-agnostic" || name == "agnostic") return AuditMode::kLabelAgnostic;
    if (name == "per-label" || name == "label") return AuditMode::kPerLabel;
    if (name == "both") return AuditMode::kBoth;
    fail(ErrorCode::kInvalidArgument, "unknown audit mode '" + std::string(name) + "'");
}

AuditReport audit_batch(const BaselineProfile& profile, std::span<const ConfidenceRecord> production,
                        const AuditOptions& options) {
    require(options.alpha > 0.0 && options.alpha < 1.0, ErrorCode::kInvalidArgument,
            "alpha must lie in (0, 1)");
    if (production.size() < kMinProductionRecords) {
        fail(ErrorCode::kInsufficientData,
             "production batch needs at least " + std::to_string(kMinProductionRecords) +
                 " records, got " + std::to_string(production.size()));
    }
    profile.validate();

    AuditReport report;
    report.kind = options.kind;
    report.mode = options.mode;
    report.alpha = options.alpha;
    report.baseline_size = profile.total;
    report.production_size = production.size();

    std::vector<double> confidences;
    std::map<std::string, std::vector<double>> by_label;
    confidences.reserve(production.size());
    for (const ConfidenceRecord& r : production) {
        validate_record(r);
        confidences.push_back(r.confidence);
        by_label[r.label].push_back(r.confidence);
    }

    const auto alerts = [&](const TestResult& result) {
        return result.p_value.has_value() && *result.p_value < options.alpha;
    };

    if (options.mode != AuditMode::kPerLabel) {
        report.label_agnostic = run_two_sample_test(
            options.kind, Sample(profile.winning_confidences), Sample(std::move(confidences)));
        report.label_agnostic_alert = alerts(*report.label_agnostic);
        report.drift_alert = report.label_agnostic_alert;
    }

    if (options.mode != AuditMode::kLabelAgnostic) {
        std::set<std::string> labels;
        for (const auto& [label, count] : profile.label_counts) labels.insert(label);
        for (const auto& [label, values] : by_label) labels.insert(label);

        for (const std::string& label : labels) {
            LabelAudit audit;
            const auto base = profile.per_label_confidences.find(label);
            const auto prod = by_label.find(label);
            audit.baseline_size = base == profile.per_label_confidences.end() ? 0 : base->second.size();
            audit.production_size = prod == by_label.end() ? 0 : prod->second.size();
            if (audit.baseline_size == 0) {
                audit.novel = true;
                audit.alert = true;
            } else if (audit.baseline_size < kMinLabelRecords ||
                       audit.production_size < kMinLabelRecords) {
                audit.skipped = true;
            } else {
                audit.result = run_two_sample_test(options.kind, Sample(base->second),
                                                   Sample(prod->second));
                audit.alert = alerts(*audit.result);
            }
            report.drift_alert = report.drift_alert || audit.alert;
            report.per_label.emplace(label, std::move(audit));
        }
    }
    return report;
}

void write_audit_csv(std::ostream& out, const AuditReport& report) {
    out << "scope,label,test,statistic,p_value,alert,skipped,novel,baseline_n,production_n\n";
    const auto write_result = [&](const std::optional<TestResult>& result) {
        if (result) {
            out << csv_number(result->statistic) << ','
                << (result->p_value ? csv_number(*result->p_value) : std::string()) << ',';
        } else {
            out << ",,";
        }
    };
    const std::string test(to_string(report.kind));
    out << "ALL,," << test << ',';
    write_result(report.label_agnostic);
    out << (report.label_agnostic_alert ? 1 : 0) << ',' << (report.label_agnostic ? 0 : 1)
        << ",0," << report.baseline_size << ',' << report.production_size << '\n';
    for (const auto& [label, audit] : report.per_label) {
        out << "label," << csv_field(label) << ',' << test << ',';
        write_result(audit.result);
        out << (audit.alert ? 1 : 0) << ',' << (audit.skipped ? 1 : 0) << ','
            << (audit.novel ? 1 : 0) << ',' << audit.baseline_size << ',' << audit.production_size
            << '\n';
    }
}

ConfidenceMonitor::ConfidenceMonitor(const BaselineProfile& profile, ThresholdTable table)
    : detector_(std::move(table)), baseline_size_(profile.total) {
    profile.validate();
    baseline_mean_ = std::accumulate(profile.winning_confidences.begin(),
                                     profile.winning_confidences.end(), 0.0) /
                     static_cast<double>(profile.total);
}

std::optional<Detection> ConfidenceMonitor::push(const ConfidenceRecord& record) {
    validate_record(record);
    return detector_.push(record.confidence);
}

}  // namespace confdrift
