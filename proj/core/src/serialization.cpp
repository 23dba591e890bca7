#include "confdrift/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "confdrift/error.hpp"

namespace confdrift {

namespace {

void expect_format(const Json& doc, const char* format) {
    if (!doc.is_object() || !doc.contains("format") || doc["format"] != format) {
        fail(ErrorCode::kFormat, std::string("expected a document with format '") + format + "'");
    }
}

template <typename T>
T field(const Json& doc, const char* name) {
    if (!doc.contains(name)) fail(ErrorCode::kFormat, std::string("missing field '") + name + "'");
    try {
        return doc[name].get<T>();
    } catch (const Json::exception& e) {
        fail(ErrorCode::kFormat, std::string("field '") + name + "': " + e.what());
    }
}

Json optional_number(const std::optional<double>& value) {
    return value ? Json(*value) : Json(nullptr);
}

Json optional_count(const std::optional<std::size_t>& value) {
    return value ? Json(*value) : Json(nullptr);
}

}  // namespace

Json to_json(const TestResult& result) {
    return {{"test", to_string(result.kind)},
            {"statistic", result.statistic},
            {"p_value", optional_number(result.p_value)}};
}

Json to_json(const ThresholdTable& table) {
    return {{"format", kThresholdsFormat},
            {"test_kind", to_string(table.test_kind)},
            {"alpha", table.alpha},
            {"burn_in", table.burn_in},
            {"t_max", table.t_max},
            {"thresholds", table.thresholds},
            {"calibration_replications", table.calibration_replications},
            {"seed", table.seed},
            {"method", to_string(table.method)},
            {"null_model", table.null_model()},
            {"distribution_free", table.distribution_free()},
            {"tie_break_weight", kTieBreakWeight}};
}

ThresholdTable threshold_table_from_json(const Json& doc) {
    expect_format(doc, kThresholdsFormat);
    ThresholdTable table;
    try {
        table.test_kind = parse_test_kind(field<std::string>(doc, "test_kind"));
    } catch (const Error& e) {
        fail(ErrorCode::kFormat, e.what());
    }
    table.alpha = field<double>(doc, "alpha");
    table.burn_in = field<std::size_t>(doc, "burn_in");
    table.t_max = field<std::size_t>(doc, "t_max");
    table.thresholds = field<std::vector<double>>(doc, "thresholds");
    table.calibration_replications = field<std::size_t>(doc, "calibration_replications");
    table.seed = field<std::uint64_t>(doc, "seed");
    table.method = parse_calibration_method(field<std::string>(doc, "method"));
    if (doc.contains("tie_break_weight") && field<double>(doc, "tie_break_weight") != kTieBreakWeight) {
        fail(ErrorCode::kFormat, "threshold table was calibrated with a different score");
    }
    table.validate();
    return table;
}

Json to_json(const BaselineProfile& profile) {
    return {{"format", kBaselineFormat},
            {"total", profile.total},
            {"created_from", profile.created_from},
            {"label_counts", profile.label_counts},
            {"winning_confidences", profile.winning_confidences},
            {"per_label_confidences", profile.per_label_confidences}};
}

BaselineProfile baseline_from_json(const Json& doc) {
    expect_format(doc, kBaselineFormat);
    BaselineProfile profile;
    profile.total = field<std::size_t>(doc, "total");
    profile.created_from = field<std::string>(doc, "created_from");
    profile.label_counts = field<std::map<std::string, std::size_t>>(doc, "label_counts");
    profile.winning_confidences = field<std::vector<double>>(doc, "winning_confidences");
    profile.per_label_confidences =
        field<std::map<std::string, std::vector<double>>>(doc, "per_label_confidences");
    try {
        profile.validate();
    } catch (const Error& e) {
        fail(ErrorCode::kFormat, e.what());
    }
    return profile;
}

Json to_json(const AuditReport& report) {
    Json per_label = Json::object();
    for (const auto& [label, audit] : report.per_label) {
        per_label[label] = {{"result", audit.result ? to_json(*audit.result) : Json(nullptr)},
                            {"alert", audit.alert},
                            {"skipped", audit.skipped},
                            {"novel", audit.novel},
                            {"baseline_size", audit.baseline_size},
                            {"production_size", audit.production_size}};
    }
    Json agnostic = nullptr;
    if (report.label_agnostic) {
        agnostic = to_json(*report.label_agnostic);
        agnostic["alert"] = report.label_agnostic_alert;
    }
    return {{"format", kAuditFormat},
            {"test_kind", to_string(report.kind)},
            {"mode", to_string(report.mode)},
            {"alpha", report.alpha},
            {"baseline_size", report.baseline_size},
            {"production_size", report.production_size},
            {"malformed_lines", report.malformed_lines},
            {"label_agnostic", agnostic},
            {"per_label", per_label},
            {"multiple_comparisons", "uncorrected"},
            {"drift_alert", report.drift_alert}};
}

Json to_json(const NullRateProfile& profile) {
    return {{"format", kNullRatesFormat},
            {"burn_in", profile.burn_in},
            {"streams", profile.streams},
            {"conditional_rate", profile.conditional_rate},
            {"cumulative_before", profile.cumulative_before}};
}

Json to_json(const std::vector<OutlierFlags>& flags, const LabelHistogram& histogram) {
    Json methods = Json::array();
    for (const OutlierFlags& f : flags) {
        methods.push_back({{"method", to_string(f.method)},
                           {"flagged", f.flagged},
                           {"parameters", f.parameters}});
    }
    return {{"format", kOutliersFormat},
            {"counts", histogram.counts},
            {"total", histogram.total()},
            {"methods", methods}};
}

Json to_json(const MixtureSpec& spec) {
    return {{"num_classes", spec.num_classes},
            {"dimension", spec.dimension},
            {"class_means", spec.class_means},
            {"class_sigmas", spec.class_sigmas},
            {"records_per_class", spec.records_per_class}};
}

Json to_json(const DriftSpec& spec) {
    Json doc = {{"kind", to_string(spec.kind)}, {"type", static_cast<int>(spec.kind)}};
    switch (spec.kind) {
        case DriftKind::kHeldOutClass: doc["held_out_classes"] = spec.held_out_classes; break;
        case DriftKind::kSelectionCriteria:
            doc["feature"] = spec.feature;
            doc["quantile"] = spec.quantile;
            break;
        case DriftKind::kOutOfDomain:
            doc["alternative"] = spec.alternative ? to_json(*spec.alternative) : Json(nullptr);
            break;
        case DriftKind::kRandomLegal: doc["pool_size"] = spec.pool_size; break;
        case DriftKind::kFeatureFunction:
            doc["feature"] = spec.feature;
            doc["multiplier"] = spec.multiplier;
            break;
    }
    return doc;
}

Json to_json(const SimulationReport& report) {
    const SimulationConfig& c = report.config;
    const DriftSearchResult& s = report.search;
    Json labels = Json::object();
    for (const auto& [label, rates] : s.label_rates) {
        labels[label] = {{"rates", rates}, {"minimal_fraction", optional_number(s.label_minimal.at(label))}};
    }
    return {{"format", kSimulationFormat},
            {"config",
             {{"seed", c.seed},
              {"mixture", to_json(c.mixture)},
              {"drift", to_json(c.drift)},
              {"null_drift", c.null_drift},
              {"training",
               {{"epochs", c.training.epochs},
                {"learning_rate", c.training.learning_rate},
                {"noise_level", c.training.noise_level}}},
              {"baseline_per_class", c.baseline_per_class},
              {"production_per_class", c.production_per_class},
              {"test_kind", to_string(c.search.audit.kind)},
              {"alpha", c.search.audit.alpha},
              {"mode", to_string(c.search.audit.mode)},
              {"batch_size", c.search.batch_size},
              {"iterations", c.search.iterations},
              {"grid", c.search.grid}}},
            {"training_accuracy", report.training_accuracy},
            {"drift_pool_size", report.drift_pool_size},
            {"baseline_size", report.baseline_size},
            {"label_agnostic",
             {{"rates", s.all_rates}, {"minimal_fraction", optional_number(s.all_minimal)}}},
            {"per_label", labels},
            {"best_label_minimal_fraction", optional_number(s.best_label_minimal())}};
}

Json to_json(const SequenceProtocol& p) {
    return {{"sample_size", p.sample_size},       {"clean_samples", p.clean_samples},
            {"ramp_samples", p.ramp_samples},     {"replications", p.replications},
            {"total_samples", p.total_samples},   {"seed", p.seed},
            {"drift_time", p.drift_time()}};
}

Json to_json(const ExperimentSummary& summary) {
    Json methods = Json::array();
    for (const MethodSummary& s : summary.methods) {
        Json histogram = Json::object();
        for (const auto& [t, count] : s.histogram) histogram[std::to_string(t)] = count;
        methods.push_back({{"method", to_string(s.method)},
                           {"cpm", cpm_kind(s.method).has_value()},
                           {"replications", s.replications},
                           {"detections", s.detections},
                           {"pr_determined_change_before", s.pr_change_before},
                           {"pr_detection_before", s.pr_detection_before},
                           {"median_delay", optional_number(s.median_delay)},
                           {"detections_in_window", s.in_window},
                           {"histogram", histogram}});
    }
    return {{"protocol", to_json(summary.protocol)}, {"methods", methods}};
}

Json to_json(const CpmExperimentReport& report) {
    const CpmExperimentConfig& c = report.config;
    std::vector<std::string> methods;
    for (DetectionMethod m : c.methods) methods.emplace_back(to_string(m));
    Json outcomes = Json::array();
    for (const ReplicationOutcome& o : report.outcomes) {
        outcomes.push_back({{"replication", o.replication},
                            {"method", to_string(o.method)},
                            {"detected", o.detected},
                            {"t_detect", optional_count(o.t_detect)},
                            {"change_sample", optional_count(o.change_sample)},
                            {"k_hat", optional_count(o.k_hat)}});
    }
    return {{"format", kCpmExperimentFormat},
            {"config",
             {{"protocol", to_json(c.protocol)},
              {"methods", methods},
              {"outer_classes", c.outer_classes},
              {"radius", c.radius},
              {"sigma", c.sigma},
              {"drift_sigma", c.drift_sigma},
              {"training_per_class", c.training_per_class},
              {"pool_per_class", c.pool_per_class},
              {"drift_pool_size", c.drift_pool_size},
              {"epochs", c.training.epochs},
              {"learning_rate", c.training.learning_rate},
              {"cpm_alpha", c.cpm_alpha},
              {"cpm_t_max", c.cpm_t_max},
              {"cpm_replications", c.cpm_replications},
              {"calibration_seed", c.calibration_seed},
              {"naive_alpha", c.naive_alpha}}},
            {"training_accuracy", report.training_accuracy},
            {"clean_pool_size", report.clean_pool_size},
            {"drift_pool_size", report.drift_pool_size},
            {"summary", to_json(report.summary)},
            {"outcomes", outcomes}};
}

void write_json_file(const std::filesystem::path& path, const Json& doc) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCode::kIo, "cannot write '" + tmp.string() + "'");
        out << doc.dump(2) << '\n';
        if (!out) fail(ErrorCode::kIo, "write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorCode::kIo, "cannot move '" + tmp.string() + "' into place: " + ec.message());
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        fail(ErrorCode::kFormat, "'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

ThresholdTable load_threshold_table(const std::filesystem::path& path) {
    return threshold_table_from_json(read_json_file(path));
}

void save_threshold_table(const std::filesystem::path& path, const ThresholdTable& table) {
    write_json_file(path, to_json(table));
}

BaselineProfile load_baseline(const std::filesystem::path& path) {
    return baseline_from_json(read_json_file(path));
}

void save_baseline(const std::filesystem::path& path, const BaselineProfile& profile) {
    write_json_file(path, to_json(profile));
}

std::string threshold_cache_name(const CalibrationOptions& options) {
    std::ostringstream name;
    name << "thresholds-" << to_string(options.kind) << "-a" << Json(options.alpha).dump() << "-t"
         << options.t_max << "-r" << options.replications << "-s" << options.seed << "-b"
         << options.burn_in << ".json";
    return name.str();
}

CachedCalibration calibrate_cached(const CalibrationOptions& options,
                                   const std::filesystem::path& cache_dir) {
    CachedCalibration result;
    result.path = cache_dir / threshold_cache_name(options);
    if (std::filesystem::exists(result.path)) {
        ThresholdTable table;
        try {
            table = load_threshold_table(result.path);
        } catch (const Error&) {
            // A damaged entry is recomputed and overwritten.
            table.calibration_replications = 0;
        }
        if (table.test_kind == options.kind && table.alpha == options.alpha &&
            table.t_max == options.t_max && table.burn_in == options.burn_in &&
            table.calibration_replications == options.replications && table.seed == options.seed) {
            result.table = std::move(table);
            result.reused = true;
            return result;
        }
    }
    result.table = calibrate_thresholds(options);
    save_threshold_table(result.path, result.table);
    return result;
}

}  // namespace confdrift
