#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "confdrift/auditor.hpp"
#include "confdrift/changepoint.hpp"
#include "confdrift/cpm_experiment.hpp"
#include "confdrift/label_outliers.hpp"
#include "confdrift/simlab.hpp"

namespace confdrift {

using Json = nlohmann::json;

inline constexpr const char* kThresholdsFormat = "confdrift.thresholds/1";
inline constexpr const char* kBaselineFormat = "confdrift.baseline/1";
inline constexpr const char* kAuditFormat = "confdrift.audit/1";
inline constexpr const char* kOutliersFormat = "confdrift.outliers/1";
inline constexpr const char* kSimulationFormat = "confdrift.simulation/1";
inline constexpr const char* kCpmExperimentFormat = "confdrift.cpm-experiment/1";
inline constexpr const char* kNullRatesFormat = "confdrift.null-rates/1";

Json to_json(const TestResult& result);

Json to_json(const ThresholdTable& table);
/// Throws kFormat on a wrong format tag, missing fields or broken invariants.
ThresholdTable threshold_table_from_json(const Json& doc);

Json to_json(const BaselineProfile& profile);
BaselineProfile baseline_from_json(const Json& doc);

Json to_json(const AuditReport& report);
Json to_json(const NullRateProfile& profile);
Json to_json(const std::vector<OutlierFlags>& flags, const LabelHistogram& histogram);

Json to_json(const MixtureSpec& spec);
Json to_json(const DriftSpec& spec);
Json to_json(const SimulationReport& report);

Json to_json(const SequenceProtocol& protocol);
Json to_json(const ExperimentSummary& summary);
Json to_json(const CpmExperimentReport& report);

/// Pretty-printed with a trailing newline; written to a temporary file and
/// renamed so readers never see a partial document.
void write_json_file(const std::filesystem::path& path, const Json& doc);
Json read_json_file(const std::filesystem::path& path);

ThresholdTable load_threshold_table(const std::filesystem::path& path);
void save_threshold_table(const std::filesystem::path& path, const ThresholdTable& table);
BaselineProfile load_baseline(const std::filesystem::path& path);
void save_baseline(const std::filesystem::path& path, const BaselineProfile& profile);

/// File name identifying a calibration by (kind, alpha, t_max, replications,
/// seed, burn_in).
std::string threshold_cache_name(const CalibrationOptions& options);

struct CachedCalibration {
    ThresholdTable table;
    std::filesystem::path path;
    bool reused = false;
};

/// Loads the table from `cache_dir` when present, otherwise calibrates and
/// stores it there.
CachedCalibration calibrate_cached(const CalibrationOptions& options,
                                   const std::filesystem::path& cache_dir);

}  // namespace confdrift
