#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "confdrift/changepoint.hpp"
#include "confdrift/simlab.hpp"

namespace confdrift {

/// Ramped drift sequence: clean samples, then samples with 1, 2, ...
/// drift instances, then all-drift samples.
struct SequenceProtocol {
    std::size_t sample_size = 20;
    std::size_t clean_samples = 50;
    std::size_t ramp_samples = 20;
    std::size_t replications = 300;
    std::size_t total_samples = 120;
    std::uint64_t seed = 1;

    void validate() const;
    std::size_t drift_time() const noexcept { return clean_samples * sample_size; }
    std::size_t length() const noexcept { return total_samples * sample_size; }
    /// Drift instances in 1-based sample s.
    std::size_t drift_count(std::size_t sample) const noexcept;
};

/// Draws every instance with replacement; inside a ramp sample the drift
/// instances occupy uniformly random positions.
std::vector<double> build_sequence(std::span<const double> clean, std::span<const double> drift,
                                   const SequenceProtocol& protocol, std::uint64_t replication_seed);

enum class DetectionMethod { kCpmStudentT, kCpmLepage, kCpmCramerVonMises, kCpmKolmogorovSmirnov,
                             kSplitsT, kPairsT };

std::string_view to_string(DetectionMethod method) noexcept;
DetectionMethod parse_detection_method(std::string_view name);
std::optional<TestKind> cpm_kind(DetectionMethod method) noexcept;
std::vector<DetectionMethod> default_methods();

/// Sample indices are 1-based. change_sample is the first sample the method
/// places after the change: ceil((k_hat + 1) / n) for CPM, k + 1 for the
/// split rule and t itself for the pairs rule. change_sample <= t_detect.
struct ReplicationOutcome {
    DetectionMethod method = DetectionMethod::kCpmCramerVonMises;
    std::size_t replication = 0;
    bool detected = false;
    std::optional<std::size_t> t_detect;
    std::optional<std::size_t> change_sample;
    std::optional<std::size_t> k_hat;  // observation index (CPM only)
};

/// CPM fed one observation at a time; t_detect converted to its sample.
ReplicationOutcome cpm_detector(std::span<const double> sequence, std::size_t sample_size,
                                const ThresholdTable& table);

/// At each sample t >= 2, pooled T tests of samples 1..k against k+1..t for
/// every k < t at the classical two-tailed critical value. A change is
/// declared once every split rejects; change_sample follows the largest |T|.
ReplicationOutcome splits_t_detector(std::span<const double> sequence, std::size_t sample_size,
                                     double alpha);

/// T test of sample 1 against sample t for t = 2, 3, ...
ReplicationOutcome pairs_t_detector(std::span<const double> sequence, std::size_t sample_size,
                                    double alpha);

/// Outcomes ordered by replication, then by the order of `methods`.
std::vector<ReplicationOutcome> run_replications(std::span<const double> clean,
                                                 std::span<const double> drift,
                                                 const SequenceProtocol& protocol,
                                                 std::span<const DetectionMethod> methods,
                                                 const std::map<TestKind, ThresholdTable>& tables,
                                                 double naive_alpha = 0.05, unsigned workers = 0);

struct MethodSummary {
    DetectionMethod method = DetectionMethod::kCpmCramerVonMises;
    std::size_t replications = 0;
    std::size_t detections = 0;
    double pr_change_before = 0.0;     // P(change_sample <= clean_samples)
    double pr_detection_before = 0.0;  // P(t_detect <= clean_samples)
    std::map<std::size_t, std::size_t> histogram;  // t_detect -> count
    /// Median of t_detect - clean_samples with misses counted as infinite;
    /// absent when the median itself is a miss.
    std::optional<double> median_delay;
    std::size_t in_window = 0;  // detections in samples clean+1 .. clean+25
};

struct ExperimentSummary {
    SequenceProtocol protocol;
    std::vector<MethodSummary> methods;
};

ExperimentSummary summarize(std::span<const ReplicationOutcome> outcomes, const SequenceProtocol& protocol);

/// One row per method with the two probability columns.
void write_summary_csv(std::ostream& out, const ExperimentSummary& summary);
/// Columns: sample, then the detection count per method.
void write_histogram_csv(std::ostream& out, const ExperimentSummary& summary);

/// Synthetic analog of the held-out-class experiment: a ring mixture with
/// the origin class withheld from training; clean confidences come from the
/// trained classes, drift confidences from a broad out-of-domain Gaussian.
struct CpmExperimentConfig {
    SequenceProtocol protocol;
    std::vector<DetectionMethod> methods = default_methods();
    std::size_t outer_classes = 4;
    double radius = 6.0;
    double sigma = 1.0;
    double drift_sigma = 3.0;
    std::size_t training_per_class = 500;
    std::size_t pool_per_class = 500;
    std::size_t drift_pool_size = 2000;
    TrainingOptions training;
    double cpm_alpha = 1e-5;
    std::size_t cpm_t_max = 200;
    std::size_t cpm_replications = 200000;
    std::uint64_t calibration_seed = 1;
    double naive_alpha = 0.05;
    unsigned workers = 0;
};

struct ConfidencePools {
    std::vector<double> clean;
    std::vector<double> drift;
    double training_accuracy = 0.0;
};

ConfidencePools make_confidence_pools(const CpmExperimentConfig& config);

using Calibrator = std::function<ThresholdTable(const CalibrationOptions&)>;

struct CpmExperimentReport {
    CpmExperimentConfig config;
    double training_accuracy = 0.0;
    std::size_t clean_pool_size = 0;
    std::size_t drift_pool_size = 0;
    std::vector<ReplicationOutcome> outcomes;
    ExperimentSummary summary;
};

/// Builds the pools, calibrates (through `calibrate`, e.g. a caching
/// wrapper) one table per CPM kind and runs every replication.
CpmExperimentReport run_cpm_experiment(const CpmExperimentConfig& config,
                                       const Calibrator& calibrate = calibrate_thresholds);

}  // namespace confdrift
