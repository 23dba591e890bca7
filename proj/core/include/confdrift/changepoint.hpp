#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "confdrift/split_scanner.hpp"
#include "confdrift/stat_tests.hpp"

namespace confdrift {

inline constexpr std::size_t kDefaultBurnIn = 10;

/// How the thresholds were estimated.
///   removal     - streams that exceed h_t are dropped (literal conditional scheme)
///   resampling  - dropped streams are replaced by copies of survivors so the
///                 at-risk population stays constant over long horizons
enum class CalibrationMethod { kRemoval, kResampling };

/// Calibrated CPM thresholds h_t for t = burn_in .. t_max, on the
/// detection_score() scale.
struct ThresholdTable {
    TestKind test_kind = TestKind::kCramerVonMises;
    double alpha = 0.05;
    std::size_t burn_in = kDefaultBurnIn;
    std::size_t t_max = 0;
    std::vector<double> thresholds;
    std::size_t calibration_replications = 0;
    std::uint64_t seed = 0;
    CalibrationMethod method = CalibrationMethod::kRemoval;

    /// Rank kinds are exactly distribution-free; StudentT is calibrated on
    /// Gaussian nulls and is only approximately so.
    bool distribution_free() const noexcept { return test_kind != TestKind::kStudentT; }
    std::string null_model() const { return distribution_free() ? "uniform" : "gaussian"; }

    /// h_t, reusing h_{t_max} beyond the calibrated horizon.
    double threshold_at(std::size_t t) const;

    /// Throws kFormat when an invariant is broken.
    void validate() const;

    bool operator==(const ThresholdTable&) const = default;
};

const char* to_string(CalibrationMethod method) noexcept;
CalibrationMethod parse_calibration_method(const std::string& name);

struct Detection {
    std::size_t t_detect;
    std::size_t k_hat;
    double statistic;
};

enum class DetectorStatus { kMonitoring, kChangeDetected };

/// Single-shot sequential detector over one stream.
class DetectorState {
public:
    explicit DetectorState(ThresholdTable table);

    /// Appends x; returns the detection when d_max(t) exceeds h_t.
    /// Throws kDetectorFinished after a detection and kInvalidArgument on a
    /// non-finite x (the state is left untouched in both cases).
    std::optional<Detection> push(double x);

    DetectorStatus status() const noexcept { return status_; }
    std::size_t t() const noexcept { return scanner_.size(); }
    std::span<const double> observations() const noexcept { return scanner_.observations(); }
    const ThresholdTable& table() const noexcept { return table_; }
    const std::optional<Detection>& detection() const noexcept { return detection_; }

private:
    ThresholdTable table_;
    SplitScanner scanner_;
    DetectorStatus status_ = DetectorStatus::kMonitoring;
    std::optional<Detection> detection_;
};

/// Weight of the mean split statistic in detection_score().
inline constexpr double kTieBreakWeight = 1e-6;

/// Value compared against h_t: d_max plus a tiny multiple of the mean split
/// statistic. For short streams d_max is a coarse lattice (the maximum often
/// sits at the outermost split), and the mean term orders streams that tie on
/// d_max so the calibrated level stays close to alpha.
double detection_score(const SplitMax& split) noexcept;

/// Batch form of the scan: maximized split statistic over the full sequence.
SplitMax max_split_statistic(std::span<const double> observations, TestKind kind);

struct CalibrationOptions {
    TestKind kind = TestKind::kCramerVonMises;
    double alpha = 0.05;
    std::size_t t_max = 200;
    std::size_t replications = 10000;
    std::uint64_t seed = 1;
    std::size_t burn_in = kDefaultBurnIn;
    unsigned workers = 0;
};

/// Monte Carlo calibration of h_t so that, on null streams, the probability
/// of a first detection at t given none before t equals alpha.
///
/// Null streams are i.i.d. Uniform(0,1) for the rank kinds and N(0,1) for
/// StudentT. When fewer than half of the streams are expected to exceed a
/// threshold before t_max the literal removal scheme is used; otherwise the
/// survivors are resampled each step. Results depend only on the options,
/// never on the worker count.
ThresholdTable calibrate_thresholds(const CalibrationOptions& options);

/// Conditional false-alarm profile of a table measured on fresh null streams.
/// The at-risk population is kept at `streams` by replacing each detected
/// stream with a copy of a random survivor.
struct NullRateProfile {
    std::size_t burn_in = 0;
    std::size_t streams = 0;
    std::vector<double> conditional_rate;   // index 0 <-> t = burn_in
    std::vector<double> cumulative_before;  // P(detection at some s < t)
};

NullRateProfile estimate_null_rates(const ThresholdTable& table, std::size_t streams,
                                    std::uint64_t seed, unsigned workers = 0);

}  // namespace confdrift
