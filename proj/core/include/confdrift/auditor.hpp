#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "confdrift/changepoint.hpp"
#include "confdrift/stat_tests.hpp"

namespace confdrift {

/// One classifier output: predicted label and the winning-label confidence.
struct ConfidenceRecord {
    std::string id;
    std::string label;
    double confidence = 0.0;
    std::optional<std::map<std::string, double>> probs;

    bool operator==(const ConfidenceRecord&) const = default;
};

/// Throws kInvalidRecord unless confidence is in [0,1] and, when probs are
/// present, they sum to 1, peak at `confidence` and the peak is `label`.
void validate_record(const ConfidenceRecord& record);

/// Parses one JSONL line ({"id", "label", "confidence", optional "probs"}).
/// Numeric ids and labels are accepted and stored in decimal form.
ConfidenceRecord parse_record(std::string_view line);

struct RecordLog {
    std::vector<ConfidenceRecord> records;
    std::size_t lines = 0;       // non-blank lines seen
    std::size_t malformed = 0;   // lines skipped by parse/validation
    std::vector<std::string> first_errors;

    double malformed_fraction() const noexcept {
        return lines == 0 ? 0.0 : static_cast<double>(malformed) / static_cast<double>(lines);
    }
};

/// Reads a JSONL confidence log; malformed lines are counted and skipped.
RecordLog read_records(std::istream& in);
RecordLog read_records_file(const std::string& path);

void write_record(std::ostream& out, const ConfidenceRecord& record);

inline constexpr std::size_t kMinBaselineRecords = 30;
inline constexpr std::size_t kMinProductionRecords = 30;
inline constexpr std::size_t kMinLabelRecords = 10;

/// Reference confidence distributions, overall and per predicted label.
struct BaselineProfile {
    std::vector<double> winning_confidences;
    std::map<std::string, std::vector<double>> per_label_confidences;
    std::map<std::string, std::size_t> label_counts;
    std::size_t total = 0;
    std::string created_from;

    /// Throws kFormat if the bookkeeping identities do not hold.
    void validate() const;

    bool operator==(const BaselineProfile&) const = default;
};

BaselineProfile build_baseline(std::span<const ConfidenceRecord> records,
                               std::string created_from = {});

enum class AuditMode { kLabelAgnostic, kPerLabel, kBoth };

std::string_view to_string(AuditMode mode) noexcept;
AuditMode parse_audit_mode(std::string_view name);

struct AuditOptions {
    TestKind kind = TestKind::kKolmogorovSmirnov;
    double alpha = 0.05;
    AuditMode mode = AuditMode::kBoth;
};

struct LabelAudit {
    std::optional<TestResult> result;  // absent when skipped or novel
    bool alert = false;
    bool skipped = false;  // fewer than kMinLabelRecords on either side
    bool novel = false;    // label never predicted in the baseline
    std::size_t baseline_size = 0;
    std::size_t production_size = 0;
};

struct AuditReport {
    TestKind kind = TestKind::kKolmogorovSmirnov;
    AuditMode mode = AuditMode::kBoth;
    double alpha = 0.05;
    std::size_t baseline_size = 0;
    std::size_t production_size = 0;
    std::size_t malformed_lines = 0;
    std::optional<TestResult> label_agnostic;
    bool label_agnostic_alert = false;
    std::map<std::string, LabelAudit> per_label;
    bool drift_alert = false;
};

/// Compares production confidences against the baseline. Per-label p-values
/// are reported uncorrected for multiple comparisons.
AuditReport audit_batch(const BaselineProfile& profile,
                        std::span<const ConfidenceRecord> production,
                        const AuditOptions& options = {});

/// Flat CSV: one "ALL" row, then one row per label.
void write_audit_csv(std::ostream& out, const AuditReport& report);

/// Streaming change-point monitor over winning confidences. The baseline only
/// supplies context for reports; the detector is self-starting.
class ConfidenceMonitor {
public:
    ConfidenceMonitor(const BaselineProfile& profile, ThresholdTable table);

    /// Validates the record first; an invalid record throws kInvalidRecord
    /// and leaves the detector untouched.
    std::optional<Detection> push(const ConfidenceRecord& record);

    const DetectorState& detector() const noexcept { return detector_; }
    std::size_t baseline_size() const noexcept { return baseline_size_; }
    double baseline_mean() const noexcept { return baseline_mean_; }

private:
    DetectorState detector_;
    std::size_t baseline_size_;
    double baseline_mean_;
};

}  // namespace confdrift
