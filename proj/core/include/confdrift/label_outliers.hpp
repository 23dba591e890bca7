#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "confdrift/auditor.hpp"

namespace confdrift {

/// Number of records per predicted label.
struct LabelHistogram {
    std::map<std::string, std::size_t> counts;

    std::size_t total() const noexcept;

    static LabelHistogram from_records(std::span<const ConfidenceRecord> records);
};

/// Reads `label,count` rows; a leading header row is skipped.
LabelHistogram read_label_counts_csv(std::istream& in);

enum class OutlierMethod { kIqrInner, kIqrOuter, kModifiedZScore, kHampel, kDbScan1D };

std::string_view to_string(OutlierMethod method) noexcept;

struct OutlierFlags {
    OutlierMethod method;
    std::set<std::string> flagged;
    std::map<std::string, double> parameters;
};

/// Tukey fences on the counts with linear-interpolation quartiles.
/// A multiplier below 3 is reported as the inner-fence method, otherwise outer.
OutlierFlags iqr_outliers(const LabelHistogram& h, double multiplier = 1.5);

/// |0.6745 (x - median) / MAD| > threshold; with MAD = 0 the score becomes
/// (x - median) / (1.2533 * mean absolute deviation).
OutlierFlags modified_zscore_outliers(const LabelHistogram& h, double threshold = 3.5);

/// Flags counts outside median +- k * 1.4826 * MAD (same MAD = 0 fallback).
OutlierFlags hampel_outliers(const LabelHistogram& h, double k = 3.0);

/// DBSCAN on the counts with |a - b| as metric; noise points are flagged.
/// Without eps the default is max(0.1 * median count, 1).
OutlierFlags dbscan_1d_outliers(const LabelHistogram& h, std::optional<double> eps = std::nullopt,
                                std::size_t min_pts = 2);

/// Every method with its default parameters.
std::vector<OutlierFlags> check_label_distribution(const LabelHistogram& h);

// Exposed for tests.
double quantile_linear(std::vector<double> values, double q);
double median(std::vector<double> values);

}  // namespace confdrift
