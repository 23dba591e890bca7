#include "confdrift/label_outliers.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <sstream>

#include "confdrift/error.hpp"

namespace confdrift {

namespace {

constexpr double kMadToSigma = 1.4826;
constexpr double kMeanAdToSigma = 1.2533;
constexpr double kModifiedZ = 0.6745;

std::vector<double> count_values(const LabelHistogram& h) {
    std::vector<double> values;
    values.reserve(h.counts.size());
    for (const auto& [label, count] : h.counts) values.push_back(static_cast<double>(count));
    return values;
}

void require_labels(const LabelHistogram& h, std::size_t minimum, std::string_view method) {
    if (h.counts.size() < minimum) {
        fail(ErrorCode::kInsufficientData, std::string(method) + " needs at least " +
                                               std::to_string(minimum) + " labels");
    }
    require(h.total() >= 1, ErrorCode::kInsufficientData, "histogram is empty");
}

struct RobustScale {
    double center;
    double mad;
    double mean_ad;
};

RobustScale robust_scale(const std::vector<double>& values) {
    const double center = median(values);
    std::vector<double> dev(values.size());
    std::transform(values.begin(), values.end(), dev.begin(),
                   [center](double v) { return std::abs(v - center); });
    const double mean_ad = std::accumulate(dev.begin(), dev.end(), 0.0) / static_cast<double>(dev.size());
    return {center, median(std::move(dev)), mean_ad};
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\"");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\"");
    return s.substr(first, last - first + 1);
}

}  // namespace

std::size_t LabelHistogram::total() const noexcept {
    std::size_t sum = 0;
    for (const auto& [label, count] : counts) sum += count;
    return sum;
}

LabelHistogram LabelHistogram::from_records(std::span<const ConfidenceRecord> records) {
    LabelHistogram h;
    for (const ConfidenceRecord& r : records) ++h.counts[r.label];
    return h;
}

LabelHistogram read_label_counts_csv(std::istream& in) {
    LabelHistogram h;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) {
            fail(ErrorCode::kFormat, "line " + std::to_string(line_number) + ": expected label,count");
        }
        const std::string label = trim(line.substr(0, comma));
        const std::string count_text = trim(line.substr(comma + 1));
        std::size_t used = 0;
        long long count = -1;
        try {
            count = std::stoll(count_text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != count_text.size() || count_text.empty()) {
            if (line_number == 1 && h.counts.empty()) continue;  // header row
            fail(ErrorCode::kFormat, "line " + std::to_string(line_number) + ": invalid count");
        }
        require(count >= 0, ErrorCode::kFormat, "counts must be non-negative");
        require(!label.empty(), ErrorCode::kFormat, "empty label");
        require(h.counts.emplace(label, static_cast<std::size_t>(count)).second, ErrorCode::kFormat,
                "duplicate label '" + label + "'");
    }
    return h;
}

std::string_view to_string(OutlierMethod method) noexcept {
    switch (method) {
        case OutlierMethod::kIqrInner: return "iqr-inner";
        case OutlierMethod::kIqrOuter: return "iqr-outer";
        case OutlierMethod::kModifiedZScore: return "modified-zscore";
        case OutlierMethod::kHampel: return "hampel";
        case OutlierMethod::kDbScan1D: return "dbscan";
    }
    return "unknown";
}

double quantile_linear(std::vector<double> values, double q) {
    require(!values.empty(), ErrorCode::kInsufficientData, "quantile of an empty set");
    require(q >= 0.0 && q <= 1.0, ErrorCode::kInvalidArgument, "quantile level outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile_linear(std::move(values), 0.5); }

OutlierFlags iqr_outliers(const LabelHistogram& h, double multiplier) {
    require(multiplier > 0.0, ErrorCode::kInvalidArgument, "IQR multiplier must be positive");
    require_labels(h, 4, "IQR");
    const std::vector<double> values = count_values(h);
    const double q1 = quantile_linear(values, 0.25);
    const double q3 = quantile_linear(values, 0.75);
    const double lower = q1 - multiplier * (q3 - q1);
    const double upper = q3 + multiplier * (q3 - q1);

    OutlierFlags flags{multiplier < 3.0 ? OutlierMethod::kIqrInner : OutlierMethod::kIqrOuter, {},
                       {{"multiplier", multiplier}, {"q1", q1}, {"q3", q3}, {"lower", lower},
                        {"upper", upper}}};
    for (const auto& [label, count] : h.counts) {
        const auto c = static_cast<double>(count);
        if (c < lower || c > upper) flags.flagged.insert(label);
    }
    return flags;
}

OutlierFlags modified_zscore_outliers(const LabelHistogram& h, double threshold) {
    require(threshold > 0.0, ErrorCode::kInvalidArgument, "threshold must be positive");
    require_labels(h, 3, "modified z-score");
    const RobustScale s = robust_scale(count_values(h));
    OutlierFlags flags{OutlierMethod::kModifiedZScore, {},
                       {{"threshold", threshold}, {"median", s.center}, {"mad", s.mad},
                        {"mean_ad", s.mean_ad}}};
    for (const auto& [label, count] : h.counts) {
        const double dev = static_cast<double>(count) - s.center;
        double score = 0.0;
        if (s.mad > 0.0) {
            score = kModifiedZ * dev / s.mad;
        } else if (s.mean_ad > 0.0) {
            score = dev / (kMeanAdToSigma * s.mean_ad);
        }
        if (std::abs(score) > threshold) flags.flagged.insert(label);
    }
    return flags;
}

OutlierFlags hampel_outliers(const LabelHistogram& h, double k) {
    require(k > 0.0, ErrorCode::kInvalidArgument, "Hampel k must be positive");
    require_labels(h, 3, "Hampel");
    const RobustScale s = robust_scale(count_values(h));
    const double scale = s.mad > 0.0 ? kMadToSigma * s.mad : kMeanAdToSigma * s.mean_ad;
    OutlierFlags flags{OutlierMethod::kHampel, {},
                       {{"k", k}, {"median", s.center}, {"mad", s.mad}, {"scale", scale}}};
    if (scale == 0.0) return flags;
    for (const auto& [label, count] : h.counts) {
        if (std::abs(static_cast<double>(count) - s.center) > k * scale) flags.flagged.insert(label);
    }
    return flags;
}

OutlierFlags dbscan_1d_outliers(const LabelHistogram& h, std::optional<double> eps, std::size_t min_pts) {
    require(min_pts >= 2, ErrorCode::kInvalidArgument, "min_pts must be at least 2");
    require_labels(h, 1, "DBSCAN");
    const std::vector<double> values = count_values(h);
    const double radius = eps.value_or(std::max(0.1 * median(values), 1.0));
    require(radius > 0.0 && std::isfinite(radius), ErrorCode::kInvalidArgument, "eps must be positive");

    // In one dimension the eps-neighbourhood of a point is a contiguous run of
    // the sorted values, so core points and their reach follow from two scans.
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return values[a] < values[b];
    });
    std::vector<double> sorted(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) sorted[i] = values[order[i]];

    std::vector<char> core(sorted.size(), 0);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const auto lo = std::lower_bound(sorted.begin(), sorted.end(), sorted[i] - radius);
        const auto hi = std::upper_bound(sorted.begin(), sorted.end(), sorted[i] + radius);
        core[i] = static_cast<std::size_t>(hi - lo) >= min_pts ? 1 : 0;
    }
    std::vector<char> noise(sorted.size(), 1);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (!core[i]) continue;
        noise[i] = 0;
        for (std::size_t j = i; j-- > 0 && sorted[i] - sorted[j] <= radius;) noise[j] = 0;
        for (std::size_t j = i + 1; j < sorted.size() && sorted[j] - sorted[i] <= radius; ++j) noise[j] = 0;
    }

    OutlierFlags flags{OutlierMethod::kDbScan1D, {},
                       {{"eps", radius}, {"min_pts", static_cast<double>(min_pts)}}};
    std::vector<const std::string*> labels;
    for (const auto& [label, count] : h.counts) labels.push_back(&label);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (noise[i]) flags.flagged.insert(*labels[order[i]]);
    }
    return flags;
}

std::vector<OutlierFlags> check_label_distribution(const LabelHistogram& h) {
    return {iqr_outliers(h, 1.5), iqr_outliers(h, 3.0), modified_zscore_outliers(h),
            hampel_outliers(h), dbscan_1d_outliers(h)};
}

}  // namespace confdrift
