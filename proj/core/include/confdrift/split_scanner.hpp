#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "confdrift/stat_tests.hpp"

namespace confdrift {

/// Smallest segment on either side of an admissible split.
inline constexpr std::size_t kMinSegment = 2;

struct SplitMax {
    double statistic;
    std::size_t k_hat;         // prefix length of the maximizing split
    double mean_split = 0.0;   // average statistic over all admissible splits
};

/// Incremental scan of a growing stream x_1..x_t over every split
/// {x_1..x_k} | {x_k+1..x_t}. Each split is scored with a standardized
/// two-sample statistic:
///   StudentT        |T| (pooled variance)
///   CramerVonMises  (T - E[T]) / sd(T) with the untied null moments
///   KolmogorovSmirnov  sqrt(k(t-k)/t) * D
///   Lepage          u^2 + m^2
/// push() keeps per-observation ranks and per-split partial sums current so
/// that scan() costs O(t) for StudentT, CvM and Lepage (O(t^2) for KS).
class SplitScanner {
public:
    explicit SplitScanner(TestKind kind);

    TestKind kind() const noexcept { return kind_; }
    std::size_t size() const noexcept { return x_.size(); }
    std::span<const double> observations() const noexcept { return x_; }

    void reserve(std::size_t n);
    void push(double x);

    /// Maximum over k in [kMinSegment, t - kMinSegment]; ties go to the
    /// smallest k. A stream whose values are all equal scores 0 at k = 2.
    SplitMax scan() const;

    /// Statistic for every admissible split, index 0 <-> k = kMinSegment.
    std::vector<double> split_statistics() const;

private:
    template <typename Visit>
    void for_each_split(Visit&& visit) const;

    TestKind kind_;
    std::vector<double> x_;
    double min_ = 0.0;
    double max_ = 0.0;

    // StudentT: prefix sums of (x - x_1) and its square.
    std::vector<double> sum1_;
    std::vector<double> sum2_;

    // Rank kinds: #{x_j < x_i} and #{x_j <= x_i} over the current stream.
    std::vector<std::uint32_t> less_;
    std::vector<std::uint32_t> less_equal_;
    // CvM and KS: indices sorted by (value, arrival).
    std::vector<std::uint32_t> order_;
    // CvM: carry_[k] = sum_{e<k} max(less_e, less_k).
    std::vector<std::int64_t> carry_;
};

}  // namespace confdrift
