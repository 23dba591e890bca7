#include "confdrift/split_scanner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "confdrift/error.hpp"

namespace confdrift {

namespace {

struct Scratch {
    std::vector<double> a;
    std::vector<double> b;
    std::vector<long double> c;
};

Scratch& scratch() {
    thread_local Scratch s;
    return s;
}

}  // namespace

SplitScanner::SplitScanner(TestKind kind) : kind_(kind) {
    switch (kind) {
        case TestKind::kStudentT:
        case TestKind::kCramerVonMises:
        case TestKind::kKolmogorovSmirnov:
        case TestKind::kLepage:
            break;
        default:
            fail(ErrorCode::kInvalidArgument,
                 "change-point scanning supports StudentT, CramerVonMises, KolmogorovSmirnov "
                 "and Lepage, not " + std::string(to_string(kind)));
    }
    if (kind_ == TestKind::kStudentT) {
        sum1_.push_back(0.0);
        sum2_.push_back(0.0);
    }
}

void SplitScanner::reserve(std::size_t n) {
    x_.reserve(n);
    switch (kind_) {
        case TestKind::kStudentT:
            sum1_.reserve(n + 1);
            sum2_.reserve(n + 1);
            break;
        case TestKind::kCramerVonMises:
            carry_.reserve(n);
            [[fallthrough]];
        case TestKind::kKolmogorovSmirnov:
            order_.reserve(n);
            [[fallthrough]];
        default:
            less_.reserve(n);
            less_equal_.reserve(n);
    }
}

void SplitScanner::push(double z) {
    if (!std::isfinite(z)) {
        fail(ErrorCode::kInvalidArgument, "observations must be finite");
    }
    if (x_.empty()) {
        min_ = max_ = z;
    } else {
        min_ = std::min(min_, z);
        max_ = std::max(max_, z);
    }
    const std::size_t t = x_.size();

    if (kind_ == TestKind::kStudentT) {
        const double shifted = t == 0 ? 0.0 : z - x_.front();
        sum1_.push_back(sum1_.back() + shifted);
        sum2_.push_back(sum2_.back() + shifted * shifted);
        x_.push_back(z);
        return;
    }

    if (kind_ == TestKind::kCramerVonMises) {
        // Every pooled count less(v) grows by [z < v]; carry_[k] sums
        // max(less_e, less_k) = less(max(x_e, x_k)) over e < k.
        std::int64_t at_most_z = 0;
        for (std::size_t k = 0; k < t; ++k) {
            const bool below = x_[k] <= z;
            carry_[k] += static_cast<std::int64_t>(k) - (below ? at_most_z : 0);
            at_most_z += below ? 1 : 0;
        }
    }

    std::uint32_t less_z = 0;
    std::uint32_t less_equal_z = 1;
    for (std::size_t i = 0; i < t; ++i) {
        const double v = x_[i];
        less_[i] += z < v ? 1u : 0u;
        less_equal_[i] += z <= v ? 1u : 0u;
        less_z += v < z ? 1u : 0u;
        less_equal_z += v <= z ? 1u : 0u;
    }
    x_.push_back(z);
    less_.push_back(less_z);
    less_equal_.push_back(less_equal_z);

    if (kind_ == TestKind::kCramerVonMises || kind_ == TestKind::kKolmogorovSmirnov) {
        // Ties keep arrival order, so z goes after every equal value.
        order_.insert(order_.begin() + less_equal_z - 1, static_cast<std::uint32_t>(t));
    }
    if (kind_ == TestKind::kCramerVonMises) {
        std::int64_t c = 0;
        for (std::size_t e = 0; e < t; ++e) {
            c += std::max(less_[e], less_z);
        }
        carry_.push_back(c);
    }
}

template <typename Visit>
void SplitScanner::for_each_split(Visit&& visit) const {
    const std::size_t t = x_.size();
    const double tt = static_cast<double>(t);

    switch (kind_) {
        case TestKind::kStudentT: {
            const double total1 = sum1_[t];
            const double total2 = sum2_[t];
            for (std::size_t k = kMinSegment; k + kMinSegment <= t; ++k) {
                const double n = static_cast<double>(k);
                const double m = tt - n;
                const double sa = sum1_[k];
                const double sb = total1 - sa;
                const double ssa = std::max(0.0, sum2_[k] - sa * sa / n);
                const double ssb = std::max(0.0, (total2 - sum2_[k]) - sb * sb / m);
                const double pooled = (ssa + ssb) / (tt - 2.0);
                const double diff = sa / n - sb / m;
                double stat = 0.0;
                if (pooled > 0.0) {
                    stat = std::abs(diff) / std::sqrt(pooled * (1.0 / n + 1.0 / m));
                } else if (diff != 0.0) {
                    stat = std::numeric_limits<double>::max();
                }
                visit(k, stat);
            }
            return;
        }
        case TestKind::kLepage: {
            Scratch& s = scratch();
            s.a.resize(t);
            s.b.resize(t);
            const double center = 0.5 * (tt + 1.0);
            double rank_ss = 0.0;
            double mood_sum = 0.0;
            for (std::size_t i = 0; i < t; ++i) {
                const double r = 0.5 * (static_cast<double>(less_[i]) +
                                        static_cast<double>(less_equal_[i]) + 1.0);
                const double dev = r - center;
                s.a[i] = r;
                s.b[i] = dev * dev;
                rank_ss += dev * dev;
                mood_sum += dev * dev;
            }
            const double mood_mean = mood_sum / tt;
            double mood_ss = 0.0;
            for (std::size_t i = 0; i < t; ++i) {
                mood_ss += (s.b[i] - mood_mean) * (s.b[i] - mood_mean);
            }
            double w = 0.0;
            double mood = 0.0;
            for (std::size_t k = 1; k + kMinSegment <= t; ++k) {
                w += s.a[k - 1];
                mood += s.b[k - 1];
                if (k < kMinSegment) continue;
                const double n = static_cast<double>(k);
                const double factor = n * (tt - n) / (tt * (tt - 1.0));
                const double var_w = factor * rank_ss;
                const double var_m = factor * mood_ss;
                const double u = var_w > 0.0 ? (w - n * center) / std::sqrt(var_w) : 0.0;
                const double mm = var_m > 0.0 ? (mood - n * mood_mean) / std::sqrt(var_m) : 0.0;
                visit(k, u * u + mm * mm);
            }
            return;
        }
        case TestKind::kCramerVonMises: {
            // For split k and pooled observation i let A_i = #{e <= k : x_e <= x_i}
            // and P_i = #{j : x_j <= x_i}. Then
            //   T_k = sum_i (A_i t - P_i n)^2 / (n m t^2)
            // with sum_i A_i^2 = k^2 t - sum_{e,f<=k} max(less_e, less_f) and
            // sum_i A_i P_i = sum_{e<=k} G_e, G_e = sum_{i : x_i >= x_e} P_i.
            Scratch& s = scratch();
            s.c.resize(t + 1);
            s.c[t] = 0.0L;
            for (std::size_t p = t; p-- > 0;) {
                s.c[p] = s.c[p + 1] + static_cast<long double>(less_equal_[order_[p]]);
            }
            long double s_pp = 0.0L;
            for (std::size_t i = 0; i < t; ++i) {
                const long double p = less_equal_[i];
                s_pp += p * p;
            }
            const long double lt = static_cast<long double>(t);
            long double pair_max = 0.0L;
            long double s_ap = 0.0L;
            for (std::size_t k = 1; k + kMinSegment <= t; ++k) {
                const std::size_t e = k - 1;
                pair_max += 2.0L * static_cast<long double>(carry_[e]) +
                            static_cast<long double>(less_[e]);
                s_ap += s.c[less_[e]];
                if (k < kMinSegment) continue;
                const long double n = static_cast<long double>(k);
                const long double m = lt - n;
                const long double s_aa = n * n * lt - pair_max;
                const long double num = lt * lt * s_aa - 2.0L * lt * n * s_ap + n * n * s_pp;
                const double stat = static_cast<double>(num / (n * m * lt * lt));
                const NullMoments mom = cvm_null_moments(k, t - k);
                visit(k, (stat - mom.mean) / std::sqrt(mom.variance));
            }
            return;
        }
        case TestKind::kKolmogorovSmirnov: {
            for (std::size_t k = kMinSegment; k + kMinSegment <= t; ++k) {
                const double n = static_cast<double>(k);
                const double m = tt - n;
                std::size_t in_prefix = 0;
                std::size_t in_suffix = 0;
                double d = 0.0;
                for (std::size_t p = 0; p < t; ++p) {
                    const std::uint32_t e = order_[p];
                    if (e < k) ++in_prefix; else ++in_suffix;
                    const bool group_end = p + 1 == t || x_[order_[p + 1]] != x_[e];
                    if (group_end) {
                        d = std::max(d, std::abs(static_cast<double>(in_prefix) / n -
                                                 static_cast<double>(in_suffix) / m));
                    }
                }
                visit(k, std::sqrt(n * m / tt) * d);
            }
            return;
        }
        default:
            return;
    }
}

SplitMax SplitScanner::scan() const {
    const std::size_t t = x_.size();
    if (t < 2 * kMinSegment) {
        fail(ErrorCode::kInsufficientData,
             "split scan needs at least " + std::to_string(2 * kMinSegment) + " observations");
    }
    if (min_ == max_) {
        return {0.0, kMinSegment};
    }
    SplitMax best{-std::numeric_limits<double>::infinity(), kMinSegment};
    double total = 0.0;
    for_each_split([&](std::size_t k, double stat) {
        total += stat;
        if (stat > best.statistic) {
            best.statistic = stat;
            best.k_hat = k;
        }
    });
    best.mean_split = total / static_cast<double>(t - 2 * kMinSegment + 1);
    return best;
}

std::vector<double> SplitScanner::split_statistics() const {
    std::vector<double> out;
    if (x_.size() < 2 * kMinSegment) {
        return out;
    }
    out.reserve(x_.size() - 2 * kMinSegment + 1);
    if (min_ == max_) {
        out.assign(x_.size() - 2 * kMinSegment + 1, 0.0);
        return out;
    }
    for_each_split([&](std::size_t, double stat) { out.push_back(stat); });
    return out;
}

}  // namespace confdrift
