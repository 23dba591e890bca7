#include <gtest/gtest.h>

#include <cmath>

#include "confdrift/changepoint.hpp"
#include "confdrift/error.hpp"
#include "confdrift/random.hpp"
#include "confdrift/split_scanner.hpp"
#include "oracles.hpp"

using namespace confdrift;

namespace {

// Standardized statistic for one split, recomputed from scratch.
double brute_split(TestKind kind, const std::vector<double>& x, std::size_t k) {
    const std::vector<double> a(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(k));
    const std::vector<double> b(x.begin() + static_cast<std::ptrdiff_t>(k), x.end());
    const double n = static_cast<double>(a.size());
    const double m = static_cast<double>(b.size());
    switch (kind) {
        case TestKind::kStudentT:
            return std::abs(t_test_two_sample(Sample(a), Sample(b)).statistic);
        case TestKind::kKolmogorovSmirnov:
            return std::sqrt(n * m / (n + m)) * ks_statistic(a, b);
        case TestKind::kCramerVonMises: {
            const NullMoments mom = cvm_null_moments(a.size(), b.size());
            return (cvm_statistic(a, b) - mom.mean) / std::sqrt(mom.variance);
        }
        case TestKind::kLepage:
            return rank_stats_two_sample(Sample(a), Sample(b)).lepage;
        default:
            return NAN;
    }
}

std::vector<double> draw(std::uint64_t seed, std::size_t n, bool rounded) {
    SplitMix64 rng(seed);
    std::vector<double> x(n);
    for (double& v : x) {
        v = standard_normal(rng);
        if (rounded) v = std::round(v * 2.0) / 2.0;  // forces ties
    }
    return x;
}

class ScannerOracle : public ::testing::TestWithParam<std::tuple<TestKind, bool>> {};

}  // namespace

TEST_P(ScannerOracle, EverySplitMatchesBruteForce) {
    const auto [kind, rounded] = GetParam();
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const std::vector<double> x = draw(seed, 37, rounded);
        SplitScanner scanner(kind);
        for (std::size_t t = 0; t < x.size(); ++t) {
            scanner.push(x[t]);
            if (t + 1 < 2 * kMinSegment) continue;
            const std::vector<double> prefix(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(t + 1));
            const std::vector<double> stats = scanner.split_statistics();
            ASSERT_EQ(stats.size(), prefix.size() - 2 * kMinSegment + 1);
            double best = -INFINITY;
            for (std::size_t k = kMinSegment; k + kMinSegment <= prefix.size(); ++k) {
                const double expect = brute_split(kind, prefix, k);
                ASSERT_NEAR(stats[k - kMinSegment], expect, 1e-9 * std::max(1.0, std::abs(expect)))
                    << "seed " << seed << " t " << t + 1 << " k " << k;
                best = std::max(best, expect);
            }
            const SplitMax sm = scanner.scan();
            ASSERT_NEAR(sm.statistic, best, 1e-9 * std::max(1.0, best));
            ASSERT_NEAR(brute_split(kind, prefix, sm.k_hat), best, 1e-9 * std::max(1.0, best));
        }
    }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, ScannerOracle,
                         ::testing::Combine(::testing::Values(TestKind::kStudentT, TestKind::kKolmogorovSmirnov,
                                                              TestKind::kCramerVonMises, TestKind::kLepage),
                                            ::testing::Bool()));

TEST(SplitScanner, RejectsUnsupportedKindAndNonFinite) {
    EXPECT_THROW(SplitScanner(TestKind::kMood), Error);
    SplitScanner s(TestKind::kCramerVonMises);
    EXPECT_THROW(s.push(NAN), Error);
}

TEST(SplitScanner, ExactTiesPickSmallestSplit) {
    // Symmetric stream: splits 2 and 4 give the same T statistic.
    SplitScanner s(TestKind::kStudentT);
    for (double v : {0.0, 0.0, 1.0, 1.0, 0.0, 0.0}) s.push(v);
    const std::vector<double> stats = s.split_statistics();
    ASSERT_EQ(stats.size(), 3u);
    EXPECT_DOUBLE_EQ(stats[0], stats[2]);
    EXPECT_EQ(s.scan().k_hat, 2u);
}

TEST(SplitScanner, TooFewObservations) {
    SplitScanner s(TestKind::kStudentT);
    s.push(1.0);
    s.push(2.0);
    s.push(3.0);
    EXPECT_THROW(s.scan(), Error);
}

TEST(SplitScanner, MeanSplitIsAverage) {
    const std::vector<double> x = draw(11, 25, false);
    SplitScanner s(TestKind::kLepage);
    for (double v : x) s.push(v);
    const std::vector<double> stats = s.split_statistics();
    double total = 0.0;
    for (double v : stats) total += v;
    EXPECT_NEAR(s.scan().mean_split, total / static_cast<double>(stats.size()), 1e-12);
}

TEST(MaxSplit, ConstantStream) {
    const std::vector<double> x(50, 0.5);
    for (TestKind k : {TestKind::kStudentT, TestKind::kKolmogorovSmirnov, TestKind::kCramerVonMises, TestKind::kLepage}) {
        const SplitMax r = max_split_statistic(x, k);
        EXPECT_EQ(r.statistic, 0.0);
        EXPECT_EQ(r.k_hat, 2u);
    }
}

TEST(MaxSplit, ExactStepLocatesTrueSplit) {
    std::vector<double> x(25, 0.0);
    x.resize(50, 1.0);
    EXPECT_EQ(max_split_statistic(x, TestKind::kStudentT).k_hat, 25u);
    // The noise-free step is found by every kind.
    for (TestKind k : {TestKind::kKolmogorovSmirnov, TestKind::kCramerVonMises, TestKind::kLepage}) {
        EXPECT_EQ(max_split_statistic(x, k).k_hat, 25u) << to_string(k);
    }
}

TEST(MaxSplit, NoisyMeanShiftIsLocalized) {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        SplitMix64 rng(derive_seed(77, {seed}));
        std::vector<double> x;
        for (int i = 0; i < 30; ++i) x.push_back(standard_normal(rng));
        for (int i = 0; i < 30; ++i) x.push_back(3.0 + standard_normal(rng));
        const std::size_t k = max_split_statistic(x, TestKind::kStudentT).k_hat;
        hits += (k >= 25 && k <= 35) ? 1 : 0;
    }
    EXPECT_GE(hits, 950);
}
