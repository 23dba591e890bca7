#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "confdrift/error.hpp"
#include "confdrift/random.hpp"
#include "confdrift/stat_tests.hpp"
#include "oracles.hpp"

using namespace confdrift;

namespace {

std::vector<double> to_double(const std::vector<int>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST(SampleTest, RejectsEmptyAndNonFinite) {
    EXPECT_THROW(Sample(std::vector<double>{}), Error);
    EXPECT_THROW(Sample({1.0, NAN}), Error);
    EXPECT_THROW(Sample({1.0, INFINITY}), Error);
    EXPECT_EQ(Sample({3.0, 1.0}).size(), 2u);
}

TEST(TestKindTest, NamesRoundTrip) {
    for (TestKind k : {TestKind::kStudentT, TestKind::kKolmogorovSmirnov, TestKind::kCramerVonMises,
                       TestKind::kMannWhitney, TestKind::kMood, TestKind::kLepage}) {
        EXPECT_EQ(parse_test_kind(to_string(k)), k);
    }
    EXPECT_EQ(parse_test_kind("ks"), TestKind::kKolmogorovSmirnov);
    EXPECT_EQ(parse_test_kind("cvm"), TestKind::kCramerVonMises);
    EXPECT_THROW(parse_test_kind("anderson"), Error);
}

TEST(TTest, IdenticalSamples) {
    const TestResult r = t_test_two_sample({1, 2, 3}, {1, 2, 3});
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_EQ(*r.p_value, 1.0);
}

TEST(TTest, DegenerateEqualMeans) {
    const TestResult r = t_test_two_sample({2, 2, 2}, {2, 2, 2});
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_EQ(*r.p_value, 1.0);
}

TEST(TTest, DegenerateUnequalMeans) {
    const TestResult r = t_test_two_sample({2, 2, 2}, {3, 3});
    EXPECT_EQ(*r.p_value, 0.0);
    EXPECT_LT(r.statistic, 0.0);
    EXPECT_TRUE(std::isfinite(r.statistic));
}

TEST(TTest, HandValue) {
    // t = (2 - 5) / sqrt(1 * (1/3 + 1/3)) = -3.6742; scipy p = 0.0213116.
    const TestResult r = t_test_two_sample({1, 2, 3}, {4, 5, 6});
    EXPECT_NEAR(r.statistic, -3.0 / std::sqrt(2.0 / 3.0), 1e-12);
    EXPECT_NEAR(r.statistic, -3.674, 0.001);
    EXPECT_NEAR(*r.p_value, 0.021311641128756727, 1e-9);
}

TEST(TTest, MatchesReferenceOnUnbalancedSamples) {
    const TestResult r = t_test_two_sample({0.1, 0.5, 0.9, 1.3, 2.2, 2.8, 3.1}, {0.4, 1.9, 2.5, 3.3, 3.9, 4.4});
    EXPECT_NEAR(r.statistic, -1.620140060623468, 1e-12);
    EXPECT_NEAR(*r.p_value, 0.13349045298654472, 1e-9);
}

TEST(TTest, TooSmall) {
    EXPECT_THROW(t_test_two_sample({1}, {1, 2}), Error);
}

TEST(KsTest, Examples) {
    const TestResult same = ks_test_two_sample({1, 2, 3}, {1, 2, 3});
    EXPECT_EQ(same.statistic, 0.0);
    EXPECT_EQ(*same.p_value, 1.0);
    EXPECT_EQ(ks_test_two_sample({1, 2, 3}, {4, 5, 6}).statistic, 1.0);
    EXPECT_EQ(ks_test_two_sample({1, 3}, {2, 4}).statistic, 0.5);
}

TEST(KsTest, MatchesReferencePValue) {
    // scipy.special.kolmogorov(sqrt(42/13) * 0.5)
    const TestResult r = ks_test_two_sample({0.1, 0.5, 0.9, 1.3, 2.2, 2.8, 3.1}, {0.4, 1.9, 2.5, 3.3, 3.9, 4.4});
    EXPECT_DOUBLE_EQ(r.statistic, 0.5);
    EXPECT_NEAR(*r.p_value, 0.39450456773366827, 1e-9);
}

TEST(KsTest, TiesHandledAtGroupEnds) {
    // ECDFs only compared after each tied group is complete.
    EXPECT_EQ(ks_statistic(std::vector<double>{1, 1, 2}, std::vector<double>{1, 2, 2}), 1.0 / 3.0);
    EXPECT_EQ(ks_statistic(std::vector<double>{5, 5}, std::vector<double>{5, 5, 5}), 0.0);
}

TEST(KolmogorovSurvival, KnownPoints) {
    EXPECT_EQ(kolmogorov_survival(0.0), 1.0);
    // scipy.special.kolmogorov at 0.5, 1.0, 1.36, 2.0
    EXPECT_NEAR(kolmogorov_survival(0.5), 0.9639452436648751, 1e-10);
    EXPECT_NEAR(kolmogorov_survival(1.0), 0.26999967167735456, 1e-10);
    EXPECT_NEAR(kolmogorov_survival(1.36), 0.049485876755377876, 1e-10);
    EXPECT_NEAR(kolmogorov_survival(2.0), 0.0006709252557796953, 1e-12);
}

TEST(CvmTest, IdenticalSamplesGiveZero) {
    EXPECT_EQ(cvm_test_two_sample({1, 2, 3, 4}, {1, 2, 3, 4}).statistic, 0.0);
}

TEST(CvmTest, SeparatedSamplesReachBruteForceMaximum) {
    // Enumerate all C(6,3) rank assignments.
    double best = 0.0;
    for (std::uint32_t mask : oracle::subsets(6, 3)) {
        std::vector<double> a, b;
        for (int i = 0; i < 6; ++i) ((mask >> i) & 1u ? a : b).push_back(i + 1.0);
        best = std::max(best, oracle::cvm_rank_form(a, b));
    }
    EXPECT_NEAR(cvm_test_two_sample({1, 2, 3}, {10, 11, 12}).statistic, best, 1e-12);
}

TEST(CvmTest, MinimumForEqualSizesIsAtIdenticalSamples) {
    double lowest = 1e9;
    for (std::uint32_t mask : oracle::subsets(8, 4)) {
        std::vector<double> a, b;
        for (int i = 0; i < 8; ++i) ((mask >> i) & 1u ? a : b).push_back(i + 1.0);
        lowest = std::min(lowest, cvm_statistic(a, b));
    }
    EXPECT_GT(lowest, 0.0);
    EXPECT_LT(cvm_statistic(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2, 3, 4}), lowest);
}

TEST(CvmTest, MatchesReference) {
    // scipy.stats.cramervonmises_2samp(method="asymptotic")
    const TestResult r = cvm_test_two_sample({0.1, 0.5, 0.9, 1.3, 2.2, 2.8, 3.1}, {0.4, 1.9, 2.5, 3.3, 3.9, 4.4});
    EXPECT_NEAR(r.statistic, 0.2564102564102564, 1e-12);
    EXPECT_NEAR(*r.p_value, 0.19184889798312044, 1e-6);
}

TEST(CvmTest, NullMomentsMatchEnumeration) {
    for (auto [n, m] : {std::pair{3u, 3u}, {3u, 5u}, {4u, 4u}, {2u, 6u}}) {
        const auto masks = oracle::subsets(n + m, n);
        double s = 0.0, s2 = 0.0;
        for (std::uint32_t mask : masks) {
            std::vector<double> a, b;
            for (unsigned i = 0; i < n + m; ++i) ((mask >> i) & 1u ? a : b).push_back(i + 1.0);
            const double t = cvm_statistic(a, b);
            s += t;
            s2 += t * t;
        }
        const double count = static_cast<double>(masks.size());
        const NullMoments mom = cvm_null_moments(n, m);
        EXPECT_NEAR(mom.mean, s / count, 1e-12) << n << "," << m;
        EXPECT_NEAR(mom.variance, s2 / count - (s / count) * (s / count), 1e-12) << n << "," << m;
    }
}

TEST(CvmLimit, CdfIsMonotoneAndBounded) {
    double prev = 0.0;
    for (double x = 0.01; x < 3.0; x += 0.05) {
        const double c = cvm_limit_cdf(x);
        EXPECT_GE(c, prev - 1e-12);
        EXPECT_LE(c, 1.0);
        prev = c;
    }
    // Classical one-sample critical point: P(W2 > 0.461) = 0.05.
    EXPECT_NEAR(1.0 - cvm_limit_cdf(0.461), 0.05, 0.001);
}

TEST(RankStats, HandValues) {
    const RankStatistics r = rank_stats_two_sample({1, 2, 3}, {4, 5, 6});
    EXPECT_NEAR(r.m_standardized, 0.0, 1e-12);
    EXPECT_NEAR(r.u_standardized, (6.0 - 10.5) / std::sqrt(5.25), 1e-12);
    EXPECT_NEAR(r.u_standardized, -1.964, 0.001);
    EXPECT_DOUBLE_EQ(r.lepage, r.u_standardized * r.u_standardized + r.m_standardized * r.m_standardized);
}

TEST(RankStats, AllTied) {
    const RankStatistics r = rank_stats_two_sample({0.5, 0.5}, {0.5, 0.5, 0.5});
    EXPECT_EQ(r.u_standardized, 0.0);
    EXPECT_EQ(r.m_standardized, 0.0);
    EXPECT_EQ(r.lepage, 0.0);
}

TEST(RankStats, MidRanks) {
    const std::vector<double> r = mid_ranks(std::vector<double>{3.0, 1.0, 3.0, 2.0});
    EXPECT_EQ(r, (std::vector<double>{3.5, 1.0, 3.5, 2.0}));
}

// Exhaustive check over every split of {1..n+m} with n, m <= 5.
TEST(Enumeration, KsAndRankStatisticsMatchOracle) {
    std::size_t cases = 0;
    for (unsigned n = 2; n <= 5; ++n) {
        for (unsigned m = 2; m <= 5; ++m) {
            for (std::uint32_t mask : oracle::subsets(n + m, n)) {
                std::vector<int> a, b;
                for (unsigned i = 0; i < n + m; ++i) ((mask >> i) & 1u ? a : b).push_back(static_cast<int>(3 * i + 1));
                const double d = ks_statistic(to_double(a), to_double(b));
                ASSERT_EQ(std::llround(d * n * m), oracle::ks_scaled(a, b));
                ASSERT_NEAR(d, static_cast<double>(oracle::ks_scaled(a, b)) / (n * m), 1e-15);

                const RankStatistics r = rank_stats_two_sample(Sample(to_double(a)), Sample(to_double(b)));
                const oracle::RankOracle o = oracle::rank_stats(to_double(a), to_double(b));
                ASSERT_NEAR(r.u_standardized, o.u, 1e-12);
                ASSERT_NEAR(r.m_standardized, o.mood, 1e-12);
                ASSERT_NEAR(cvm_statistic(to_double(a), to_double(b)), oracle::cvm_rank_form(to_double(a), to_double(b)), 1e-12);
                ++cases;
            }
        }
    }
    EXPECT_EQ(cases, 874u);  // sum of C(n+m, n) for n, m in 2..5
}

TEST(Enumeration, KsWithSingletonSamples) {
    for (unsigned n = 1; n <= 5; ++n) {
        for (std::uint32_t mask : oracle::subsets(n + 1, n)) {
            std::vector<int> a, b;
            for (unsigned i = 0; i <= n; ++i) ((mask >> i) & 1u ? a : b).push_back(static_cast<int>(i));
            ASSERT_EQ(std::llround(ks_statistic(to_double(a), to_double(b)) * n), oracle::ks_scaled(a, b));
        }
    }
}

TEST(RunTwoSample, DispatchAndPValueRange) {
    SplitMix64 rng(5);
    std::vector<double> a(40), b(35);
    for (double& v : a) v = standard_normal(rng);
    for (double& v : b) v = standard_normal(rng) + 0.3;
    for (TestKind k : {TestKind::kStudentT, TestKind::kKolmogorovSmirnov, TestKind::kCramerVonMises,
                       TestKind::kMannWhitney, TestKind::kMood, TestKind::kLepage}) {
        const TestResult r = run_two_sample_test(k, Sample(a), Sample(b));
        EXPECT_EQ(r.kind, k);
        ASSERT_TRUE(r.p_value.has_value());
        EXPECT_GE(*r.p_value, 0.0);
        EXPECT_LE(*r.p_value, 1.0);
        EXPECT_TRUE(std::isfinite(r.statistic));
    }
}

TEST(StudentT, CriticalValueInvertsTail) {
    for (double df : {4.0, 18.0, 38.0}) {
        const double c = student_t_critical(0.05, df);
        EXPECT_NEAR(student_t_two_tailed(c, df), 0.05, 1e-10);
    }
    EXPECT_NEAR(student_t_critical(0.05, 38.0), 2.024394163911969, 1e-9);
    EXPECT_THROW(student_t_critical(0.0, 4.0), Error);
}
