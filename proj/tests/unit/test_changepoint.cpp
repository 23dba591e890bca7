#include <gtest/gtest.h>

#include <cmath>

#include "confdrift/changepoint.hpp"
#include "confdrift/error.hpp"
#include "confdrift/random.hpp"
#include "confdrift/serialization.hpp"

using namespace confdrift;

namespace {

ThresholdTable calibrated(TestKind kind, double alpha, std::size_t t_max, std::size_t reps, std::uint64_t seed = 1) {
    CalibrationOptions o;
    o.kind = kind;
    o.alpha = alpha;
    o.t_max = t_max;
    o.replications = reps;
    o.seed = seed;
    return calibrate_thresholds(o);
}

ThresholdTable flat_table(TestKind kind, double h, std::size_t t_max = 50) {
    ThresholdTable t;
    t.test_kind = kind;
    t.alpha = 0.05;
    t.t_max = t_max;
    t.thresholds.assign(t_max - kDefaultBurnIn + 1, h);
    t.calibration_replications = 1000;
    return t;
}

}  // namespace

TEST(Calibration, Deterministic) {
    const ThresholdTable a = calibrated(TestKind::kCramerVonMises, 0.01, 60, 2000, 9);
    const ThresholdTable b = calibrated(TestKind::kCramerVonMises, 0.01, 60, 2000, 9);
    EXPECT_EQ(a, b);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
    CalibrationOptions o;
    o.kind = TestKind::kCramerVonMises;
    o.alpha = 0.01;
    o.t_max = 60;
    o.replications = 2000;
    o.seed = 9;
    o.workers = 1;
    EXPECT_EQ(calibrate_thresholds(o), a);
    o.workers = 3;
    EXPECT_EQ(calibrate_thresholds(o), a);
}

TEST(Calibration, Preconditions) {
    EXPECT_THROW(calibrated(TestKind::kCramerVonMises, 0.05, 10, 1000), Error);
    EXPECT_THROW(calibrated(TestKind::kCramerVonMises, 0.0, 50, 1000), Error);
    EXPECT_THROW(calibrated(TestKind::kMood, 0.05, 50, 1000), Error);
    // alpha * replications < 1 leaves no exceedance to place a quantile.
    EXPECT_THROW(calibrated(TestKind::kCramerVonMises, 1e-5, 50, 1000), Error);
}

TEST(Calibration, TableShapeAndMethod) {
    const ThresholdTable small = calibrated(TestKind::kLepage, 0.002, 80, 3000);
    EXPECT_EQ(small.thresholds.size(), 80u - kDefaultBurnIn + 1);
    EXPECT_EQ(small.method, CalibrationMethod::kRemoval);
    const ThresholdTable big = calibrated(TestKind::kLepage, 0.05, 80, 3000);
    EXPECT_EQ(big.method, CalibrationMethod::kResampling);
    for (double h : big.thresholds) EXPECT_GT(h, 0.0);
    EXPECT_NO_THROW(big.validate());
}

TEST(ThresholdTable, LookupAndReuseBeyondTmax) {
    ThresholdTable t = flat_table(TestKind::kCramerVonMises, 1.0, 20);
    for (std::size_t i = 0; i < t.thresholds.size(); ++i) t.thresholds[i] = 1.0 + static_cast<double>(i);
    EXPECT_EQ(t.threshold_at(10), 1.0);
    EXPECT_EQ(t.threshold_at(20), 11.0);
    EXPECT_EQ(t.threshold_at(500), 11.0);
    EXPECT_THROW(t.threshold_at(9), Error);
    t.thresholds.pop_back();
    EXPECT_THROW(t.validate(), Error);
}

TEST(Detector, ConstantStreamNeverDetects) {
    for (TestKind k : {TestKind::kStudentT, TestKind::kKolmogorovSmirnov, TestKind::kCramerVonMises, TestKind::kLepage}) {
        DetectorState d(flat_table(k, 1e-3, 50));
        for (int i = 0; i < 500; ++i) ASSERT_FALSE(d.push(0.5).has_value());
        EXPECT_EQ(d.status(), DetectorStatus::kMonitoring);
        EXPECT_EQ(d.t(), 500u);
    }
}

TEST(Detector, SingleShotAndInputChecks) {
    DetectorState d(flat_table(TestKind::kStudentT, 6.0, 50));
    EXPECT_THROW(d.push(NAN), Error);
    std::optional<Detection> hit;
    for (int i = 0; i < 20 && !hit; ++i) hit = d.push(0.0);
    for (int i = 0; i < 40 && !hit; ++i) hit = d.push(10.0);
    ASSERT_TRUE(hit.has_value());
    EXPECT_EQ(d.status(), DetectorStatus::kChangeDetected);
    EXPECT_EQ(hit->t_detect, 22u);
    EXPECT_EQ(hit->k_hat, 20u);
    EXPECT_THROW(d.push(1.0), Error);
    EXPECT_EQ(d.detection()->t_detect, hit->t_detect);
}

TEST(Detector, NullStudentTFollowsProductLaw) {
    const ThresholdTable table = calibrated(TestKind::kStudentT, 0.05, 100, 10000, 3);
    int detected = 0;
    const int runs = 1000;
    for (int r = 0; r < runs; ++r) {
        SplitMix64 rng(derive_seed(1234, {static_cast<std::uint64_t>(r)}));
        DetectorState d(table);
        for (int t = 1; t <= 100; ++t) {
            if (d.push(standard_normal(rng))) {
                ++detected;
                break;
            }
        }
    }
    const double expected = 1.0 - std::pow(0.95, 100 - kDefaultBurnIn);
    EXPECT_NEAR(static_cast<double>(detected) / runs, expected, 0.05);
}

TEST(Detector, LargeShiftDetectedQuickly) {
    // At alpha = 0.05 per step almost every run alarms within 90 null
    // observations, so the shift check uses a small per-step alpha.
    const ThresholdTable table = calibrated(TestKind::kCramerVonMises, 2e-4, 120, 10000, 4);
    int good = 0;
    for (int r = 0; r < 300; ++r) {
        SplitMix64 rng(derive_seed(99, {static_cast<std::uint64_t>(r)}));
        DetectorState d(table);
        std::optional<Detection> hit;
        for (int t = 0; t < 100 && !hit; ++t) hit = d.push(standard_normal(rng));
        for (int t = 0; t < 100 && !hit; ++t) hit = d.push(5.0 + standard_normal(rng));
        good += (hit && hit->t_detect > 100 && hit->t_detect <= 115 && hit->k_hat >= 90 && hit->k_hat <= 110) ? 1 : 0;
    }
    EXPECT_GE(good, 285);
}

TEST(NullRates, ConditionalRateNearAlpha) {
    const ThresholdTable table = calibrated(TestKind::kLepage, 0.05, 60, 8000, 5);
    const NullRateProfile p = estimate_null_rates(table, 4000, 77);
    ASSERT_EQ(p.conditional_rate.size(), table.thresholds.size());
    for (double r : p.conditional_rate) {
        EXPECT_GT(r, 0.03);
        EXPECT_LT(r, 0.07);
    }
    EXPECT_EQ(p.cumulative_before.front(), 0.0);
}

TEST(DetectionScore, TieBreakIsTiny) {
    const SplitMax s{2.0, 5, 1.0};
    EXPECT_DOUBLE_EQ(detection_score(s), 2.0 + kTieBreakWeight);
}
