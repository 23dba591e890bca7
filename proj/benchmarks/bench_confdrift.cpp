#include <benchmark/benchmark.h>

#include <vector>

#include "confdrift/changepoint.hpp"
#include "confdrift/label_outliers.hpp"
#include "confdrift/random.hpp"
#include "confdrift/split_scanner.hpp"
#include "confdrift/stat_tests.hpp"

namespace {

using namespace confdrift;

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = standard_normal(rng);
    return v;
}

void BM_TwoSampleTest(benchmark::State& state, TestKind kind) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Sample a(normals(n, 1));
    const Sample b(normals(n, 2));
    for (auto _ : state) benchmark::DoNotOptimize(run_two_sample_test(kind, a, b));
}
BENCHMARK_CAPTURE(BM_TwoSampleTest, t, TestKind::kStudentT)->RangeMultiplier(10)->Range(100, 100000);
BENCHMARK_CAPTURE(BM_TwoSampleTest, ks, TestKind::kKolmogorovSmirnov)->RangeMultiplier(10)->Range(100, 100000);
BENCHMARK_CAPTURE(BM_TwoSampleTest, cvm, TestKind::kCramerVonMises)->RangeMultiplier(10)->Range(100, 100000);
BENCHMARK_CAPTURE(BM_TwoSampleTest, lepage, TestKind::kLepage)->RangeMultiplier(10)->Range(100, 100000);

// Grow a stream to length t, scanning after every observation.
void BM_ScannerStream(benchmark::State& state, TestKind kind) {
    const auto t = static_cast<std::size_t>(state.range(0));
    const std::vector<double> x = normals(t, 3);
    for (auto _ : state) {
        SplitScanner scanner(kind);
        scanner.reserve(t);
        double acc = 0.0;
        for (double v : x) {
            scanner.push(v);
            if (scanner.size() >= 2 * kMinSegment) acc += scanner.scan().statistic;
        }
        benchmark::DoNotOptimize(acc);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(t));
}
BENCHMARK_CAPTURE(BM_ScannerStream, t, TestKind::kStudentT)->Arg(200)->Arg(1000);
BENCHMARK_CAPTURE(BM_ScannerStream, ks, TestKind::kKolmogorovSmirnov)->Arg(200)->Arg(1000);
BENCHMARK_CAPTURE(BM_ScannerStream, cvm, TestKind::kCramerVonMises)->Arg(200)->Arg(1000);
BENCHMARK_CAPTURE(BM_ScannerStream, lepage, TestKind::kLepage)->Arg(200)->Arg(1000);

void BM_Calibrate(benchmark::State& state) {
    CalibrationOptions options;
    options.kind = TestKind::kCramerVonMises;
    options.alpha = 0.01;
    options.t_max = 100;
    options.replications = static_cast<std::size_t>(state.range(0));
    options.workers = 1;
    for (auto _ : state) benchmark::DoNotOptimize(calibrate_thresholds(options));
}
BENCHMARK(BM_Calibrate)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_LabelOutliers(benchmark::State& state) {
    LabelHistogram h;
    SplitMix64 rng(4);
    for (int c = 0; c < state.range(0); ++c) h.counts["c" + std::to_string(c)] = 100 + uniform_index(rng, 900);
    for (auto _ : state) benchmark::DoNotOptimize(check_label_distribution(h));
}
BENCHMARK(BM_LabelOutliers)->Arg(10)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();
