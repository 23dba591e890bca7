#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "confdrift/error.hpp"
#include "confdrift/simlab.hpp"

using namespace confdrift;

namespace {

MixtureSpec two_blobs(std::size_t per_class, double separation, std::uint64_t seed) {
    MixtureSpec m;
    m.num_classes = 2;
    m.dimension = 2;
    m.class_means = {{0.0, 0.0}, {separation, separation}};
    m.class_sigmas = {1.0, 1.0};
    m.records_per_class = per_class;
    m.seed = seed;
    return m;
}

}  // namespace

TEST(Dataset, GeneratesBalancedClasses) {
    const LabeledDataset d = generate_dataset(two_blobs(1000, 10.0, 1));
    EXPECT_EQ(d.size(), 2000u);
    EXPECT_EQ(d.label_counts(), (std::map<std::size_t, std::size_t>{{0, 1000}, {1, 1000}}));
    EXPECT_NO_THROW(d.validate());
}

TEST(Dataset, SameSeedSameData) {
    const LabeledDataset a = generate_dataset(two_blobs(200, 10.0, 7));
    const LabeledDataset b = generate_dataset(two_blobs(200, 10.0, 7));
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_NE(a.features, generate_dataset(two_blobs(200, 10.0, 8)).features);
}

TEST(Dataset, EnvelopeBoundsEveryValue) {
    const LabeledDataset d = generate_dataset(ring_mixture(4, 6.0, 1.0, 300, 3));
    for (const FeatureVector& x : d.features) {
        for (std::size_t j = 0; j < x.size(); ++j) {
            EXPECT_LE(d.envelope_min[j], x[j]);
            EXPECT_GE(d.envelope_max[j], x[j]);
        }
    }
}

TEST(Dataset, RingLayout) {
    const MixtureSpec m = ring_mixture(4, 6.0, 1.0, 10, 1);
    ASSERT_EQ(m.num_classes, 5u);
    EXPECT_EQ(m.class_means[0], (FeatureVector{0.0, 0.0}));
    EXPECT_EQ(m.class_means[1], (FeatureVector{6.0, 0.0}));
    EXPECT_EQ(m.class_means[2], (FeatureVector{0.0, 6.0}));
}

TEST(Dataset, InvalidSpecs) {
    MixtureSpec m = two_blobs(10, 1.0, 1);
    m.class_sigmas = {1.0};
    EXPECT_THROW(m.validate(), Error);
    m = two_blobs(10, 1.0, 1);
    m.class_means[1] = {1.0};
    EXPECT_THROW(m.validate(), Error);
}

TEST(Model, SeparatedDataIsLearned) {
    const LabeledDataset d = generate_dataset(two_blobs(500, 10.0, 2));
    const SoftmaxModel model = train_classifier(d, {});
    EXPECT_GE(model.training_accuracy, 0.99);
    const ConfidenceRecord at_mean = model.predict(FeatureVector{10.0, 10.0});
    EXPECT_EQ(at_mean.label, "1");
    EXPECT_GT(at_mean.confidence, 0.99);
}

TEST(Model, LabelNoiseLowersAccuracy) {
    int lower = 0;
    for (std::uint64_t seed = 1; seed <= 9; ++seed) {
        const LabeledDataset d = generate_dataset(ring_mixture(4, 3.0, 1.0, 200, seed));
        TrainingOptions clean_opts;
        clean_opts.seed = seed;
        TrainingOptions noisy_opts = clean_opts;
        noisy_opts.noise_level = 0.3;
        const SoftmaxModel clean = train_classifier(d, clean_opts);
        const SoftmaxModel noisy = train_classifier(d, noisy_opts);
        // Score both on the true labels.
        auto accuracy = [&](const SoftmaxModel& m) {
            std::size_t hit = 0;
            for (std::size_t i = 0; i < d.size(); ++i) {
                hit += m.predict(d.features[i]).label == std::to_string(d.labels[i]) ? 1 : 0;
            }
            return static_cast<double>(hit) / static_cast<double>(d.size());
        };
        lower += accuracy(noisy) < accuracy(clean) ? 1 : 0;
        EXPECT_LT(noisy.training_accuracy, clean.training_accuracy);
    }
    EXPECT_GE(lower, 5);
}

TEST(Model, GradientMatchesFiniteDifferences) {
    SoftmaxModel model({0, 1, 2}, 2);
    const std::vector<double> w{0.3, -0.2, 0.1, 0.4, -0.5, 0.25};
    model.weights() = w;
    model.biases() = {0.1, -0.1, 0.05};
    const std::vector<FeatureVector> x{{1.0, 2.0}, {-1.0, 0.5}, {0.3, -0.7}, {2.0, 1.0}, {0.0, 0.0}};
    const std::vector<std::size_t> y{0, 1, 2, 1, 0};
    const LossGradient g = softmax_loss_gradient(model, x, y);
    const double h = 1e-6;
    for (std::size_t i = 0; i < w.size(); ++i) {
        SoftmaxModel plus = model, minus = model;
        plus.weights()[i] += h;
        minus.weights()[i] -= h;
        const double numeric = (softmax_loss_gradient(plus, x, y).loss - softmax_loss_gradient(minus, x, y).loss) / (2 * h);
        EXPECT_NEAR(g.weights[i], numeric, 1e-5 * std::max(1.0, std::abs(numeric)));
    }
    for (std::size_t k = 0; k < 3; ++k) {
        SoftmaxModel plus = model, minus = model;
        plus.biases()[k] += h;
        minus.biases()[k] -= h;
        const double numeric = (softmax_loss_gradient(plus, x, y).loss - softmax_loss_gradient(minus, x, y).loss) / (2 * h);
        EXPECT_NEAR(g.biases[k], numeric, 1e-5 * std::max(1.0, std::abs(numeric)));
    }
}

TEST(Model, ZeroWeightsGiveUniformProbabilities) {
    const SoftmaxModel model({0, 1, 2, 3}, 3);
    const ConfidenceRecord r = model.predict(FeatureVector{1.0, -2.0, 0.5});
    EXPECT_DOUBLE_EQ(r.confidence, 0.25);
    EXPECT_EQ(r.label, "0");  // smallest class wins exact ties
}

TEST(Model, ProbabilitiesSumToOne) {
    SoftmaxModel model({0, 1, 2}, 2);
    model.weights() = {3.0, -1.0, 0.5, 2.0, -4.0, 1.0};
    model.biases() = {0.0, 1.0, -1.0};
    const std::vector<double> p = model.predict_proba(FeatureVector{0.7, -0.3});
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    EXPECT_THROW(model.predict_proba(FeatureVector{1.0}), Error);
}

TEST(Model, NoisyLabelsChangeRequestedShare) {
    std::vector<std::size_t> labels(1000);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 4;
    const std::vector<std::size_t> classes{0, 1, 2, 3};
    const std::vector<std::size_t> noisy = noisy_labels(labels, classes, 0.3, 5);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) changed += noisy[i] != labels[i] ? 1 : 0;
    EXPECT_NEAR(static_cast<double>(changed) / 1000.0, 0.3, 0.05);
}

TEST(DriftPool, HeldOutClassSize) {
    const LabeledDataset full = generate_dataset(ring_mixture(4, 6.0, 1.0, 250, 1));
    DriftSpec spec;
    spec.kind = DriftKind::kHeldOutClass;
    spec.held_out_classes = {0};
    const LabeledDataset training = exclude_drift_records(full, spec);
    EXPECT_EQ(training.size(), 1000u);
    EXPECT_EQ(make_drift_pool(spec, full, training).size(), 250u);
}

TEST(DriftPool, SelectionCriteriaTopDecile) {
    const LabeledDataset full = generate_dataset(two_blobs(500, 3.0, 4));
    DriftSpec spec;
    spec.kind = DriftKind::kSelectionCriteria;
    spec.feature = 0;
    spec.quantile = 0.9;
    const LabeledDataset training = exclude_drift_records(full, spec);
    const std::size_t pool = make_drift_pool(spec, full, training).size();
    EXPECT_NEAR(static_cast<double>(pool), 100.0, 1.0);
    EXPECT_EQ(training.size() + pool, 1000u);
}

TEST(DriftPool, RandomLegalStaysInEnvelope) {
    const LabeledDataset full = generate_dataset(ring_mixture(4, 6.0, 1.0, 100, 2));
    DriftSpec spec;
    spec.kind = DriftKind::kRandomLegal;
    spec.pool_size = 300;
    const auto pool = make_drift_pool(spec, full, full);
    EXPECT_EQ(pool.size(), 300u);
    for (const FeatureVector& x : pool) {
        for (std::size_t j = 0; j < x.size(); ++j) {
            EXPECT_GE(x[j], full.envelope_min[j]);
            EXPECT_LE(x[j], full.envelope_max[j]);
        }
    }
}

TEST(DriftPool, FeatureFunctionScalesOneFeature) {
    const LabeledDataset full = generate_dataset(two_blobs(10, 3.0, 5));
    DriftSpec spec;
    spec.kind = DriftKind::kFeatureFunction;
    spec.feature = 1;
    spec.multiplier = 3.0;
    const auto pool = make_drift_pool(spec, full, full);
    ASSERT_EQ(pool.size(), full.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        EXPECT_EQ(pool[i][0], full.features[i][0]);
        EXPECT_DOUBLE_EQ(pool[i][1], 3.0 * full.features[i][1]);
    }
}

TEST(DriftPool, OutOfDomainNeedsAlternative) {
    DriftSpec spec;
    spec.kind = DriftKind::kOutOfDomain;
    EXPECT_THROW(spec.validate(2), Error);
    spec.alternative = two_blobs(50, 0.0, 1);
    const LabeledDataset full = generate_dataset(two_blobs(10, 3.0, 5));
    EXPECT_EQ(make_drift_pool(spec, full, full).size(), 100u);
}

TEST(DriftKindNames, RoundTrip) {
    for (int k = 1; k <= 5; ++k) {
        const auto kind = static_cast<DriftKind>(k);
        EXPECT_EQ(parse_drift_kind(to_string(kind)), kind);
        EXPECT_EQ(parse_drift_kind(std::to_string(k)), kind);
    }
    EXPECT_THROW(parse_drift_kind("6"), Error);
}

TEST(Apportion, LargestRemainder) {
    const std::vector<double> w{1.0, 1.0, 1.0};
    EXPECT_EQ(apportion(w, 10), (std::vector<std::size_t>{4, 3, 3}));
    const std::vector<double> split{0.85, 0.15};
    EXPECT_EQ(apportion(split, 1000), (std::vector<std::size_t>{850, 150}));
}

TEST(Batch, Composition) {
    const LabeledDataset clean = generate_dataset(ring_mixture(2, 6.0, 1.0, 300, 9));
    const std::vector<FeatureVector> pool(40, FeatureVector{99.0, 99.0});

    const Batch none = compose_batch(clean, pool, {0.0, 300, 1});
    EXPECT_EQ(std::count(none.is_drift.begin(), none.is_drift.end(), 1), 0);
    EXPECT_EQ(none.features.size(), 300u);
    // Equal class sizes in the clean data give exactly 100 per class.
    std::map<double, int> by_x;
    for (const FeatureVector& x : none.features) {
        for (std::size_t i = 0; i < clean.size(); ++i) {
            if (clean.features[i] == x) {
                ++by_x[static_cast<double>(clean.labels[i])];
                break;
            }
        }
    }
    for (const auto& [label, count] : by_x) EXPECT_EQ(count, 100) << label;

    const Batch some = compose_batch(clean, pool, {0.15, 1000, 2});
    EXPECT_EQ(std::count(some.is_drift.begin(), some.is_drift.end(), 1), 150);

    const Batch all = compose_batch(clean, pool, {1.0, 200, 3});
    EXPECT_EQ(std::count(all.is_drift.begin(), all.is_drift.end(), 1), 200);
    EXPECT_THROW(compose_batch(clean, pool, {1.5, 200, 3}), Error);
}

TEST(Search, MinimalFractionRule) {
    const std::vector<double> grid{0.01, 0.02, 0.03};
    EXPECT_EQ(minimal_fraction(grid, std::vector<double>{0.1, 0.5, 1.0}, 50), 0.02);
    EXPECT_EQ(minimal_fraction(grid, std::vector<double>{0.1, 0.48, 0.2}, 50), std::nullopt);
    EXPECT_EQ(minimal_fraction(grid, std::vector<double>{0.6, 0.2, 0.9}, 50), 0.01);
}

TEST(Search, HeldOutClassFoundAndNullIsNot) {
    SimulationConfig config = default_simulation(3);
    config.search.grid = {0.02, 0.05, 0.10, 0.20};
    const SimulationReport drift = run_simulation(config);
    ASSERT_TRUE(drift.search.all_minimal.has_value());
    EXPECT_LE(*drift.search.all_minimal, 0.10);
    const std::size_t g = static_cast<std::size_t>(
        std::find(drift.search.grid.begin(), drift.search.grid.end(), *drift.search.all_minimal) - drift.search.grid.begin());
    EXPECT_GE(drift.search.all_rates[g], 0.5);

    config.null_drift = true;
    const SimulationReport null = run_simulation(config);
    EXPECT_FALSE(null.search.all_minimal.has_value());
}

TEST(Search, RejectsTooFewIterations) {
    SimulationConfig config = default_simulation(1);
    config.search.iterations = 49;
    EXPECT_THROW(run_simulation(config), Error);
}

TEST(Search, HeatmapCsvShape) {
    SimulationConfig config = default_simulation(2);
    config.search.grid = {0.05, 0.1};
    const SimulationReport r = run_simulation(config);
    std::ostringstream csv;
    write_heatmap_csv(csv, r.search);
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "auditor,0.05,0.1");
    std::getline(in, line);
    EXPECT_EQ(line.rfind("ALL,", 0), 0u);
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 4u);  // outer classes 1..4; class 0 is held out
}
