#include "confdrift/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <set>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "confdrift/error.hpp"
#include "confdrift/label_outliers.hpp"
#include "confdrift/parallel.hpp"
#include "confdrift/random.hpp"

namespace confdrift {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Sub-seed roles inside run_simulation.
enum SeedRole : std::uint64_t {
    kTrainingData = 10,
    kBaselineData = 11,
    kProductionData = 12,
    kDriftPool = 13,
    kLabelNoise = 14,
    kSearch = 15,
};

void softmax_in_place(std::span<double> z) {
    const double peak = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - peak);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

std::vector<std::size_t> draw_indices(std::size_t available, std::size_t wanted, SplitMix64& rng) {
    std::vector<std::size_t> picked;
    picked.reserve(wanted);
    if (wanted <= available) {
        std::vector<std::size_t> all(available);
        std::iota(all.begin(), all.end(), 0);
        for (std::size_t i = 0; i < wanted; ++i) {
            std::swap(all[i], all[i + uniform_index(rng, available - i)]);
            picked.push_back(all[i]);
        }
    } else {
        for (std::size_t i = 0; i < wanted; ++i) picked.push_back(uniform_index(rng, available));
    }
    return picked;
}

LabeledDataset subset(const LabeledDataset& data, const std::vector<char>& keep) {
    LabeledDataset out;
    out.num_classes = data.num_classes;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!keep[i]) continue;
        out.features.push_back(data.features[i]);
        out.labels.push_back(data.labels[i]);
    }
    out.envelope_min = data.envelope_min;
    out.envelope_max = data.envelope_max;
    out.refresh_envelope();
    return out;
}

std::string label_name(std::size_t cls) { return std::to_string(cls); }

}  // namespace

void MixtureSpec::validate() const {
    require(num_classes >= 2, ErrorCode::kInvalidArgument, "mixture needs at least 2 classes");
    require(dimension >= 1, ErrorCode::kInvalidArgument, "mixture dimension must be positive");
    require(class_means.size() == num_classes && class_sigmas.size() == num_classes,
            ErrorCode::kInvalidArgument, "one mean and one sigma per class required");
    for (const FeatureVector& mean : class_means) {
        require(mean.size() == dimension, ErrorCode::kDimensionMismatch,
                "class mean dimension differs from the mixture dimension");
        for (double v : mean) {
            require(std::isfinite(v), ErrorCode::kInvalidArgument, "class means must be finite");
        }
    }
    for (double s : class_sigmas) {
        require(s > 0.0 && std::isfinite(s), ErrorCode::kInvalidArgument, "sigmas must be positive");
    }
    require(records_per_class >= 1, ErrorCode::kInvalidArgument, "records_per_class must be positive");
}

MixtureSpec ring_mixture(std::size_t outer_classes, double radius, double sigma,
                         std::size_t records_per_class, std::uint64_t seed) {
    MixtureSpec spec;
    spec.num_classes = outer_classes + 1;
    spec.dimension = 2;
    spec.class_means.push_back({0.0, 0.0});
    for (std::size_t j = 0; j < outer_classes; ++j) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(j) /
                             static_cast<double>(outer_classes);
        double x = radius * std::cos(angle);
        double y = radius * std::sin(angle);
        // Snap rounding residue so axis-aligned classes sit exactly on the axes.
        if (std::abs(x) < 1e-12 * radius) x = 0.0;
        if (std::abs(y) < 1e-12 * radius) y = 0.0;
        spec.class_means.push_back({x, y});
    }
    spec.class_sigmas.assign(spec.num_classes, sigma);
    spec.records_per_class = records_per_class;
    spec.seed = seed;
    spec.validate();
    return spec;
}

std::map<std::size_t, std::size_t> LabeledDataset::label_counts() const {
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t label : labels) ++counts[label];
    return counts;
}

void LabeledDataset::refresh_envelope() {
    if (features.empty()) return;
    const std::size_t d = features.front().size();
    envelope_min.assign(d, std::numeric_limits<double>::infinity());
    envelope_max.assign(d, -std::numeric_limits<double>::infinity());
    for (const FeatureVector& x : features) {
        for (std::size_t j = 0; j < d; ++j) {
            envelope_min[j] = std::min(envelope_min[j], x[j]);
            envelope_max[j] = std::max(envelope_max[j], x[j]);
        }
    }
}

void LabeledDataset::validate() const {
    require(features.size() == labels.size(), ErrorCode::kDimensionMismatch,
            "features and labels differ in length");
    require(envelope_min.size() == envelope_max.size(), ErrorCode::kDimensionMismatch,
            "envelope bounds differ in dimension");
    for (std::size_t i = 0; i < features.size(); ++i) {
        require(labels[i] < num_classes, ErrorCode::kInvalidArgument, "label out of range");
        require(features[i].size() == envelope_min.size(), ErrorCode::kDimensionMismatch,
                "feature vector dimension differs from the envelope");
        for (std::size_t j = 0; j < features[i].size(); ++j) {
            require(features[i][j] >= envelope_min[j] && features[i][j] <= envelope_max[j],
                    ErrorCode::kInvalidArgument, "feature outside the envelope");
        }
    }
}

LabeledDataset generate_dataset(const MixtureSpec& spec) {
    spec.validate();
    LabeledDataset data;
    data.num_classes = spec.num_classes;
    data.features.reserve(spec.num_classes * spec.records_per_class);
    data.labels.reserve(spec.num_classes * spec.records_per_class);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        SplitMix64 rng(derive_seed(spec.seed, {c}));
        for (std::size_t i = 0; i < spec.records_per_class; ++i) {
            FeatureVector x(spec.dimension);
            for (std::size_t j = 0; j < spec.dimension; ++j) {
                x[j] = spec.class_means[c][j] + spec.class_sigmas[c] * standard_normal(rng);
            }
            data.features.push_back(std::move(x));
            data.labels.push_back(c);
        }
    }
    data.refresh_envelope();
    return data;
}

LabeledDataset without_classes(const LabeledDataset& data, std::span<const std::size_t> classes) {
    std::vector<char> keep(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        keep[i] = std::find(classes.begin(), classes.end(), data.labels[i]) == classes.end();
    }
    return subset(data, keep);
}

SoftmaxModel::SoftmaxModel(std::vector<std::size_t> classes, std::size_t dimension)
    : classes_(std::move(classes)),
      dimension_(dimension),
      weights_(classes_.size() * dimension, 0.0),
      biases_(classes_.size(), 0.0) {
    require(classes_.size() >= 2, ErrorCode::kInvalidArgument, "a classifier needs at least 2 classes");
    require(dimension_ >= 1, ErrorCode::kInvalidArgument, "dimension must be positive");
    require(std::is_sorted(classes_.begin(), classes_.end()) &&
                std::adjacent_find(classes_.begin(), classes_.end()) == classes_.end(),
            ErrorCode::kInvalidArgument, "class ids must be sorted and distinct");
}

std::vector<double> SoftmaxModel::predict_proba(std::span<const double> x) const {
    if (x.size() != dimension_) {
        fail(ErrorCode::kDimensionMismatch, "expected " + std::to_string(dimension_) +
                                                " features, got " + std::to_string(x.size()));
    }
    std::vector<double> z(classes_.size());
    for (std::size_t k = 0; k < classes_.size(); ++k) {
        double v = biases_[k];
        for (std::size_t j = 0; j < dimension_; ++j) v += weights_[k * dimension_ + j] * x[j];
        z[k] = v;
    }
    softmax_in_place(z);
    return z;
}

ConfidenceRecord SoftmaxModel::predict(std::span<const double> x, std::string id) const {
    const std::vector<double> p = predict_proba(x);
    const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    ConfidenceRecord record;
    record.id = std::move(id);
    record.label = label_name(classes_[best]);
    record.confidence = p[best];
    return record;
}

LossGradient softmax_loss_gradient(const SoftmaxModel& model, std::span<const FeatureVector> features,
                                   std::span<const std::size_t> labels) {
    require(features.size() == labels.size() && !features.empty(), ErrorCode::kDimensionMismatch,
            "features and labels must be non-empty and of equal length");
    const std::size_t n = features.size();
    const std::size_t d = model.dimension();
    const std::size_t k = model.num_outputs();
    const auto& classes = model.classes();

    RowMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    RowMatrix y = RowMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < n; ++i) {
        require(features[i].size() == d, ErrorCode::kDimensionMismatch, "feature dimension mismatch");
        for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = features[i][j];
        const auto it = std::lower_bound(classes.begin(), classes.end(), labels[i]);
        require(it != classes.end() && *it == labels[i], ErrorCode::kInvalidArgument,
                "label not among the model classes");
        y(static_cast<Eigen::Index>(i), it - classes.begin()) = 1.0;
    }
    const Eigen::Map<const RowMatrix> w(model.weights().data(), static_cast<Eigen::Index>(k),
                                        static_cast<Eigen::Index>(d));
    const Eigen::Map<const Eigen::RowVectorXd> b(model.biases().data(), static_cast<Eigen::Index>(k));

    RowMatrix z = x * w.transpose();
    z.rowwise() += b;
    const Eigen::VectorXd peak = z.rowwise().maxCoeff();
    z.colwise() -= peak;
    const Eigen::VectorXd log_norm = z.array().exp().rowwise().sum().log();
    RowMatrix p = (z.colwise() - log_norm).array().exp();

    LossGradient out;
    out.loss = -((z.colwise() - log_norm).array() * y.array()).sum() / static_cast<double>(n);
    const RowMatrix residual = (p - y) / static_cast<double>(n);
    const RowMatrix gw = residual.transpose() * x;
    const Eigen::RowVectorXd gb = residual.colwise().sum();
    out.weights.assign(gw.data(), gw.data() + gw.size());
    out.biases.assign(gb.data(), gb.data() + gb.size());
    return out;
}

std::vector<std::size_t> noisy_labels(std::span<const std::size_t> labels,
                                      std::span<const std::size_t> classes, double noise_level,
                                      std::uint64_t seed) {
    require(noise_level >= 0.0 && noise_level <= 1.0, ErrorCode::kInvalidArgument,
            "noise_level must lie in [0, 1]");
    std::vector<std::size_t> out(labels.begin(), labels.end());
    if (noise_level == 0.0 || classes.size() < 2) return out;
    SplitMix64 rng(seed);
    for (std::size_t& label : out) {
        if (rng.uniform() >= noise_level) continue;
        // Index among the other K - 1 classes, skipping the true one.
        const auto self = static_cast<std::size_t>(std::find(classes.begin(), classes.end(), label) -
                                                   classes.begin());
        std::size_t pick = uniform_index(rng, classes.size() - 1);
        if (pick >= self) ++pick;
        label = classes[pick];
    }
    return out;
}

SoftmaxModel train_classifier(const LabeledDataset& data, const TrainingOptions& options) {
    require(options.epochs >= 1, ErrorCode::kInvalidArgument, "epochs must be positive");
    require(options.learning_rate > 0.0, ErrorCode::kInvalidArgument, "learning rate must be positive");
    std::vector<std::size_t> classes;
    for (const auto& [cls, count] : data.label_counts()) classes.push_back(cls);
    if (classes.size() < 2) {
        fail(ErrorCode::kInsufficientData, "training data must contain at least 2 classes");
    }
    const std::vector<std::size_t> labels =
        noisy_labels(data.labels, classes, options.noise_level, options.seed);

    SoftmaxModel model(classes, data.dimension());
    model.epochs = options.epochs;
    model.learning_rate = options.learning_rate;
    model.noise_level = options.noise_level;
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        const LossGradient g = softmax_loss_gradient(model, data.features, labels);
        for (std::size_t i = 0; i < g.weights.size(); ++i) model.weights()[i] -= options.learning_rate * g.weights[i];
        for (std::size_t i = 0; i < g.biases.size(); ++i) model.biases()[i] -= options.learning_rate * g.biases[i];
    }

    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (model.predict(data.features[i]).label == label_name(labels[i])) ++correct;
    }
    model.training_accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return model;
}

std::vector<ConfidenceRecord> predict_all(const SoftmaxModel& model,
                                          std::span<const FeatureVector> features) {
    std::vector<ConfidenceRecord> records;
    records.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        records.push_back(model.predict(features[i], std::to_string(i)));
    }
    return records;
}

std::string_view to_string(DriftKind kind) noexcept {
    switch (kind) {
        case DriftKind::kHeldOutClass: return "held-out-class";
        case DriftKind::kSelectionCriteria: return "selection-criteria";
        case DriftKind::kOutOfDomain: return "out-of-domain";
        case DriftKind::kRandomLegal: return "random-legal";
        case DriftKind::kFeatureFunction: return "feature-function";
    }
    return "unknown";
}

DriftKind parse_drift_kind(std::string_view name) {
    for (int k = 1; k <= 5; ++k) {
        const auto kind = static_cast<DriftKind>(k);
        if (name == to_string(kind) || name == std::to_string(k)) return kind;
    }
    fail(ErrorCode::kInvalidArgument, "unknown drift kind '" + std::string(name) + "'");
}

void DriftSpec::validate(std::size_t dimension) const {
    switch (kind) {
        case DriftKind::kHeldOutClass:
            require(!held_out_classes.empty(), ErrorCode::kInvalidArgument,
                    "held-out drift needs at least one class");
            break;
        case DriftKind::kSelectionCriteria:
            require(feature < dimension, ErrorCode::kInvalidArgument, "feature index out of range");
            require(quantile > 0.0 && quantile < 1.0, ErrorCode::kInvalidArgument,
                    "selection quantile must lie in (0, 1)");
            break;
        case DriftKind::kOutOfDomain:
            require(alternative.has_value(), ErrorCode::kInvalidArgument,
                    "out-of-domain drift needs an alternative mixture");
            alternative->validate();
            require(alternative->dimension == dimension, ErrorCode::kDimensionMismatch,
                    "alternative mixture dimension differs from the data");
            break;
        case DriftKind::kRandomLegal:
            require(pool_size >= 1, ErrorCode::kInvalidArgument, "pool_size must be positive");
            break;
        case DriftKind::kFeatureFunction:
            require(feature < dimension, ErrorCode::kInvalidArgument, "feature index out of range");
            require(std::isfinite(multiplier) && multiplier != 1.0, ErrorCode::kInvalidArgument,
                    "feature multiplier must be finite and different from 1");
            break;
    }
}

namespace {

double selection_cutoff(const LabeledDataset& data, const DriftSpec& spec) {
    std::vector<double> column;
    column.reserve(data.size());
    for (const FeatureVector& x : data.features) column.push_back(x[spec.feature]);
    return quantile_linear(std::move(column), spec.quantile);
}

}  // namespace

LabeledDataset exclude_drift_records(const LabeledDataset& source, const DriftSpec& spec) {
    spec.validate(source.dimension());
    if (spec.kind == DriftKind::kHeldOutClass) {
        return without_classes(source, spec.held_out_classes);
    }
    if (spec.kind == DriftKind::kSelectionCriteria) {
        const double cutoff = selection_cutoff(source, spec);
        std::vector<char> keep(source.size());
        for (std::size_t i = 0; i < source.size(); ++i) keep[i] = source.features[i][spec.feature] <= cutoff;
        return subset(source, keep);
    }
    return source;
}

std::vector<FeatureVector> make_drift_pool(const DriftSpec& spec, const LabeledDataset& source,
                                           const LabeledDataset& training) {
    spec.validate(source.dimension());
    std::vector<FeatureVector> pool;
    switch (spec.kind) {
        case DriftKind::kHeldOutClass:
            for (std::size_t i = 0; i < source.size(); ++i) {
                if (std::find(spec.held_out_classes.begin(), spec.held_out_classes.end(),
                              source.labels[i]) != spec.held_out_classes.end()) {
                    pool.push_back(source.features[i]);
                }
            }
            break;
        case DriftKind::kSelectionCriteria: {
            const double cutoff = selection_cutoff(source, spec);
            for (const FeatureVector& x : source.features) {
                if (x[spec.feature] > cutoff) pool.push_back(x);
            }
            break;
        }
        case DriftKind::kOutOfDomain: {
            MixtureSpec alt = *spec.alternative;
            alt.seed = spec.seed;
            pool = generate_dataset(alt).features;
            break;
        }
        case DriftKind::kRandomLegal: {
            require(!training.envelope_min.empty(), ErrorCode::kInsufficientData,
                    "random drift needs a training envelope");
            SplitMix64 rng(spec.seed);
            for (std::size_t i = 0; i < spec.pool_size; ++i) {
                FeatureVector x(training.dimension());
                for (std::size_t j = 0; j < x.size(); ++j) {
                    x[j] = training.envelope_min[j] +
                           rng.uniform() * (training.envelope_max[j] - training.envelope_min[j]);
                }
                pool.push_back(std::move(x));
            }
            break;
        }
        case DriftKind::kFeatureFunction:
            for (FeatureVector x : source.features) {
                x[spec.feature] *= spec.multiplier;
                pool.push_back(std::move(x));
            }
            break;
    }
    if (pool.empty()) {
        fail(ErrorCode::kInsufficientData, "drift pool is empty");
    }
    return pool;
}

void DriftMixSpec::validate() const {
    require(drift_fraction >= 0.0 && drift_fraction <= 1.0, ErrorCode::kInvalidArgument,
            "drift fraction must lie in [0, 1]");
    require(batch_size >= kMinProductionRecords, ErrorCode::kInvalidArgument,
            "batch size must be at least " + std::to_string(kMinProductionRecords));
}

std::vector<std::size_t> apportion(std::span<const double> weights, std::size_t total) {
    require(!weights.empty(), ErrorCode::kInvalidArgument, "apportion needs weights");
    double sum = 0.0;
    for (double w : weights) {
        require(w >= 0.0 && std::isfinite(w), ErrorCode::kInvalidArgument, "weights must be non-negative");
        sum += w;
    }
    require(sum > 0.0, ErrorCode::kInvalidArgument, "weights must not all be zero");

    std::vector<std::size_t> seats(weights.size());
    std::vector<double> remainder(weights.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double quota = weights[i] / sum * static_cast<double>(total);
        seats[i] = static_cast<std::size_t>(std::floor(quota));
        remainder[i] = quota - static_cast<double>(seats[i]);
        assigned += seats[i];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < total; i = (i + 1) % order.size()) {
        ++seats[order[i]];
        ++assigned;
    }
    return seats;
}

Batch compose_batch(const LabeledDataset& clean, std::span<const FeatureVector> drift_pool,
                    const DriftMixSpec& mix) {
    mix.validate();
    const double split[] = {1.0 - mix.drift_fraction, mix.drift_fraction};
    const std::vector<std::size_t> parts = apportion(split, mix.batch_size);
    const std::size_t n_drift = parts[1];
    const std::size_t n_clean = parts[0];
    if (n_drift > 0 && drift_pool.empty()) {
        fail(ErrorCode::kInsufficientData, "drift pool is empty");
    }
    SplitMix64 rng(mix.seed);
    Batch batch;
    batch.features.reserve(mix.batch_size);

    if (n_clean > 0) {
        require(clean.size() > 0, ErrorCode::kInsufficientData, "clean data is empty");
        std::map<std::size_t, std::vector<std::size_t>> members;
        for (std::size_t i = 0; i < clean.size(); ++i) members[clean.labels[i]].push_back(i);
        std::vector<double> weights;
        for (const auto& [label, idx] : members) weights.push_back(static_cast<double>(idx.size()));
        const std::vector<std::size_t> quota = apportion(weights, n_clean);
        std::size_t c = 0;
        for (const auto& [label, idx] : members) {
            for (std::size_t pick : draw_indices(idx.size(), quota[c], rng)) {
                batch.features.push_back(clean.features[idx[pick]]);
                batch.is_drift.push_back(0);
            }
            ++c;
        }
    }
    for (std::size_t pick : draw_indices(drift_pool.size(), n_drift, rng)) {
        batch.features.push_back(drift_pool[pick]);
        batch.is_drift.push_back(1);
    }

    std::vector<std::size_t> order(batch.features.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle_in_place(order, rng);
    Batch shuffled;
    shuffled.features.reserve(order.size());
    for (std::size_t i : order) {
        shuffled.features.push_back(std::move(batch.features[i]));
        shuffled.is_drift.push_back(batch.is_drift[i]);
    }
    return shuffled;
}

std::vector<double> default_grid() {
    std::vector<double> grid;
    for (int p = 1; p <= 25; ++p) grid.push_back(p / 100.0);
    return grid;
}

std::optional<double> DriftSearchResult::best_label_minimal() const {
    std::optional<double> best;
    for (const auto& [label, minimal] : label_minimal) {
        if (minimal && (!best || *minimal < *best)) best = minimal;
    }
    return best;
}

std::optional<double> minimal_fraction(std::span<const double> grid, std::span<const double> rates,
                                       std::size_t iterations) {
    require(grid.size() == rates.size(), ErrorCode::kDimensionMismatch, "grid and rates differ in length");
    const std::size_t needed = (iterations + 1) / 2;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto alerts = static_cast<std::size_t>(std::llround(rates[g] * static_cast<double>(iterations)));
        if (alerts >= needed) return grid[g];
    }
    return std::nullopt;
}

DriftSearchResult min_drift_search(const SoftmaxModel& model, const BaselineProfile& baseline,
                                   std::span<const FeatureVector> drift_pool,
                                   const LabeledDataset& clean, const SearchOptions& options) {
    require(options.iterations >= kMinSearchIterations, ErrorCode::kInvalidArgument,
            "at least " + std::to_string(kMinSearchIterations) + " iterations are required");
    require(!options.grid.empty(), ErrorCode::kInvalidArgument, "grid must not be empty");
    for (std::size_t g = 0; g < options.grid.size(); ++g) {
        require(options.grid[g] >= 0.0 && options.grid[g] <= 1.0, ErrorCode::kInvalidArgument,
                "grid fractions must lie in [0, 1]");
        require(g == 0 || options.grid[g] > options.grid[g - 1], ErrorCode::kInvalidArgument,
                "grid must be strictly ascending");
    }
    baseline.validate();

    const bool per_label = options.audit.mode != AuditMode::kLabelAgnostic;
    const bool agnostic = options.audit.mode != AuditMode::kPerLabel;
    std::set<std::string> label_set;
    if (per_label) {
        for (const auto& [label, count] : baseline.label_counts) label_set.insert(label);
        for (std::size_t cls : model.classes()) label_set.insert(label_name(cls));
    }
    const std::vector<std::string> labels(label_set.begin(), label_set.end());

    const std::size_t runs = options.grid.size() * options.iterations;
    std::vector<char> all_alerts(runs, 0);
    std::vector<char> label_alerts(runs * labels.size(), 0);
    parallel_for(runs, options.workers, [&](std::size_t run) {
        const std::size_t g = run / options.iterations;
        const std::size_t it = run % options.iterations;
        const DriftMixSpec mix{options.grid[g], options.batch_size, derive_seed(options.seed, {g, it})};
        const Batch batch = compose_batch(clean, drift_pool, mix);
        const std::vector<ConfidenceRecord> records = predict_all(model, batch.features);
        const AuditReport report = audit_batch(baseline, records, options.audit);
        all_alerts[run] = report.label_agnostic_alert ? 1 : 0;
        for (std::size_t l = 0; l < labels.size(); ++l) {
            const auto found = report.per_label.find(labels[l]);
            label_alerts[run * labels.size() + l] = found != report.per_label.end() && found->second.alert;
        }
    });

    DriftSearchResult result;
    result.grid = options.grid;
    result.iterations = options.iterations;
    const auto rate = [&](auto&& alerted) {
        std::vector<double> rates(options.grid.size());
        for (std::size_t g = 0; g < options.grid.size(); ++g) {
            std::size_t count = 0;
            for (std::size_t it = 0; it < options.iterations; ++it) count += alerted(g * options.iterations + it);
            rates[g] = static_cast<double>(count) / static_cast<double>(options.iterations);
        }
        return rates;
    };
    if (agnostic) {
        result.all_rates = rate([&](std::size_t run) { return all_alerts[run]; });
        result.all_minimal = minimal_fraction(result.grid, result.all_rates, result.iterations);
    }
    for (std::size_t l = 0; l < labels.size(); ++l) {
        auto rates = rate([&](std::size_t run) { return label_alerts[run * labels.size() + l]; });
        result.label_minimal[labels[l]] = minimal_fraction(result.grid, rates, result.iterations);
        result.label_rates[labels[l]] = std::move(rates);
    }
    return result;
}

SimulationConfig default_simulation(std::uint64_t seed) {
    SimulationConfig config;
    config.seed = seed;
    config.mixture = ring_mixture(4, 6.0, 1.0, 500, seed);
    config.drift.kind = DriftKind::kHeldOutClass;
    config.drift.held_out_classes = {0};
    config.search.grid = default_grid();
    return config;
}

SimulationReport run_simulation(const SimulationConfig& config) {
    const std::uint64_t seed = config.seed;
    MixtureSpec mixture = config.mixture;
    mixture.seed = derive_seed(seed, {kTrainingData});
    const LabeledDataset full = generate_dataset(mixture);
    const LabeledDataset training = exclude_drift_records(full, config.drift);

    MixtureSpec baseline_mixture = config.mixture;
    baseline_mixture.records_per_class = config.baseline_per_class;
    baseline_mixture.seed = derive_seed(seed, {kBaselineData});
    const LabeledDataset baseline_set =
        exclude_drift_records(generate_dataset(baseline_mixture), config.drift);

    MixtureSpec production_mixture = config.mixture;
    production_mixture.records_per_class = config.production_per_class;
    production_mixture.seed = derive_seed(seed, {kProductionData});
    const LabeledDataset clean = exclude_drift_records(generate_dataset(production_mixture), config.drift);

    DriftSpec drift = config.drift;
    drift.seed = derive_seed(seed, {kDriftPool});
    std::vector<FeatureVector> pool;
    if (config.null_drift) {
        MixtureSpec control = production_mixture;
        control.seed = drift.seed;
        pool = exclude_drift_records(generate_dataset(control), config.drift).features;
    } else {
        pool = make_drift_pool(drift, full, training);
    }

    TrainingOptions training_options = config.training;
    training_options.seed = derive_seed(seed, {kLabelNoise});
    const SoftmaxModel model = train_classifier(training, training_options);

    const std::vector<ConfidenceRecord> baseline_records = predict_all(model, baseline_set.features);
    const BaselineProfile baseline = build_baseline(baseline_records, "simulation");

    SearchOptions search = config.search;
    search.seed = derive_seed(seed, {kSearch});

    SimulationReport report;
    report.config = config;
    report.training_accuracy = model.training_accuracy;
    report.drift_pool_size = pool.size();
    report.baseline_size = baseline.total;
    report.search = min_drift_search(model, baseline, pool, clean, search);
    return report;
}

void write_heatmap_csv(std::ostream& out, const DriftSearchResult& result) {
    out << "auditor";
    for (double f : result.grid) out << ',' << nlohmann::json(f).dump();
    out << '\n';
    const auto row = [&](const std::string& name, const std::vector<double>& rates) {
        out << name;
        for (double r : rates) out << ',' << nlohmann::json(r).dump();
        out << '\n';
    };
    if (!result.all_rates.empty()) row("ALL", result.all_rates);
    for (const auto& [label, rates] : result.label_rates) row(label, rates);
}

}  // namespace confdrift
