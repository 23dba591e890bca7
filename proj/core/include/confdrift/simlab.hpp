#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "confdrift/auditor.hpp"

namespace confdrift {

using FeatureVector = std::vector<double>;

/// Isotropic Gaussian mixture with one component per class.
struct MixtureSpec {
    std::size_t num_classes = 2;
    std::size_t dimension = 2;
    std::vector<FeatureVector> class_means;
    std::vector<double> class_sigmas;
    std::size_t records_per_class = 1000;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Classes on a circle of the given radius around an extra class at the
/// origin (class 0), all with the same sigma.
MixtureSpec ring_mixture(std::size_t outer_classes, double radius, double sigma,
                         std::size_t records_per_class, std::uint64_t seed);

struct LabeledDataset {
    std::size_t num_classes = 0;
    std::vector<FeatureVector> features;
    std::vector<std::size_t> labels;
    FeatureVector envelope_min;
    FeatureVector envelope_max;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dimension() const noexcept { return envelope_min.size(); }
    std::map<std::size_t, std::size_t> label_counts() const;

    /// Recomputes the per-feature envelope from the features.
    void refresh_envelope();
    void validate() const;
};

LabeledDataset generate_dataset(const MixtureSpec& spec);

/// Records whose label is not in `classes` (envelope recomputed).
LabeledDataset without_classes(const LabeledDataset& data, std::span<const std::size_t> classes);

struct TrainingOptions {
    std::size_t epochs = 200;
    double learning_rate = 0.5;
    double noise_level = 0.0;  // fraction of training labels replaced by another class
    std::uint64_t seed = 1;
};

/// Multinomial logistic regression over the classes present in training.
class SoftmaxModel {
public:
    SoftmaxModel(std::vector<std::size_t> classes, std::size_t dimension);

    std::size_t num_outputs() const noexcept { return classes_.size(); }
    std::size_t dimension() const noexcept { return dimension_; }
    const std::vector<std::size_t>& classes() const noexcept { return classes_; }

    /// Row-major outputs x dimension.
    std::vector<double>& weights() noexcept { return weights_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    std::vector<double>& biases() noexcept { return biases_; }
    const std::vector<double>& biases() const noexcept { return biases_; }

    std::vector<double> predict_proba(std::span<const double> x) const;

    /// Winning label (smallest class id on exact ties) and its probability.
    ConfidenceRecord predict(std::span<const double> x, std::string id = {}) const;

    std::size_t epochs = 0;
    double learning_rate = 0.0;
    double noise_level = 0.0;
    double training_accuracy = 0.0;  // against the labels used for fitting

private:
    std::vector<std::size_t> classes_;
    std::size_t dimension_;
    std::vector<double> weights_;
    std::vector<double> biases_;
};

struct LossGradient {
    double loss = 0.0;  // mean cross-entropy
    std::vector<double> weights;
    std::vector<double> biases;
};

/// Mean cross-entropy and its gradient at the model's current parameters.
/// Labels must be among model.classes().
LossGradient softmax_loss_gradient(const SoftmaxModel& model, std::span<const FeatureVector> features,
                                   std::span<const std::size_t> labels);

/// Replaces each label with probability `noise_level` by a uniformly chosen
/// different class from `classes`.
std::vector<std::size_t> noisy_labels(std::span<const std::size_t> labels,
                                      std::span<const std::size_t> classes, double noise_level,
                                      std::uint64_t seed);

SoftmaxModel train_classifier(const LabeledDataset& data, const TrainingOptions& options);

std::vector<ConfidenceRecord> predict_all(const SoftmaxModel& model,
                                          std::span<const FeatureVector> features);

enum class DriftKind {
    kHeldOutClass = 1,
    kSelectionCriteria = 2,
    kOutOfDomain = 3,
    kRandomLegal = 4,
    kFeatureFunction = 5,
};

std::string_view to_string(DriftKind kind) noexcept;
DriftKind parse_drift_kind(std::string_view name);

struct DriftSpec {
    DriftKind kind = DriftKind::kHeldOutClass;
    std::vector<std::size_t> held_out_classes{0};  // type 1
    std::size_t feature = 0;                        // types 2 and 5
    double quantile = 0.9;                          // type 2
    std::optional<MixtureSpec> alternative;         // type 3
    double multiplier = 2.0;                        // type 5
    std::size_t pool_size = 1000;                   // types 3 and 4
    std::uint64_t seed = 1;

    void validate(std::size_t dimension) const;
};

/// Source records minus those reserved as drift (types 1 and 2); the other
/// kinds leave the data unchanged.
LabeledDataset exclude_drift_records(const LabeledDataset& source, const DriftSpec& spec);

/// Feature vectors that play the role of drifted production data.
///   type 1: held-out class records of `source`
///   type 2: records of `source` strictly above the quantile of one feature
///   type 3: draws from the alternative mixture
///   type 4: uniform draws inside `training`'s envelope
///   type 5: `source` records with one feature multiplied
std::vector<FeatureVector> make_drift_pool(const DriftSpec& spec, const LabeledDataset& source,
                                           const LabeledDataset& training);

struct DriftMixSpec {
    double drift_fraction = 0.0;
    std::size_t batch_size = 1000;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Largest-remainder apportionment of `total` across `weights`.
std::vector<std::size_t> apportion(std::span<const double> weights, std::size_t total);

struct Batch {
    std::vector<FeatureVector> features;
    std::vector<char> is_drift;
};

/// Drift records plus clean records in the clean set's label proportions,
/// shuffled. Pools are sampled without replacement when large enough.
Batch compose_batch(const LabeledDataset& clean, std::span<const FeatureVector> drift_pool,
                    const DriftMixSpec& mix);

inline constexpr std::size_t kMinSearchIterations = 50;

struct SearchOptions {
    AuditOptions audit;
    std::vector<double> grid;  // ascending fractions
    std::size_t iterations = kMinSearchIterations;
    std::size_t batch_size = 1000;
    std::uint64_t seed = 1;
    unsigned workers = 0;
};

std::vector<double> default_grid();

/// Alert rates over the grid, for the label-agnostic auditor ("ALL") and each
/// per-label auditor, with the minimal fraction where at least half of the
/// iterations alert.
struct DriftSearchResult {
    std::vector<double> grid;
    std::size_t iterations = 0;
    std::vector<double> all_rates;
    std::map<std::string, std::vector<double>> label_rates;
    std::optional<double> all_minimal;
    std::map<std::string, std::optional<double>> label_minimal;

    /// Smallest per-label minimum, if any label auditor detects.
    std::optional<double> best_label_minimal() const;
};

/// First grid fraction whose alert count reaches ceil(iterations / 2).
std::optional<double> minimal_fraction(std::span<const double> grid, std::span<const double> rates,
                                       std::size_t iterations);

DriftSearchResult min_drift_search(const SoftmaxModel& model, const BaselineProfile& baseline,
                                   std::span<const FeatureVector> drift_pool,
                                   const LabeledDataset& clean, const SearchOptions& options);

/// One complete simulation: data, training, baseline, drift pool and search.
/// Every random component is seeded from `seed`; the seed fields inside the
/// nested specs are ignored by run_simulation().
struct SimulationConfig {
    MixtureSpec mixture;
    DriftSpec drift;
    TrainingOptions training;
    std::size_t baseline_per_class = 500;
    std::size_t production_per_class = 2500;
    SearchOptions search;
    /// Control run: the drift pool is replaced by fresh records drawn like
    /// the clean production data, so any alert is a false alarm.
    bool null_drift = false;
    std::uint64_t seed = 1;
};

/// The default experiment: a 5-class ring with class 0 at the origin held out.
SimulationConfig default_simulation(std::uint64_t seed);

struct SimulationReport {
    SimulationConfig config;
    double training_accuracy = 0.0;
    std::size_t drift_pool_size = 0;
    std::size_t baseline_size = 0;
    DriftSearchResult search;
};

SimulationReport run_simulation(const SimulationConfig& config);

/// Heatmap CSV: rows "ALL" and one per label, columns the grid fractions.
void write_heatmap_csv(std::ostream& out, const DriftSearchResult& result);

}  // namespace confdrift
