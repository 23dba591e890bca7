#include "confdrift/cpm_experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

#include "confdrift/error.hpp"
#include "confdrift/parallel.hpp"
#include "confdrift/random.hpp"

namespace confdrift {

namespace {

constexpr std::size_t kWindowSamples = 25;

std::size_t sample_of(std::size_t observation, std::size_t sample_size) {
    return (observation + sample_size - 1) / sample_size;
}

void check_sequence(std::span<const double> sequence, std::size_t sample_size) {
    require(sample_size >= 2, ErrorCode::kInvalidArgument, "sample size must be at least 2");
    require(sequence.size() % sample_size == 0, ErrorCode::kInvalidArgument,
            "sequence length must be a multiple of the sample size");
}

// Pooled two-sample T from sums; 0 for zero variance with equal means.
double pooled_t(double n1, double s1, double q1, double n2, double s2, double q2) {
    const double m1 = s1 / n1;
    const double m2 = s2 / n2;
    const double ss = std::max(0.0, (q1 - s1 * m1) + (q2 - s2 * m2));
    const double var = ss / (n1 + n2 - 2.0) * (1.0 / n1 + 1.0 / n2);
    const double diff = m1 - m2;
    if (var <= 0.0) {
        if (diff == 0.0) return 0.0;
        return diff > 0 ? std::numeric_limits<double>::max() : -std::numeric_limits<double>::max();
    }
    return diff / std::sqrt(var);
}

}  // namespace

void SequenceProtocol::validate() const {
    require(sample_size >= 2, ErrorCode::kInvalidArgument, "sample_size must be at least 2");
    require(clean_samples >= 1, ErrorCode::kInvalidArgument, "clean_samples must be positive");
    require(ramp_samples <= sample_size, ErrorCode::kInvalidArgument,
            "ramp_samples must not exceed sample_size");
    require(total_samples > clean_samples + ramp_samples, ErrorCode::kInvalidArgument,
            "total_samples must exceed clean_samples + ramp_samples");
    require(replications >= 1, ErrorCode::kInvalidArgument, "replications must be positive");
}

std::size_t SequenceProtocol::drift_count(std::size_t sample) const noexcept {
    if (sample <= clean_samples) return 0;
    const std::size_t j = sample - clean_samples;
    return std::min(j <= ramp_samples ? j : sample_size, sample_size);
}

std::vector<double> build_sequence(std::span<const double> clean, std::span<const double> drift,
                                   const SequenceProtocol& protocol, std::uint64_t replication_seed) {
    protocol.validate();
    require(!clean.empty() && !drift.empty(), ErrorCode::kInsufficientData, "pools must not be empty");
    SplitMix64 rng(replication_seed);
    std::vector<double> sequence;
    sequence.reserve(protocol.length());
    std::vector<char> is_drift(protocol.sample_size);
    for (std::size_t s = 1; s <= protocol.total_samples; ++s) {
        const std::size_t j = protocol.drift_count(s);
        std::fill(is_drift.begin(), is_drift.end(), 0);
        if (j == protocol.sample_size) {
            std::fill(is_drift.begin(), is_drift.end(), 1);
        } else {
            // Partial Fisher-Yates over positions picks j distinct slots.
            std::vector<std::size_t> slots(protocol.sample_size);
            for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
            for (std::size_t i = 0; i < j; ++i) {
                std::swap(slots[i], slots[i + uniform_index(rng, slots.size() - i)]);
                is_drift[slots[i]] = 1;
            }
        }
        for (std::size_t i = 0; i < protocol.sample_size; ++i) {
            const auto& pool = is_drift[i] ? drift : clean;
            sequence.push_back(pool[uniform_index(rng, pool.size())]);
        }
    }
    return sequence;
}

std::string_view to_string(DetectionMethod method) noexcept {
    switch (method) {
        case DetectionMethod::kCpmStudentT: return "cpm-t";
        case DetectionMethod::kCpmLepage: return "cpm-lepage";
        case DetectionMethod::kCpmCramerVonMises: return "cpm-cvm";
        case DetectionMethod::kCpmKolmogorovSmirnov: return "cpm-ks";
        case DetectionMethod::kSplitsT: return "splits-t";
        case DetectionMethod::kPairsT: return "pairs-t";
    }
    return "unknown";
}

DetectionMethod parse_detection_method(std::string_view name) {
    for (auto m : {DetectionMethod::kCpmStudentT, DetectionMethod::kCpmLepage,
                   DetectionMethod::kCpmCramerVonMises, DetectionMethod::kCpmKolmogorovSmirnov,
                   DetectionMethod::kSplitsT, DetectionMethod::kPairsT}) {
        if (name == to_string(m)) return m;
    }
    fail(ErrorCode::kInvalidArgument, "unknown detection method '" + std::string(name) + "'");
}

std::optional<TestKind> cpm_kind(DetectionMethod method) noexcept {
    switch (method) {
        case DetectionMethod::kCpmStudentT: return TestKind::kStudentT;
        case DetectionMethod::kCpmLepage: return TestKind::kLepage;
        case DetectionMethod::kCpmCramerVonMises: return TestKind::kCramerVonMises;
        case DetectionMethod::kCpmKolmogorovSmirnov: return TestKind::kKolmogorovSmirnov;
        default: return std::nullopt;
    }
}

std::vector<DetectionMethod> default_methods() {
    return {DetectionMethod::kCpmStudentT, DetectionMethod::kCpmLepage,
            DetectionMethod::kCpmCramerVonMises, DetectionMethod::kSplitsT, DetectionMethod::kPairsT};
}

ReplicationOutcome cpm_detector(std::span<const double> sequence, std::size_t sample_size,
                                const ThresholdTable& table) {
    check_sequence(sequence, sample_size);
    ReplicationOutcome outcome;
    switch (table.test_kind) {
        case TestKind::kStudentT: outcome.method = DetectionMethod::kCpmStudentT; break;
        case TestKind::kLepage: outcome.method = DetectionMethod::kCpmLepage; break;
        case TestKind::kKolmogorovSmirnov: outcome.method = DetectionMethod::kCpmKolmogorovSmirnov; break;
        default: outcome.method = DetectionMethod::kCpmCramerVonMises; break;
    }
    DetectorState detector(table);
    for (double x : sequence) {
        if (const auto hit = detector.push(x)) {
            outcome.detected = true;
            outcome.t_detect = sample_of(hit->t_detect, sample_size);
            outcome.k_hat = hit->k_hat;
            outcome.change_sample = sample_of(hit->k_hat + 1, sample_size);
            break;
        }
    }
    return outcome;
}

ReplicationOutcome splits_t_detector(std::span<const double> sequence, std::size_t sample_size,
                                     double alpha) {
    check_sequence(sequence, sample_size);
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::kInvalidArgument, "alpha must lie in (0, 1)");
    ReplicationOutcome outcome;
    outcome.method = DetectionMethod::kSplitsT;
    const std::size_t samples = sequence.size() / sample_size;
    // Per-sample sums, shifted by the first value for numerical stability.
    const double shift = sequence.empty() ? 0.0 : sequence.front();
    std::vector<double> s1(samples + 1, 0.0), s2(samples + 1, 0.0);
    for (std::size_t s = 0; s < samples; ++s) {
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < sample_size; ++i) {
            const double v = sequence[s * sample_size + i] - shift;
            a += v;
            b += v * v;
        }
        s1[s + 1] = s1[s] + a;
        s2[s + 1] = s2[s] + b;
    }
    const auto n = static_cast<double>(sample_size);
    for (std::size_t t = 2; t <= samples; ++t) {
        const double critical = student_t_critical(alpha, n * static_cast<double>(t) - 2.0);
        bool all_reject = true;
        double best = -1.0;
        std::size_t best_k = 1;
        for (std::size_t k = 1; k < t && all_reject; ++k) {
            const double stat = std::abs(pooled_t(n * static_cast<double>(k), s1[k], s2[k],
                                                  n * static_cast<double>(t - k), s1[t] - s1[k],
                                                  s2[t] - s2[k]));
            all_reject = stat > critical;
            if (stat > best) {
                best = stat;
                best_k = k;
            }
        }
        if (all_reject) {
            outcome.detected = true;
            outcome.t_detect = t;
            outcome.change_sample = best_k + 1;
            break;
        }
    }
    return outcome;
}

ReplicationOutcome pairs_t_detector(std::span<const double> sequence, std::size_t sample_size,
                                    double alpha) {
    check_sequence(sequence, sample_size);
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::kInvalidArgument, "alpha must lie in (0, 1)");
    ReplicationOutcome outcome;
    outcome.method = DetectionMethod::kPairsT;
    const std::size_t samples = sequence.size() / sample_size;
    if (samples < 2) return outcome;
    const Sample first(std::vector<double>(sequence.begin(), sequence.begin() + static_cast<std::ptrdiff_t>(sample_size)));
    for (std::size_t t = 2; t <= samples; ++t) {
        const auto begin = sequence.begin() + static_cast<std::ptrdiff_t>((t - 1) * sample_size);
        const Sample current(std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(sample_size)));
        const TestResult result = t_test_two_sample(first, current);
        if (*result.p_value < alpha) {
            outcome.detected = true;
            outcome.t_detect = t;
            outcome.change_sample = t;
            break;
        }
    }
    return outcome;
}

std::vector<ReplicationOutcome> run_replications(std::span<const double> clean,
                                                 std::span<const double> drift,
                                                 const SequenceProtocol& protocol,
                                                 std::span<const DetectionMethod> methods,
                                                 const std::map<TestKind, ThresholdTable>& tables,
                                                 double naive_alpha, unsigned workers) {
    protocol.validate();
    require(!methods.empty(), ErrorCode::kInvalidArgument, "no detection methods given");
    for (DetectionMethod m : methods) {
        if (const auto kind = cpm_kind(m)) {
            const auto it = tables.find(*kind);
            if (it == tables.end()) {
                fail(ErrorCode::kMissingThresholds,
                     "no threshold table for " + std::string(to_string(*kind)));
            }
            it->second.validate();
            require(it->second.test_kind == *kind, ErrorCode::kMissingThresholds,
                    "threshold table kind does not match its method");
        }
    }

    std::vector<ReplicationOutcome> outcomes(protocol.replications * methods.size());
    parallel_for(protocol.replications, workers, [&](std::size_t r) {
        const std::vector<double> sequence =
            build_sequence(clean, drift, protocol, derive_seed(protocol.seed, {r}));
        for (std::size_t m = 0; m < methods.size(); ++m) {
            ReplicationOutcome outcome;
            if (const auto kind = cpm_kind(methods[m])) {
                outcome = cpm_detector(sequence, protocol.sample_size, tables.at(*kind));
            } else if (methods[m] == DetectionMethod::kSplitsT) {
                outcome = splits_t_detector(sequence, protocol.sample_size, naive_alpha);
            } else {
                outcome = pairs_t_detector(sequence, protocol.sample_size, naive_alpha);
            }
            outcome.method = methods[m];
            outcome.replication = r;
            outcomes[r * methods.size() + m] = outcome;
        }
    });
    return outcomes;
}

ExperimentSummary summarize(std::span<const ReplicationOutcome> outcomes, const SequenceProtocol& protocol) {
    require(!outcomes.empty(), ErrorCode::kInsufficientData, "no outcomes to summarize");
    ExperimentSummary summary;
    summary.protocol = protocol;

    std::vector<DetectionMethod> order;
    for (const ReplicationOutcome& o : outcomes) {
        if (std::find(order.begin(), order.end(), o.method) == order.end()) order.push_back(o.method);
    }
    const std::size_t cutoff = protocol.clean_samples;
    for (DetectionMethod method : order) {
        MethodSummary s;
        s.method = method;
        std::size_t change_before = 0;
        std::size_t detect_before = 0;
        std::vector<double> delays;
        for (const ReplicationOutcome& o : outcomes) {
            if (o.method != method) continue;
            ++s.replications;
            if (!o.detected) {
                delays.push_back(std::numeric_limits<double>::infinity());
                continue;
            }
            ++s.detections;
            const std::size_t t = *o.t_detect;
            ++s.histogram[t];
            if (t <= cutoff) ++detect_before;
            if (o.change_sample && *o.change_sample <= cutoff) ++change_before;
            if (t > cutoff && t <= cutoff + kWindowSamples) ++s.in_window;
            delays.push_back(static_cast<double>(t) - static_cast<double>(cutoff));
        }
        const auto reps = static_cast<double>(s.replications);
        s.pr_change_before = static_cast<double>(change_before) / reps;
        s.pr_detection_before = static_cast<double>(detect_before) / reps;
        std::sort(delays.begin(), delays.end());
        const std::size_t mid = delays.size() / 2;
        const double median = delays.size() % 2 == 1 ? delays[mid] : 0.5 * (delays[mid - 1] + delays[mid]);
        if (std::isfinite(median)) s.median_delay = median;
        summary.methods.push_back(std::move(s));
    }
    return summary;
}

void write_summary_csv(std::ostream& out, const ExperimentSummary& summary) {
    out << "method,cpm,pr_determined_k_lt_" << summary.protocol.clean_samples + 1
        << ",pr_detection_t_lt_" << summary.protocol.clean_samples + 1
        << ",detections,replications,median_delay\n";
    for (const MethodSummary& s : summary.methods) {
        out << to_string(s.method) << ',' << (cpm_kind(s.method) ? "CPM" : "naive") << ','
            << nlohmann::json(s.pr_change_before).dump() << ','
            << nlohmann::json(s.pr_detection_before).dump() << ',' << s.detections << ','
            << s.replications << ','
            << (s.median_delay ? nlohmann::json(*s.median_delay).dump() : std::string("inf")) << '\n';
    }
}

void write_histogram_csv(std::ostream& out, const ExperimentSummary& summary) {
    out << "sample";
    for (const MethodSummary& s : summary.methods) out << ',' << to_string(s.method);
    out << '\n';
    for (std::size_t t = 1; t <= summary.protocol.total_samples; ++t) {
        out << t;
        for (const MethodSummary& s : summary.methods) {
            const auto it = s.histogram.find(t);
            out << ',' << (it == s.histogram.end() ? 0 : it->second);
        }
        out << '\n';
    }
}

ConfidencePools make_confidence_pools(const CpmExperimentConfig& config) {
    const std::uint64_t seed = config.protocol.seed;
    const std::size_t held_out[] = {0};

    const MixtureSpec training_mix = ring_mixture(config.outer_classes, config.radius, config.sigma,
                                                  config.training_per_class, derive_seed(seed, {20}));
    const LabeledDataset training = without_classes(generate_dataset(training_mix), held_out);
    TrainingOptions options = config.training;
    options.seed = derive_seed(seed, {21});
    const SoftmaxModel model = train_classifier(training, options);

    const MixtureSpec pool_mix = ring_mixture(config.outer_classes, config.radius, config.sigma,
                                              config.pool_per_class, derive_seed(seed, {22}));
    const LabeledDataset clean = without_classes(generate_dataset(pool_mix), held_out);

    MixtureSpec ood;
    ood.num_classes = 2;  // a single component, stored twice to satisfy the mixture invariant
    ood.dimension = 2;
    ood.class_means = {{0.0, 0.0}, {0.0, 0.0}};
    ood.class_sigmas = {config.drift_sigma, config.drift_sigma};
    ood.records_per_class = (config.drift_pool_size + 1) / 2;
    ood.seed = derive_seed(seed, {23});
    const LabeledDataset drift = generate_dataset(ood);

    ConfidencePools pools;
    pools.training_accuracy = model.training_accuracy;
    for (const ConfidenceRecord& r : predict_all(model, clean.features)) pools.clean.push_back(r.confidence);
    for (const ConfidenceRecord& r : predict_all(model, drift.features)) pools.drift.push_back(r.confidence);
    pools.drift.resize(config.drift_pool_size);
    return pools;
}

CpmExperimentReport run_cpm_experiment(const CpmExperimentConfig& config, const Calibrator& calibrate) {
    config.protocol.validate();
    const ConfidencePools pools = make_confidence_pools(config);

    std::map<TestKind, ThresholdTable> tables;
    for (DetectionMethod m : config.methods) {
        const auto kind = cpm_kind(m);
        if (!kind || tables.count(*kind)) continue;
        CalibrationOptions options;
        options.kind = *kind;
        options.alpha = config.cpm_alpha;
        options.t_max = config.cpm_t_max;
        options.replications = config.cpm_replications;
        options.seed = config.calibration_seed;
        options.workers = config.workers;
        tables.emplace(*kind, calibrate(options));
    }

    CpmExperimentReport report;
    report.config = config;
    report.training_accuracy = pools.training_accuracy;
    report.clean_pool_size = pools.clean.size();
    report.drift_pool_size = pools.drift.size();
    report.outcomes = run_replications(pools.clean, pools.drift, config.protocol, config.methods, tables,
                                       config.naive_alpha, config.workers);
    report.summary = summarize(report.outcomes, config.protocol);
    return report;
}

}  // namespace confdrift
