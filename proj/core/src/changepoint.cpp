#include "confdrift/changepoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "confdrift/error.hpp"
#include "confdrift/parallel.hpp"
#include "confdrift/random.hpp"

namespace confdrift {

namespace {

// Seed-path domains so sub-streams of different roles never coincide.
constexpr std::uint64_t kStreamDomain = 0;
constexpr std::uint64_t kResampleDomain = 1;
constexpr std::uint64_t kCloneDomain = 2;

double draw_null(TestKind kind, SplitMix64& rng) {
    return kind == TestKind::kStudentT ? standard_normal(rng) : rng.uniform();
}

/// Number of null streams allowed to exceed h_t among n at risk.
std::size_t allowed_exceedances(double alpha, std::size_t n) {
    return static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n) + 1e-9));
}

// Values closer than this (relative) are one atom of the statistic.
constexpr double kAtomTolerance = 1e-9;

/// Picks h_t around the empirical quantile q. Small t make the split
/// statistics discrete, so "> q" can undershoot alpha badly; when counting
/// the atom at q as an exceedance lands closer to alpha * n, the threshold is
/// moved just below the atom instead.
template <typename CountAbove>
double attainable_threshold(double q, double alpha, std::size_t n, CountAbove&& count_above) {
    const double above = q + kAtomTolerance * std::abs(q);
    const double below = q - kAtomTolerance * std::abs(q);
    const double target = alpha * static_cast<double>(n);
    const double miss_above = std::abs(static_cast<double>(count_above(above)) - target);
    const double miss_below = std::abs(static_cast<double>(count_above(below)) - target);
    return miss_below < miss_above ? below : above;
}

void check_options(const CalibrationOptions& o) {
    require(o.alpha > 0.0 && o.alpha < 1.0, ErrorCode::kInvalidArgument,
            "alpha must lie in (0, 1)");
    require(o.burn_in >= 2 * kMinSegment, ErrorCode::kInvalidArgument,
            "burn_in must be at least " + std::to_string(2 * kMinSegment));
    require(o.t_max > o.burn_in, ErrorCode::kInvalidArgument, "t_max must exceed burn_in");
    require(o.replications >= 1000, ErrorCode::kInvalidArgument,
            "calibration needs at least 1000 replications");
    require(o.replications <= std::numeric_limits<std::uint32_t>::max(),
            ErrorCode::kInvalidArgument, "too many replications");
    SplitScanner probe(o.kind);  // rejects unsupported kinds
    if (allowed_exceedances(o.alpha, o.replications) < 1) {
        fail(ErrorCode::kCalibrationExhausted,
             "alpha * replications < 1: the (1 - alpha) quantile cannot be resolved; "
             "increase replications to at least " +
                 std::to_string(static_cast<std::size_t>(std::ceil(1.0 / o.alpha))));
    }
}

struct TailEntry {
    double value;
    std::uint32_t stream;
};

// Larger value first, then smaller stream id: a total order, so merged tails
// do not depend on which worker saw which stream.
bool ranks_before(const TailEntry& a, const TailEntry& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.stream < b.stream;
}

class TailBuffer {
public:
    explicit TailBuffer(std::size_t capacity) : capacity_(capacity) {}

    void offer(TailEntry entry) {
        if (heap_.size() < capacity_) {
            heap_.push_back(entry);
            std::push_heap(heap_.begin(), heap_.end(), ranks_before);
        } else if (ranks_before(entry, heap_.front())) {
            std::pop_heap(heap_.begin(), heap_.end(), ranks_before);
            heap_.back() = entry;
            std::push_heap(heap_.begin(), heap_.end(), ranks_before);
        }
    }

    std::vector<TailEntry>& entries() { return heap_; }

private:
    std::size_t capacity_;
    std::vector<TailEntry> heap_;  // root is the entry ranked last
};

ThresholdTable calibrate_by_removal(const CalibrationOptions& o) {
    const std::size_t horizon = o.t_max - o.burn_in + 1;
    const double r = static_cast<double>(o.replications);
    const double expected_removed = r * (1.0 - std::pow(1.0 - o.alpha, static_cast<double>(horizon)));
    const std::size_t capacity = std::min<std::size_t>(
        o.replications,
        4 * static_cast<std::size_t>(std::ceil(o.alpha * r)) +
            2 * static_cast<std::size_t>(std::ceil(expected_removed)) + 64);

    const unsigned slots = worker_slots(o.replications, o.workers);
    std::vector<std::vector<TailBuffer>> tails(
        slots, std::vector<TailBuffer>(horizon, TailBuffer(capacity)));

    parallel_for_workers(o.replications, o.workers, [&](unsigned w, std::size_t stream) {
        SplitMix64 rng(derive_seed(o.seed, {kStreamDomain, stream}));
        SplitScanner scanner(o.kind);
        scanner.reserve(o.t_max);
        for (std::size_t t = 1; t <= o.t_max; ++t) {
            scanner.push(draw_null(o.kind, rng));
            if (t >= o.burn_in) {
                tails[w][t - o.burn_in].offer(
                    {detection_score(scanner.scan()), static_cast<std::uint32_t>(stream)});
            }
        }
    });

    ThresholdTable table;
    table.test_kind = o.kind;
    table.alpha = o.alpha;
    table.burn_in = o.burn_in;
    table.t_max = o.t_max;
    table.calibration_replications = o.replications;
    table.seed = o.seed;
    table.method = CalibrationMethod::kRemoval;
    table.thresholds.reserve(horizon);

    std::vector<char> removed(o.replications, 0);
    std::size_t at_risk = o.replications;
    std::vector<TailEntry> merged;
    for (std::size_t h = 0; h < horizon; ++h) {
        merged.clear();
        for (auto& worker : tails) {
            auto& entries = worker[h].entries();
            merged.insert(merged.end(), entries.begin(), entries.end());
            std::vector<TailEntry>().swap(entries);
        }
        std::sort(merged.begin(), merged.end(), ranks_before);
        if (merged.size() > capacity) merged.resize(capacity);

        const std::size_t exceed = allowed_exceedances(o.alpha, at_risk);
        if (exceed < 1) {
            fail(ErrorCode::kCalibrationExhausted,
                 "replications exhausted at t=" + std::to_string(o.burn_in + h) + ": only " +
                     std::to_string(at_risk) + " streams remain; increase replications");
        }
        std::size_t ranked = 0;
        double threshold = 0.0;
        bool found = false;
        for (const TailEntry& e : merged) {
            if (removed[e.stream]) continue;
            if (ranked++ == exceed) {
                threshold = e.value;
                found = true;
                break;
            }
        }
        if (!found) {
            fail(ErrorCode::kCalibrationExhausted,
                 "tail buffer too small at t=" + std::to_string(o.burn_in + h));
        }
        std::size_t alive_seen = 0;
        bool truncated = false;
        threshold = attainable_threshold(threshold, o.alpha, at_risk, [&](double level) {
            std::size_t count = 0;
            alive_seen = 0;
            for (const TailEntry& e : merged) {
                if (removed[e.stream]) continue;
                ++alive_seen;
                if (e.value > level) ++count;
            }
            truncated = count == alive_seen && merged.size() == capacity;
            return count;
        });
        if (truncated) {
            fail(ErrorCode::kCalibrationExhausted,
                 "tail buffer too small at t=" + std::to_string(o.burn_in + h));
        }
        for (const TailEntry& e : merged) {
            if (!removed[e.stream] && e.value > threshold) {
                removed[e.stream] = 1;
                --at_risk;
            }
        }
        table.thresholds.push_back(threshold);
    }
    return table;
}

struct Particle {
    SplitScanner scanner;
    SplitMix64 rng;
};

/// Advances every particle one step and records its scan statistic.
void step_particles(std::vector<Particle>& particles, TestKind kind, bool scan,
                    std::vector<double>& stats, unsigned workers) {
    parallel_for(particles.size(), workers, [&](std::size_t i) {
        Particle& p = particles[i];
        p.scanner.push(draw_null(kind, p.rng));
        if (scan) stats[i] = detection_score(p.scanner.scan());
    });
}

/// Replaces particles flagged in `hit` with copies of random survivors.
void resample(std::vector<Particle>& particles, const std::vector<char>& hit,
              std::uint64_t seed, std::size_t t) {
    std::vector<std::size_t> survivors;
    survivors.reserve(particles.size());
    for (std::size_t i = 0; i < particles.size(); ++i) {
        if (!hit[i]) survivors.push_back(i);
    }
    if (survivors.empty()) {
        fail(ErrorCode::kCalibrationExhausted,
             "every stream exceeded the threshold at t=" + std::to_string(t));
    }
    SplitMix64 pick(derive_seed(seed, {kResampleDomain, t}));
    for (std::size_t i = 0; i < particles.size(); ++i) {
        if (!hit[i]) continue;
        const auto donor = survivors[static_cast<std::size_t>(
            pick.uniform() * static_cast<double>(survivors.size()))];
        particles[i].scanner = particles[donor].scanner;
        particles[i].rng = SplitMix64(derive_seed(seed, {kCloneDomain, t, i}));
    }
}

std::vector<Particle> make_particles(TestKind kind, std::size_t count, std::size_t capacity,
                                     std::uint64_t seed) {
    std::vector<Particle> particles;
    particles.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        particles.push_back({SplitScanner(kind), SplitMix64(derive_seed(seed, {kStreamDomain, i}))});
        particles.back().scanner.reserve(capacity);
    }
    return particles;
}

ThresholdTable calibrate_by_resampling(const CalibrationOptions& o) {
    std::vector<Particle> particles = make_particles(o.kind, o.replications, o.t_max, o.seed);
    const std::size_t exceed = allowed_exceedances(o.alpha, o.replications);

    ThresholdTable table;
    table.test_kind = o.kind;
    table.alpha = o.alpha;
    table.burn_in = o.burn_in;
    table.t_max = o.t_max;
    table.calibration_replications = o.replications;
    table.seed = o.seed;
    table.method = CalibrationMethod::kResampling;

    std::vector<double> stats(o.replications, 0.0);
    std::vector<double> sorted;
    std::vector<char> hit(o.replications, 0);
    for (std::size_t t = 1; t <= o.t_max; ++t) {
        const bool active = t >= o.burn_in;
        step_particles(particles, o.kind, active, stats, o.workers);
        if (!active) continue;

        sorted = stats;
        // (exceed + 1)-th largest value
        const auto nth = sorted.begin() + static_cast<std::ptrdiff_t>(exceed);
        std::nth_element(sorted.begin(), nth, sorted.end(), std::greater<>());
        const double threshold =
            attainable_threshold(*nth, o.alpha, stats.size(), [&](double level) {
                return static_cast<std::size_t>(std::count_if(
                    stats.begin(), stats.end(), [level](double v) { return v > level; }));
            });
        table.thresholds.push_back(threshold);

        for (std::size_t i = 0; i < stats.size(); ++i) hit[i] = stats[i] > threshold ? 1 : 0;
        resample(particles, hit, o.seed, t);
    }
    return table;
}

}  // namespace

double detection_score(const SplitMax& split) noexcept {
    return split.statistic + kTieBreakWeight * split.mean_split;
}

const char* to_string(CalibrationMethod method) noexcept {
    return method == CalibrationMethod::kRemoval ? "removal" : "resampling";
}

CalibrationMethod parse_calibration_method(const std::string& name) {
    if (name == "removal") return CalibrationMethod::kRemoval;
    if (name == "resampling") return CalibrationMethod::kResampling;
    fail(ErrorCode::kFormat, "unknown calibration method '" + name + "'");
}

double ThresholdTable::threshold_at(std::size_t t) const {
    require(t >= burn_in, ErrorCode::kInvalidArgument, "no threshold before burn_in");
    require(!thresholds.empty(), ErrorCode::kMissingThresholds, "threshold table is empty");
    const std::size_t index = std::min(t, t_max) - burn_in;
    return thresholds[index];
}

void ThresholdTable::validate() const {
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::kFormat, "table alpha must lie in (0, 1)");
    require(burn_in >= 2 * kMinSegment, ErrorCode::kFormat, "table burn_in too small");
    require(t_max > burn_in, ErrorCode::kFormat, "table t_max must exceed burn_in");
    require(thresholds.size() == t_max - burn_in + 1, ErrorCode::kFormat,
            "table must hold t_max - burn_in + 1 thresholds");
    for (double h : thresholds) {
        require(std::isfinite(h) && h > 0.0, ErrorCode::kFormat,
                "thresholds must be finite and positive");
    }
    SplitScanner probe(test_kind);
}

DetectorState::DetectorState(ThresholdTable table)
    : table_(std::move(table)), scanner_(table_.test_kind) {
    table_.validate();
}

std::optional<Detection> DetectorState::push(double x) {
    if (status_ == DetectorStatus::kChangeDetected) {
        fail(ErrorCode::kDetectorFinished, "detector already signalled a change");
    }
    scanner_.push(x);  // validates x before mutating
    const std::size_t t = scanner_.size();
    if (t < table_.burn_in) {
        return std::nullopt;
    }
    const SplitMax best = scanner_.scan();
    if (detection_score(best) > table_.threshold_at(t)) {
        status_ = DetectorStatus::kChangeDetected;
        detection_ = Detection{t, best.k_hat, best.statistic};
        return detection_;
    }
    return std::nullopt;
}

SplitMax max_split_statistic(std::span<const double> observations, TestKind kind) {
    SplitScanner scanner(kind);
    scanner.reserve(observations.size());
    for (double x : observations) {
        scanner.push(x);
    }
    return scanner.scan();
}

ThresholdTable calibrate_thresholds(const CalibrationOptions& options) {
    check_options(options);
    const double horizon = static_cast<double>(options.t_max - options.burn_in + 1);
    const double survival = std::pow(1.0 - options.alpha, horizon);
    return survival >= 0.5 ? calibrate_by_removal(options) : calibrate_by_resampling(options);
}

NullRateProfile estimate_null_rates(const ThresholdTable& table, std::size_t streams,
                                    std::uint64_t seed, unsigned workers) {
    table.validate();
    require(streams >= 1, ErrorCode::kInvalidArgument, "need at least one stream");
    std::vector<Particle> particles = make_particles(table.test_kind, streams, table.t_max, seed);

    NullRateProfile profile;
    profile.burn_in = table.burn_in;
    profile.streams = streams;
    std::vector<double> stats(streams, 0.0);
    std::vector<char> hit(streams, 0);
    double survival = 1.0;
    for (std::size_t t = 1; t <= table.t_max; ++t) {
        const bool active = t >= table.burn_in;
        step_particles(particles, table.test_kind, active, stats, workers);
        if (!active) continue;

        const double threshold = table.threshold_at(t);
        std::size_t detected = 0;
        for (std::size_t i = 0; i < streams; ++i) {
            hit[i] = stats[i] > threshold ? 1 : 0;
            detected += hit[i];
        }
        const double rate = static_cast<double>(detected) / static_cast<double>(streams);
        profile.cumulative_before.push_back(1.0 - survival);
        profile.conditional_rate.push_back(rate);
        survival *= 1.0 - rate;
        if (t < table.t_max) resample(particles, hit, seed, t);
    }
    return profile;
}

}  // namespace confdrift
