#include "cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "confdrift/auditor.hpp"
#include "confdrift/changepoint.hpp"
#include "confdrift/cpm_experiment.hpp"
#include "confdrift/error.hpp"
#include "confdrift/label_outliers.hpp"
#include "confdrift/serialization.hpp"
#include "confdrift/simlab.hpp"

namespace confdrift::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kCacheEnv = "CONFDRIFT_CACHE_DIR";

struct Context {
    std::istream& in;
    std::ostream& out;
    std::shared_ptr<spdlog::logger> log;
    unsigned workers = 0;
};

const CLI::Validator kOpenUnit(
    [](std::string& text) -> std::string {
        double v = 0.0;
        if (!CLI::detail::lexical_cast(text, v) || !(v > 0.0 && v < 1.0)) {
            return "value must lie strictly between 0 and 1";
        }
        return {};
    },
    "(0,1)");

const CLI::Validator kTestKind(
    [](std::string& text) -> std::string {
        try {
            parse_test_kind(text);
        } catch (const Error& e) {
            return e.what();
        }
        return {};
    },
    "KIND");

// Reads flat key = value files as if every key sat under the section of the
// selected subcommand; explicit [section] headers still work.
class SubcommandConfig : public CLI::ConfigTOML {
public:
    std::string section;

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        std::vector<CLI::ConfigItem> items = CLI::ConfigTOML::from_config(input);
        if (section.empty()) return items;
        for (CLI::ConfigItem& item : items) {
            if (!item.parents.empty() || item.name == "workers" || item.name == "log-level") continue;
            if (item.name == "++" || item.name == "--") continue;
            item.parents = {section};
        }
        return items;
    }
};

// Writes to `path`, or to the context's stdout when path is empty or "-".
void emit(Context& ctx, const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        ctx.out << text;
        return;
    }
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream file(p, std::ios::binary | std::ios::trunc);
    if (!file) fail(ErrorCode::kIo, "cannot write '" + path + "'");
    file << text;
}

void emit_json(Context& ctx, const std::string& path, const Json& doc) {
    if (path.empty() || path == "-") {
        ctx.out << doc.dump(2) << '\n';
    } else {
        write_json_file(path, doc);
    }
}

RecordLog read_log(Context& ctx, const std::string& path) {
    if (path == "-") return read_records(ctx.in);
    return read_records_file(path);
}

void check_malformed(Context& ctx, const RecordLog& log, double max_fraction, const std::string& path) {
    for (const std::string& e : log.first_errors) ctx.log->warn("{}: {}", path, e);
    if (log.malformed > 0) {
        ctx.log->warn("{}: skipped {} of {} lines", path, log.malformed, log.lines);
    }
    if (log.malformed_fraction() > max_fraction) {
        fail(ErrorCode::kFormat, path + ": " + std::to_string(log.malformed) + " of " +
                                     std::to_string(log.lines) + " lines are malformed (limit " +
                                     Json(max_fraction).dump() + ")");
    }
}

std::optional<fs::path> resolve_cache_dir(const std::string& flag) {
    if (!flag.empty()) return fs::path(flag);
    if (const char* env = std::getenv(kCacheEnv); env != nullptr && *env != '\0') return fs::path(env);
    return std::nullopt;
}

ThresholdTable calibrate_with_cache(Context& ctx, const CalibrationOptions& options,
                                    const std::optional<fs::path>& cache_dir) {
    if (!cache_dir) {
        ctx.log->info("calibrating {} thresholds (no cache directory)", to_string(options.kind));
        return calibrate_thresholds(options);
    }
    const CachedCalibration cached = calibrate_cached(options, *cache_dir);
    if (cached.reused) {
        ctx.log->info("reusing cached thresholds {}", cached.path.string());
    } else {
        ctx.log->info("calibrated and cached thresholds {}", cached.path.string());
    }
    ctx.out << "cache: " << cached.path.string() << '\n';
    return cached.table;
}

std::vector<double> parse_number_list(const std::string& text, char separator) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, separator)) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            fail(ErrorCode::kInvalidArgument, "invalid number '" + item + "'");
        }
        values.push_back(v);
    }
    return values;
}

std::vector<double> make_grid(double lo, double hi, double step) {
    require(step > 0.0 && lo >= 0.0 && hi <= 1.0 && lo <= hi, ErrorCode::kInvalidArgument,
            "grid needs 0 <= grid-min <= grid-max <= 1 and a positive step");
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> grid;
    for (std::size_t i = 0; i < n; ++i) {
        // Rounded so the JSON shows 0.07 rather than 0.07000000000000001.
        grid.push_back(std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9);
    }
    return grid;
}

// ---------------------------------------------------------------- calibrate

struct CalibrateArgs {
    std::string kind = "cvm";
    double alpha = 0.05;
    std::size_t t_max = 200;
    std::size_t replications = 10000;
    std::uint64_t seed = 1;
    std::size_t burn_in = kDefaultBurnIn;
    std::string out;
    std::string cache_dir;
    std::size_t validate_streams = 0;
    std::uint64_t validate_seed = 2;
    std::string validate_out;
};

int run_calibrate(Context& ctx, const CalibrateArgs& a) {
    CalibrationOptions options;
    options.kind = parse_test_kind(a.kind);
    options.alpha = a.alpha;
    options.t_max = a.t_max;
    options.replications = a.replications;
    options.seed = a.seed;
    options.burn_in = a.burn_in;
    options.workers = ctx.workers;
    const ThresholdTable table = calibrate_with_cache(ctx, options, resolve_cache_dir(a.cache_dir));
    save_threshold_table(a.out, table);
    ctx.log->info("wrote {} ({} thresholds, {} calibration)", a.out, table.thresholds.size(),
                  to_string(table.method));

    if (a.validate_streams > 0) {
        const NullRateProfile profile = estimate_null_rates(table, a.validate_streams, a.validate_seed, ctx.workers);
        const auto [lo, hi] = std::minmax_element(profile.conditional_rate.begin(), profile.conditional_rate.end());
        ctx.log->info("null validation over {} streams: conditional rate in [{}, {}]", a.validate_streams, *lo, *hi);
        emit_json(ctx, a.validate_out, to_json(profile));
    }
    return kOk;
}

// ----------------------------------------------------------------- baseline

struct BaselineArgs {
    std::string input;
    std::string out;
    double max_malformed = 0.01;
};

int run_baseline(Context& ctx, const BaselineArgs& a) {
    const RecordLog log = read_log(ctx, a.input);
    check_malformed(ctx, log, a.max_malformed, a.input);
    const BaselineProfile profile = build_baseline(log.records, a.input == "-" ? "stdin" : fs::path(a.input).filename().string());
    save_baseline(a.out, profile);
    ctx.log->info("baseline of {} records over {} labels written to {}", profile.total,
                  profile.label_counts.size(), a.out);
    return kOk;
}

// -------------------------------------------------------------------- audit

struct AuditArgs {
    std::string baseline;
    std::string production;
    std::string kind = "ks";
    double alpha = 0.05;
    std::string mode = "both";
    std::string out;
    std::string csv;
    double max_malformed = 0.01;
};

int run_audit(Context& ctx, const AuditArgs& a) {
    const BaselineProfile profile = load_baseline(a.baseline);
    const RecordLog log = read_log(ctx, a.production);
    check_malformed(ctx, log, a.max_malformed, a.production);

    AuditOptions options;
    options.kind = parse_test_kind(a.kind);
    options.alpha = a.alpha;
    options.mode = parse_audit_mode(a.mode);
    AuditReport report = audit_batch(profile, log.records, options);
    report.malformed_lines = log.malformed;

    emit_json(ctx, a.out, to_json(report));
    if (!a.csv.empty()) {
        std::ostringstream csv;
        write_audit_csv(csv, report);
        emit(ctx, a.csv, csv.str());
    }
    if (report.drift_alert) ctx.log->warn("drift alert");
    return report.drift_alert ? kDriftAlert : kOk;
}

// ------------------------------------------------------------------ monitor

struct MonitorArgs {
    std::string baseline;
    std::string thresholds;
    std::string input = "-";
    std::string out;
};

int run_monitor(Context& ctx, const MonitorArgs& a) {
    const BaselineProfile profile = load_baseline(a.baseline);
    ConfidenceMonitor monitor(profile, load_threshold_table(a.thresholds));

    std::ofstream file;
    if (!a.out.empty() && a.out != "-") {
        const fs::path p(a.out);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        file.open(p, std::ios::binary | std::ios::trunc);
        if (!file) fail(ErrorCode::kIo, "cannot write '" + a.out + "'");
    }
    std::ostream& events = file.is_open() ? static_cast<std::ostream&>(file) : ctx.out;

    std::ifstream input_file;
    if (a.input != "-") {
        input_file.open(a.input);
        if (!input_file) fail(ErrorCode::kIo, "cannot open '" + a.input + "'");
    }
    std::istream& input = input_file.is_open() ? static_cast<std::istream&>(input_file) : ctx.in;

    std::string line;
    std::size_t line_number = 0;
    while (std::getline(input, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ConfidenceRecord record;
        try {
            record = parse_record(line);
        } catch (const Error& e) {
            events << Json{{"status", "warning"}, {"line", line_number}, {"error", e.what()}}.dump() << '\n';
            continue;
        }
        const auto detection = monitor.push(record);
        if (detection) {
            events << Json{{"status", "change"},
                           {"t", detection->t_detect},
                           {"k_hat", detection->k_hat},
                           {"statistic", detection->statistic},
                           {"id", record.id}}
                          .dump()
                   << '\n';
            events.flush();
            ctx.log->warn("change detected at t={} (k_hat={})", detection->t_detect, detection->k_hat);
            return kDriftAlert;
        }
        events << Json{{"status", "monitoring"}, {"t", monitor.detector().t()}, {"id", record.id}}.dump() << '\n';
    }
    return kOk;
}

// ----------------------------------------------------------------- outliers

struct OutlierArgs {
    std::string input;
    std::string counts;
    std::string out;
    double eps = 0.0;
    std::size_t min_pts = 2;
    double max_malformed = 0.01;
};

int run_outliers(Context& ctx, const OutlierArgs& a) {
    LabelHistogram histogram;
    if (!a.counts.empty()) {
        std::ifstream file;
        std::istream* in = &ctx.in;
        if (a.counts != "-") {
            file.open(a.counts);
            if (!file) fail(ErrorCode::kIo, "cannot open '" + a.counts + "'");
            in = &file;
        }
        histogram = read_label_counts_csv(*in);
    } else {
        const RecordLog log = read_log(ctx, a.input);
        check_malformed(ctx, log, a.max_malformed, a.input);
        histogram = LabelHistogram::from_records(log.records);
    }
    std::vector<OutlierFlags> flags = check_label_distribution(histogram);
    if (a.eps > 0.0 || a.min_pts != 2) {
        for (OutlierFlags& f : flags) {
            if (f.method == OutlierMethod::kDbScan1D) {
                f = dbscan_1d_outliers(histogram, a.eps > 0.0 ? std::optional<double>(a.eps) : std::nullopt, a.min_pts);
            }
        }
    }
    emit_json(ctx, a.out, to_json(flags, histogram));
    return kOk;
}

// ----------------------------------------------------------------- simulate

struct SimulateArgs {
    std::uint64_t seed = 1;
    std::size_t outer_classes = 4;
    double radius = 6.0;
    double sigma = 1.0;
    std::string class_means;   // "x,y;x,y;..." overrides the ring
    std::string class_sigmas;  // "s0,s1,..."
    std::size_t records_per_class = 500;
    std::string drift = "held-out-class";
    std::vector<std::size_t> held_out{0};
    std::size_t feature = 0;
    double quantile = 0.9;
    double multiplier = 2.0;
    std::size_t pool_size = 1000;
    double ood_sigma = 3.0;
    bool null_drift = false;
    std::size_t epochs = 200;
    double learning_rate = 0.5;
    double noise_level = 0.0;
    std::size_t baseline_per_class = 500;
    std::size_t production_per_class = 2500;
    std::string kind = "ks";
    double alpha = 0.05;
    std::string mode = "both";
    std::size_t batch_size = 1000;
    std::size_t iterations = kMinSearchIterations;
    double grid_min = 0.01;
    double grid_max = 0.25;
    double grid_step = 0.01;
    std::string out;
    std::string heatmap;
};

SimulationConfig simulation_config(const SimulateArgs& a, unsigned workers) {
    SimulationConfig c = default_simulation(a.seed);
    if (a.class_means.empty()) {
        c.mixture = ring_mixture(a.outer_classes, a.radius, a.sigma, a.records_per_class, a.seed);
    } else {
        MixtureSpec m;
        std::stringstream ss(a.class_means);
        std::string item;
        while (std::getline(ss, item, ';')) {
            if (item.find_first_not_of(" \t") != std::string::npos) m.class_means.push_back(parse_number_list(item, ','));
        }
        m.num_classes = m.class_means.size();
        m.dimension = m.class_means.empty() ? 0 : m.class_means.front().size();
        m.class_sigmas = a.class_sigmas.empty() ? std::vector<double>(m.num_classes, a.sigma)
                                                : parse_number_list(a.class_sigmas, ',');
        m.records_per_class = a.records_per_class;
        m.seed = a.seed;
        m.validate();
        c.mixture = m;
    }
    c.drift.kind = parse_drift_kind(a.drift);
    c.drift.held_out_classes = a.held_out;
    c.drift.feature = a.feature;
    c.drift.quantile = a.quantile;
    c.drift.multiplier = a.multiplier;
    c.drift.pool_size = a.pool_size;
    if (c.drift.kind == DriftKind::kOutOfDomain) {
        MixtureSpec ood;
        ood.num_classes = 2;
        ood.dimension = c.mixture.dimension;
        ood.class_means.assign(2, FeatureVector(c.mixture.dimension, 0.0));
        ood.class_sigmas.assign(2, a.ood_sigma);
        ood.records_per_class = (a.pool_size + 1) / 2;
        c.drift.alternative = ood;
    }
    c.drift.validate(c.mixture.dimension);
    c.null_drift = a.null_drift;
    c.training.epochs = a.epochs;
    c.training.learning_rate = a.learning_rate;
    c.training.noise_level = a.noise_level;
    c.baseline_per_class = a.baseline_per_class;
    c.production_per_class = a.production_per_class;
    c.search.audit.kind = parse_test_kind(a.kind);
    c.search.audit.alpha = a.alpha;
    c.search.audit.mode = parse_audit_mode(a.mode);
    c.search.batch_size = a.batch_size;
    c.search.iterations = a.iterations;
    c.search.grid = make_grid(a.grid_min, a.grid_max, a.grid_step);
    c.search.workers = workers;
    return c;
}

int run_simulate(Context& ctx, const SimulateArgs& a) {
    const SimulationConfig config = simulation_config(a, ctx.workers);
    ctx.log->info("simulating {} drift: {} fractions x {} iterations", to_string(config.drift.kind),
                  config.search.grid.size(), config.search.iterations);
    const SimulationReport report = run_simulation(config);
    emit_json(ctx, a.out, to_json(report));
    if (!a.heatmap.empty()) {
        std::ostringstream csv;
        write_heatmap_csv(csv, report.search);
        emit(ctx, a.heatmap, csv.str());
    }
    const auto& minimal = report.search.all_minimal;
    ctx.log->info("label-agnostic minimal drift fraction: {}", minimal ? Json(*minimal).dump() : "not detected");
    return kOk;
}

// ----------------------------------------------------------- cpm-experiment

struct CpmArgs {
    std::uint64_t seed = 1;
    std::size_t replications = 300;
    std::size_t sample_size = 20;
    std::size_t clean_samples = 50;
    std::size_t ramp_samples = 20;
    std::size_t total_samples = 120;
    std::vector<std::string> methods{"cpm-t", "cpm-lepage", "cpm-cvm", "splits-t", "pairs-t"};
    std::size_t outer_classes = 4;
    double radius = 6.0;
    double sigma = 1.0;
    double drift_sigma = 3.0;
    std::size_t training_per_class = 500;
    std::size_t pool_per_class = 500;
    std::size_t drift_pool_size = 2000;
    std::size_t epochs = 200;
    double learning_rate = 0.5;
    double cpm_alpha = 1e-5;
    std::size_t cpm_t_max = 200;
    std::size_t cpm_replications = 200000;
    std::uint64_t calibration_seed = 1;
    double naive_alpha = 0.05;
    std::string cache_dir;
    std::string out;
    std::string summary_csv;
    std::string histogram_csv;
};

int run_cpm(Context& ctx, const CpmArgs& a) {
    CpmExperimentConfig c;
    c.protocol.seed = a.seed;
    c.protocol.replications = a.replications;
    c.protocol.sample_size = a.sample_size;
    c.protocol.clean_samples = a.clean_samples;
    c.protocol.ramp_samples = a.ramp_samples;
    c.protocol.total_samples = a.total_samples;
    c.protocol.validate();
    c.methods.clear();
    for (const std::string& m : a.methods) c.methods.push_back(parse_detection_method(m));
    c.outer_classes = a.outer_classes;
    c.radius = a.radius;
    c.sigma = a.sigma;
    c.drift_sigma = a.drift_sigma;
    c.training_per_class = a.training_per_class;
    c.pool_per_class = a.pool_per_class;
    c.drift_pool_size = a.drift_pool_size;
    c.training.epochs = a.epochs;
    c.training.learning_rate = a.learning_rate;
    c.cpm_alpha = a.cpm_alpha;
    c.cpm_t_max = a.cpm_t_max;
    c.cpm_replications = a.cpm_replications;
    c.calibration_seed = a.calibration_seed;
    c.naive_alpha = a.naive_alpha;
    c.workers = ctx.workers;

    const auto cache_dir = resolve_cache_dir(a.cache_dir);
    const CpmExperimentReport report = run_cpm_experiment(
        c, [&](const CalibrationOptions& o) { return calibrate_with_cache(ctx, o, cache_dir); });

    emit_json(ctx, a.out, to_json(report));
    if (!a.summary_csv.empty()) {
        std::ostringstream csv;
        write_summary_csv(csv, report.summary);
        emit(ctx, a.summary_csv, csv.str());
    }
    if (!a.histogram_csv.empty()) {
        std::ostringstream csv;
        write_histogram_csv(csv, report.summary);
        emit(ctx, a.histogram_csv, csv.str());
    }
    for (const MethodSummary& s : report.summary.methods) {
        ctx.log->info("{}: Pr(t<={})={} detections={}", to_string(s.method), c.protocol.clean_samples,
                      s.pr_detection_before, s.detections);
    }
    return kOk;
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err, const std::string& level) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    sink->set_pattern("confdrift: %l: %v");
    auto logger = std::make_shared<spdlog::logger>("confdrift", sink);
    logger->set_level(spdlog::level::from_str(level));
    return logger;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Confidence-based data drift detection", "confdrift"};
    app.require_subcommand(1);
    app.fallthrough();
    app.allow_config_extras(CLI::config_extras_mode::error);
    auto config = std::make_shared<SubcommandConfig>();
    app.config_formatter(config);
    app.set_config("--config", "", "Key = value file for the chosen subcommand; flags override it");
    app.set_version_flag("--version", "confdrift 0.1.0");

    unsigned workers = 0;
    std::string log_level = "warn";
    app.add_option("--workers", workers, "Worker threads (0 = available parallelism)");
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    CalibrateArgs cal;
    auto* calibrate = app.add_subcommand("calibrate", "Monte Carlo CPM threshold calibration");
    calibrate->add_option("--kind", cal.kind, "t, cvm, ks or lepage")->check(kTestKind)->capture_default_str();
    calibrate->add_option("--alpha", cal.alpha, "Conditional false-alarm rate per observation")->check(kOpenUnit)->capture_default_str();
    calibrate->add_option("--t-max", cal.t_max, "Last calibrated time index")->capture_default_str();
    calibrate->add_option("--replications", cal.replications, "Null streams")->check(CLI::Range(std::size_t{1000}, std::size_t{1} << 32))->capture_default_str();
    calibrate->add_option("--seed", cal.seed)->capture_default_str();
    calibrate->add_option("--burn-in", cal.burn_in)->check(CLI::Range(std::size_t{4}, std::size_t{1} << 20))->capture_default_str();
    calibrate->add_option("--out", cal.out, "Threshold table JSON")->required();
    calibrate->add_option("--cache-dir", cal.cache_dir, std::string("Calibration cache (default: $") + kCacheEnv + ")");
    calibrate->add_option("--validate-streams", cal.validate_streams, "Fresh null streams for a conditional-rate check");
    calibrate->add_option("--validate-seed", cal.validate_seed)->capture_default_str();
    calibrate->add_option("--validate-out", cal.validate_out, "Null-rate profile JSON (default stdout)");

    BaselineArgs base;
    auto* baseline = app.add_subcommand("baseline", "Build a baseline profile from a confidence log");
    baseline->add_option("--input", base.input, "JSONL confidence log ('-' for stdin)")->required();
    baseline->add_option("--out", base.out, "Baseline profile JSON")->required();
    baseline->add_option("--max-malformed", base.max_malformed, "Largest tolerated fraction of bad lines")->check(CLI::Range(0.0, 1.0))->capture_default_str();

    AuditArgs aud;
    auto* audit = app.add_subcommand("audit", "Compare a production batch against a baseline");
    audit->add_option("--baseline", aud.baseline, "Baseline profile JSON")->required();
    audit->add_option("--production", aud.production, "JSONL confidence log ('-' for stdin)")->required();
    audit->add_option("--kind", aud.kind, "t, ks, cvm, mw, mood or lepage")->check(kTestKind)->capture_default_str();
    audit->add_option("--alpha", aud.alpha)->check(kOpenUnit)->capture_default_str();
    audit->add_option("--mode", aud.mode)->check(CLI::IsMember({"label-agnostic", "per-label", "both"}))->capture_default_str();
    audit->add_option("--out", aud.out, "Report JSON (default stdout)");
    audit->add_option("--csv", aud.csv, "Report CSV");
    audit->add_option("--max-malformed", aud.max_malformed)->check(CLI::Range(0.0, 1.0))->capture_default_str();

    MonitorArgs mon;
    auto* monitor = app.add_subcommand("monitor", "Sequential change-point monitoring of a confidence stream");
    monitor->add_option("--baseline", mon.baseline, "Baseline profile JSON")->required();
    monitor->add_option("--thresholds", mon.thresholds, "Threshold table JSON")->required();
    monitor->add_option("--input", mon.input, "JSONL stream ('-' for stdin)")->capture_default_str();
    monitor->add_option("--out", mon.out, "Event log JSONL (default stdout)");

    OutlierArgs outl;
    auto* outliers = app.add_subcommand("outliers", "Outlier checks on the per-label record counts");
    auto* input_opt = outliers->add_option("--input", outl.input, "JSONL confidence log");
    auto* counts_opt = outliers->add_option("--counts", outl.counts, "CSV of label,count");
    input_opt->excludes(counts_opt);
    outliers->add_option("--out", outl.out, "Flags JSON (default stdout)");
    outliers->add_option("--eps", outl.eps, "DBSCAN radius (default max(0.1 * median, 1))")->check(CLI::NonNegativeNumber);
    outliers->add_option("--min-pts", outl.min_pts)->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20))->capture_default_str();
    outliers->add_option("--max-malformed", outl.max_malformed)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    outliers->callback([&] {
        if (outl.input.empty() && outl.counts.empty()) throw CLI::RequiredError("--input or --counts");
    });

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Drift injection and minimal-drift search");
    simulate->add_option("--seed", sim.seed)->capture_default_str();
    simulate->add_option("--outer-classes", sim.outer_classes)->capture_default_str();
    simulate->add_option("--radius", sim.radius)->capture_default_str();
    simulate->add_option("--sigma", sim.sigma)->capture_default_str();
    simulate->add_option("--class-means", sim.class_means, "Explicit means 'x,y;x,y;...' (replaces the ring)");
    simulate->add_option("--class-sigmas", sim.class_sigmas, "Per-class sigmas 's0,s1,...'");
    simulate->add_option("--records-per-class", sim.records_per_class)->capture_default_str();
    simulate->add_option("--drift", sim.drift, "held-out-class, selection-criteria, out-of-domain, random-legal, feature-function or 1-5")->capture_default_str();
    simulate->add_option("--held-out", sim.held_out)->capture_default_str();
    simulate->add_option("--feature", sim.feature)->capture_default_str();
    simulate->add_option("--quantile", sim.quantile)->capture_default_str();
    simulate->add_option("--multiplier", sim.multiplier)->capture_default_str();
    simulate->add_option("--pool-size", sim.pool_size)->capture_default_str();
    simulate->add_option("--ood-sigma", sim.ood_sigma)->capture_default_str();
    simulate->add_flag("--null-drift", sim.null_drift, "Control run with a clean pool posing as drift");
    simulate->add_option("--epochs", sim.epochs)->capture_default_str();
    simulate->add_option("--learning-rate", sim.learning_rate)->capture_default_str();
    simulate->add_option("--noise-level", sim.noise_level)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    simulate->add_option("--baseline-per-class", sim.baseline_per_class)->capture_default_str();
    simulate->add_option("--production-per-class", sim.production_per_class)->capture_default_str();
    simulate->add_option("--kind", sim.kind)->check(kTestKind)->capture_default_str();
    simulate->add_option("--alpha", sim.alpha)->check(kOpenUnit)->capture_default_str();
    simulate->add_option("--mode", sim.mode)->check(CLI::IsMember({"label-agnostic", "per-label", "both"}))->capture_default_str();
    simulate->add_option("--batch-size", sim.batch_size)->capture_default_str();
    simulate->add_option("--iterations", sim.iterations)->check(CLI::Range(kMinSearchIterations, std::size_t{1} << 20))->capture_default_str();
    simulate->add_option("--grid-min", sim.grid_min)->capture_default_str();
    simulate->add_option("--grid-max", sim.grid_max)->capture_default_str();
    simulate->add_option("--grid-step", sim.grid_step)->capture_default_str();
    simulate->add_option("--out", sim.out, "Result JSON (default stdout)");
    simulate->add_option("--heatmap", sim.heatmap, "Heatmap CSV");

    CpmArgs cpm;
    auto* cpm_cmd = app.add_subcommand("cpm-experiment", "Ramped-drift comparison of CPM and naive T tests");
    cpm_cmd->add_option("--seed", cpm.seed)->capture_default_str();
    cpm_cmd->add_option("--replications", cpm.replications)->capture_default_str();
    cpm_cmd->add_option("--sample-size", cpm.sample_size)->capture_default_str();
    cpm_cmd->add_option("--clean-samples", cpm.clean_samples)->capture_default_str();
    cpm_cmd->add_option("--ramp-samples", cpm.ramp_samples)->capture_default_str();
    cpm_cmd->add_option("--total-samples", cpm.total_samples)->capture_default_str();
    cpm_cmd->add_option("--methods", cpm.methods, "cpm-t, cpm-lepage, cpm-cvm, cpm-ks, splits-t, pairs-t")
        ->check(CLI::IsMember({"cpm-t", "cpm-lepage", "cpm-cvm", "cpm-ks", "splits-t", "pairs-t"}))
        ->capture_default_str();
    cpm_cmd->add_option("--outer-classes", cpm.outer_classes)->capture_default_str();
    cpm_cmd->add_option("--radius", cpm.radius)->capture_default_str();
    cpm_cmd->add_option("--sigma", cpm.sigma)->capture_default_str();
    cpm_cmd->add_option("--drift-sigma", cpm.drift_sigma)->capture_default_str();
    cpm_cmd->add_option("--training-per-class", cpm.training_per_class)->capture_default_str();
    cpm_cmd->add_option("--pool-per-class", cpm.pool_per_class)->capture_default_str();
    cpm_cmd->add_option("--drift-pool-size", cpm.drift_pool_size)->capture_default_str();
    cpm_cmd->add_option("--epochs", cpm.epochs)->capture_default_str();
    cpm_cmd->add_option("--learning-rate", cpm.learning_rate)->capture_default_str();
    cpm_cmd->add_option("--cpm-alpha", cpm.cpm_alpha)->check(kOpenUnit)->capture_default_str();
    cpm_cmd->add_option("--cpm-t-max", cpm.cpm_t_max)->capture_default_str();
    cpm_cmd->add_option("--cpm-replications", cpm.cpm_replications)->capture_default_str();
    cpm_cmd->add_option("--calibration-seed", cpm.calibration_seed)->capture_default_str();
    cpm_cmd->add_option("--naive-alpha", cpm.naive_alpha)->check(kOpenUnit)->capture_default_str();
    cpm_cmd->add_option("--cache-dir", cpm.cache_dir, std::string("Calibration cache (default: $") + kCacheEnv + ")");
    cpm_cmd->add_option("--out", cpm.out, "Result JSON (default stdout)");
    cpm_cmd->add_option("--summary-csv", cpm.summary_csv, "Per-method summary CSV");
    cpm_cmd->add_option("--histogram-csv", cpm.histogram_csv, "Detection-time histogram CSV");

    for (const std::string& a : args) {
        if (app.get_subcommand_no_throw(a) != nullptr) {
            config->section = a;
            break;
        }
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << "confdrift 0.1.0\n";
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "confdrift: " << e.what() << '\n';
        return kUsage;
    }

    Context ctx{in, out, make_logger(err, log_level), workers};
    try {
        if (*calibrate) return run_calibrate(ctx, cal);
        if (*baseline) return run_baseline(ctx, base);
        if (*audit) return run_audit(ctx, aud);
        if (*monitor) return run_monitor(ctx, mon);
        if (*outliers) return run_outliers(ctx, outl);
        if (*simulate) return run_simulate(ctx, sim);
        if (*cpm_cmd) return run_cpm(ctx, cpm);
    } catch (const Error& e) {
        ctx.log->error("{}", e.what());
        return e.code() == ErrorCode::kInvalidArgument ? kUsage : kRuntime;
    } catch (const std::exception& e) {
        ctx.log->error("{}", e.what());
        return kRuntime;
    }
    return kUsage;
}

}  // namespace confdrift::cli
