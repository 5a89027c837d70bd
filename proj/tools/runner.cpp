#include "runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>

#include "nopo/analysis.hpp"
#include "nopo/error.hpp"
#include "nopo/fockspace.hpp"
#include "nopo/qsd.hpp"
#include "nopo/semiclassical.hpp"

#ifndef NOPO_VERSION
#define NOPO_VERSION "0.0.0"
#endif

namespace nopo::cli {
namespace {

using json = nlohmann::json;
using cd = std::complex<double>;

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view what) {
    throw ValidationError("invalid value for key " + std::string(key) + ": '" +
                          std::string(value) + "' (" + std::string(what) + ")");
}

double parse_double(std::string_view key, std::string_view value) {
    value = trim(value);
    double x = 0.0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, x);
    if (ec != std::errc{} || ptr != end || value.empty()) bad_value(key, value, "expected a number");
    return x;
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view value) {
    value = trim(value);
    std::uint64_t x = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, x);
    if (ec != std::errc{} || ptr != end || value.empty())
        bad_value(key, value, "expected a nonnegative integer");
    return x;
}

int parse_int(std::string_view key, std::string_view value) {
    const auto x = parse_unsigned(key, value);
    if (x > static_cast<std::uint64_t>(std::numeric_limits<int>::max()))
        bad_value(key, value, "out of range");
    return static_cast<int>(x);
}

bool parse_bool(std::string_view key, std::string_view value) {
    value = trim(value);
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, value, "expected true or false");
}

std::vector<double> parse_list(std::string_view key, std::string_view value) {
    std::vector<double> out;
    value = trim(value);
    if (value.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = value.find(',', start);
        out.push_back(parse_double(key, value.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

cd parse_complex(std::string_view key, std::string_view value) {
    const auto parts = parse_list(key, value);
    if (parts.size() != 2) bad_value(key, value, "expected re,im");
    return {parts[0], parts[1]};
}

std::string format_list(const std::vector<double>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ',';
        s += format_double(xs[i]);
    }
    return s;
}

struct Field {
    const char* name;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define NOPO_DOUBLE(key, member)                                                         \
    Field {                                                                              \
        key, [](RunConfig& c, std::string_view v) { c.member = parse_double(key, v); }, \
            [](const RunConfig& c) { return format_double(c.member); }                   \
    }
#define NOPO_UNSIGNED(key, member)                                                         \
    Field {                                                                                \
        key, [](RunConfig& c, std::string_view v) { c.member = parse_unsigned(key, v); }, \
            [](const RunConfig& c) { return std::to_string(c.member); }                    \
    }
#define NOPO_INT(key, member)                                                         \
    Field {                                                                           \
        key, [](RunConfig& c, std::string_view v) { c.member = parse_int(key, v); }, \
            [](const RunConfig& c) { return std::to_string(c.member); }               \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table{
        {"scenario", [](RunConfig& c, std::string_view v) { c.scenario = std::string(trim(v)); },
         [](const RunConfig& c) { return c.scenario; }},
        NOPO_DOUBLE("gamma1", params.gamma1),
        NOPO_DOUBLE("gamma2", params.gamma2),
        NOPO_DOUBLE("delta1", params.delta1),
        NOPO_DOUBLE("delta2", params.delta2),
        NOPO_DOUBLE("chi", params.chi),
        NOPO_DOUBLE("epsilon", params.epsilon),
        NOPO_DOUBLE("lambda", params.lambda),
        NOPO_DOUBLE("epsilon_ratio", epsilon_ratio),
        NOPO_DOUBLE("quantum_lambda", quantum_lambda),
        {"desk_scale", [](RunConfig& c, std::string_view v) { c.desk_scale = std::string(trim(v)); },
         [](const RunConfig& c) { return c.desk_scale; }},
        NOPO_DOUBLE("sc_dt", sc_dt),
        NOPO_DOUBLE("sc_t_end", sc_t_end),
        NOPO_UNSIGNED("sc_record_stride", sc_record_stride),
        NOPO_DOUBLE("transient_fraction", transient_fraction),
        NOPO_DOUBLE("epsilon_min", epsilon_min),
        NOPO_DOUBLE("epsilon_max", epsilon_max),
        NOPO_UNSIGNED("epsilon_steps", epsilon_steps),
        NOPO_INT("n_max1", n_max1),
        NOPO_INT("n_max2", n_max2),
        NOPO_DOUBLE("dt", dt),
        NOPO_DOUBLE("t_end", t_end),
        NOPO_UNSIGNED("record_stride", record_stride),
        NOPO_UNSIGNED("seed", seed),
        {"snapshot_times",
         [](RunConfig& c, std::string_view v) { c.snapshot_times = parse_list("snapshot_times", v); },
         [](const RunConfig& c) { return format_list(c.snapshot_times); }},
        NOPO_UNSIGNED("n_traj", n_traj),
        {"strict_truncation",
         [](RunConfig& c, std::string_view v) { c.strict_truncation = parse_bool("strict_truncation", v); },
         [](const RunConfig& c) { return std::string(c.strict_truncation ? "true" : "false"); }},
        {"parity_pairs",
         [](RunConfig& c, std::string_view v) { c.parity_pairs = parse_bool("parity_pairs", v); },
         [](const RunConfig& c) { return std::string(c.parity_pairs ? "true" : "false"); }},
        {"initial",
         [](RunConfig& c, std::string_view v) {
             v = trim(v);
             if (v != "vacuum" && v != "coherent") bad_value("initial", v, "expected vacuum or coherent");
             c.initial = std::string(v);
         },
         [](const RunConfig& c) { return c.initial; }},
        {"initial_alpha1",
         [](RunConfig& c, std::string_view v) { c.initial_alpha1 = parse_complex("initial_alpha1", v); },
         [](const RunConfig& c) {
             return format_list({c.initial_alpha1.real(), c.initial_alpha1.imag()});
         }},
        {"initial_alpha2",
         [](RunConfig& c, std::string_view v) { c.initial_alpha2 = parse_complex("initial_alpha2", v); },
         [](const RunConfig& c) {
             return format_list({c.initial_alpha2.real(), c.initial_alpha2.imag()});
         }},
        NOPO_INT("grid_points", grid_points),
        NOPO_DOUBLE("grid_extent", grid_extent),
        NOPO_INT("wigner_mode", wigner_mode),
        NOPO_DOUBLE("transient_time", transient_time),
        {"scan_ratios",
         [](RunConfig& c, std::string_view v) { c.scan_ratios = parse_list("scan_ratios", v); },
         [](const RunConfig& c) { return format_list(c.scan_ratios); }},
        {"out", [](RunConfig& c, std::string_view v) { c.out = std::string(trim(v)); },
         [](const RunConfig& c) { return c.out.string(); }},
    };
    return table;
}

#undef NOPO_DOUBLE
#undef NOPO_UNSIGNED
#undef NOPO_INT

// ---------------------------------------------------------------------------
// Output

class CsvFile {
public:
    CsvFile(const std::filesystem::path& path, const std::vector<std::string>& header,
            std::initializer_list<const char*> columns)
        : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        for (const auto& line : header) out_ << "# " << line << '\n';
        bool first = true;
        for (const char* c : columns) {
            out_ << (first ? "" : ",") << c;
            first = false;
        }
        out_ << '\n';
    }

    void row(std::initializer_list<double> values) {
        char buf[32];
        bool first = true;
        for (double v : values) {
            std::snprintf(buf, sizeof buf, "%.12g", v);
            out_ << (first ? "" : ",") << buf;
            first = false;
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

struct Context {
    const RunConfig& config;
    std::size_t workers;
    std::vector<std::string> header;  ///< shared header lines for every file
    std::vector<std::string> files;

    std::vector<std::string> header_for(const std::string& file,
                                        std::initializer_list<std::string> extra = {}) {
        files.push_back(file);
        std::vector<std::string> lines{"nopo-sim " NOPO_VERSION, "file = " + file};
        lines.insert(lines.end(), header.begin(), header.end());
        lines.insert(lines.end(), extra.begin(), extra.end());
        return lines;
    }

    std::filesystem::path path(const std::string& file) const { return config.out / file; }
};

// ---------------------------------------------------------------------------
// Shared physics helpers

/// Bisection bracket for the trivial-solution threshold: the smallest power
/// of two above which the trivial solution is unstable.
std::optional<double> find_threshold(const SystemParams& params) {
    if (trivial_stability(params.with_epsilon(0.0)).unstable) return std::nullopt;
    double hi = 1.0;
    while (!trivial_stability(params.with_epsilon(hi)).unstable) {
        hi *= 2.0;
        if (hi > 1e6) return std::nullopt;
    }
    return numerical_threshold(params, 0.0, hi);
}

json regime_json(const SystemParams& params) {
    const auto r = locking_condition(params);
    return {{"locking_lhs", r.locking_lhs},
            {"locking_rhs", r.locking_rhs},
            {"is_stationary_regime", r.is_stationary_regime}};
}

json params_json(const SystemParams& p) {
    return {{"gamma1", p.gamma1()}, {"gamma2", p.gamma2()}, {"delta1", p.delta1()},
            {"delta2", p.delta2()}, {"chi", p.chi()},       {"epsilon", p.epsilon()},
            {"lambda", p.lambda()}};
}

json optional_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

struct Resolved {
    SystemParams classical;
    SystemParams quantum;
    std::optional<double> threshold;
};

Resolved resolve(const RunConfig& config) {
    auto params = validate(config.params);
    const auto threshold = find_threshold(params);
    if (config.epsilon_ratio > 0.0) {
        if (!threshold) throw ValidationError("epsilon_ratio needs a finite threshold");
        params = params.with_epsilon(config.epsilon_ratio * *threshold);
    }
    if (config.quantum_lambda < 0.0) throw ValidationError("quantum_lambda must be nonnegative");
    auto quantum = config.quantum_lambda > 0.0 ? params.with_lambda(config.quantum_lambda) : params;
    return {params, quantum, threshold};
}

std::string describe(const char* label, const SystemParams& p) {
    return std::string(label) + " = gamma1 " + format_double(p.gamma1()) + ", gamma2 " +
           format_double(p.gamma2()) + ", delta1 " + format_double(p.delta1()) + ", delta2 " +
           format_double(p.delta2()) + ", chi " + format_double(p.chi()) + ", epsilon " +
           format_double(p.epsilon()) + ", lambda " + format_double(p.lambda());
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// Scenarios

json run_semiclassical(Context& ctx, const Resolved& r) {
    const auto start = std::chrono::steady_clock::now();
    const auto& c = ctx.config;
    const auto traj = integrate(kDefaultSeed, r.classical, c.sc_dt, c.sc_t_end, c.sc_record_stride);

    CsvFile csv(ctx.path("classical_traj.csv"),
                ctx.header_for("classical_traj.csv", {describe("classical_params", r.classical)}),
                {"t", "re_a1", "im_a1", "re_a2", "im_a2", "n1", "n2"});
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const auto& s = traj.states[i];
        csv.row({traj.times[i], s.alpha1.real(), s.alpha1.imag(), s.alpha2.real(),
                 s.alpha2.imag(), s.photons1(), s.photons2()});
    }

    const auto pulsing = classify_long_time(traj, c.transient_fraction);
    const auto stability = trivial_stability(r.classical);
    return {{"params", params_json(r.classical)},
            {"regime", regime_json(r.classical)},
            {"threshold", optional_json(r.threshold)},
            {"trivial_max_growth_rate", stability.max_growth_rate},
            {"is_pulsing", pulsing.is_pulsing},
            {"period", optional_json(pulsing.period)},
            {"oscillation_amplitude", pulsing.oscillation_amplitude},
            {"mean_photon_1", pulsing.mean_photon_1},
            {"mean_photon_2", pulsing.mean_photon_2},
            {"peak_count", pulsing.peak_times.size()},
            {"runtime_seconds", seconds_since(start)}};
}

json run_threshold(Context& ctx, const Resolved& r) {
    const auto start = std::chrono::steady_clock::now();
    const auto& c = ctx.config;
    if (c.epsilon_steps < 2) throw ValidationError("epsilon_steps must be at least 2");
    if (!(c.epsilon_max > c.epsilon_min) || c.epsilon_min < 0.0)
        throw ValidationError("epsilon range must satisfy 0 <= epsilon_min < epsilon_max");

    CsvFile csv(ctx.path("threshold_scan.csv"),
                ctx.header_for("threshold_scan.csv", {describe("classical_params", r.classical)}),
                {"epsilon", "max_growth_rate"});
    const double step = (c.epsilon_max - c.epsilon_min) / static_cast<double>(c.epsilon_steps - 1);
    for (std::size_t i = 0; i < c.epsilon_steps; ++i) {
        const double eps = c.epsilon_min + step * static_cast<double>(i);
        csv.row({eps, trivial_stability(r.classical.with_epsilon(eps)).max_growth_rate});
    }

    std::optional<double> closed_form;
    try {
        closed_form = threshold_equal_detunings(r.classical);
    } catch (const ValidationError&) {
    }
    return {{"params", params_json(r.classical)},
            {"regime", regime_json(r.classical)},
            {"numerical_threshold", optional_json(r.threshold)},
            {"closed_form_threshold", optional_json(closed_form)},
            {"runtime_seconds", seconds_since(start)}};
}

struct EnsembleRun {
    EnsembleStats stats;
    std::vector<VarianceEstimate> variance;
};

EnsembleRun simulate(const Context& ctx, const SystemParams& params,
                     std::vector<double> snapshot_times) {
    const auto& c = ctx.config;
    const FockSpace space(c.n_max1, c.n_max2);
    const auto model = effective_model(params, space);
    const auto initial = c.initial == "coherent"
                             ? coherent_state(space, c.initial_alpha1, c.initial_alpha2)
                             : vacuum(space);
    TrajectoryConfig tc;
    tc.dt = c.dt;
    tc.t_end = c.t_end;
    tc.record_stride = c.record_stride;
    tc.seed = c.seed;
    tc.snapshot_times = std::move(snapshot_times);
    tc.strict_truncation = c.strict_truncation;
    EnsembleOptions options;
    options.n_traj = c.n_traj;
    options.workers = ctx.workers;
    options.keep_snapshots = !tc.snapshot_times.empty();
    options.parity_pairs = c.parity_pairs;
    EnsembleRun run{run_ensemble(model, initial, tc, options), {}};
    run.variance = entanglement_series(run.stats);
    return run;
}

void write_ensemble(Context& ctx, const EnsembleRun& run, const SystemParams& params,
                    const std::string& file) {
    CsvFile csv(ctx.path(file), ctx.header_for(file, {describe("quantum_params", params)}),
                {"t", "n1_mean", "n1_se", "n2_mean", "n2_se", "V", "V_se"});
    const auto& s = run.stats;
    for (std::size_t i = 0; i < s.times.size(); ++i) {
        csv.row({s.times[i], s.mean[i].n1, s.standard_error[i].n1, s.mean[i].n2,
                 s.standard_error[i].n2, run.variance[i].report.v, run.variance[i].standard_error});
    }
}

/// Minimum of V(t) over t >= transient_time (falls back to the last record).
json variance_minimum(const RunConfig& c, const EnsembleRun& run) {
    std::size_t best = run.stats.times.size() - 1;
    for (std::size_t i = 0; i < run.stats.times.size(); ++i) {
        if (run.stats.times[i] < c.transient_time) continue;
        if (run.variance[i].report.v < run.variance[best].report.v) best = i;
    }
    const auto& v = run.variance[best];
    return {{"t", run.stats.times[best]},
            {"V", v.report.v},
            {"V_se", v.standard_error},
            {"theta1", v.report.theta1},
            {"theta2", v.report.theta2}};
}

json ensemble_json(const EnsembleRun& run, const SystemParams& params, const RunConfig& c) {
    const auto& s = run.stats;
    const auto& last = s.mean.back();
    return {{"params", params_json(params)},
            {"regime", regime_json(params)},
            {"n_traj", s.trajectory_count},
            {"parity_pairs", c.parity_pairs},
            {"failed_trajectories", s.failed_count},
            {"master_seed", c.seed},
            {"seed_derivation", "splitmix64(seed + (i + 1) * 0x9E3779B97F4A7C15)"},
            {"max_top_population", s.max_top_population},
            {"truncation_warning", s.truncation_warning},
            {"final", {{"t", s.times.back()},
                       {"n1", last.n1},
                       {"n2", last.n2},
                       {"V", run.variance.back().report.v},
                       {"V_se", run.variance.back().standard_error}}},
            {"V_min_after_transient", variance_minimum(c, run)}};
}

json run_qsd_ensemble(Context& ctx, const Resolved& r) {
    const auto start = std::chrono::steady_clock::now();
    const auto run = simulate(ctx, r.quantum, {});
    write_ensemble(ctx, run, r.quantum, "ensemble.csv");
    auto out = ensemble_json(run, r.quantum, ctx.config);
    out["runtime_seconds"] = seconds_since(start);
    return out;
}

json run_wigner(Context& ctx, const Resolved& r) {
    const auto start = std::chrono::steady_clock::now();
    const auto& c = ctx.config;
    const auto mode = to_mode(c.wigner_mode);
    auto times = c.snapshot_times.empty() ? std::vector<double>{c.t_end} : c.snapshot_times;
    const auto run = simulate(ctx, r.quantum, times);
    write_ensemble(ctx, run, r.quantum, "ensemble.csv");

    // Several snapshot times are averaged: a stationary state is sampled at
    // more points with no change in its expectation.
    auto rho = partial_trace(run.stats.snapshots.front(), mode);
    for (std::size_t k = 1; k < run.stats.snapshots.size(); ++k)
        rho.matrix += partial_trace(run.stats.snapshots[k], mode).matrix;
    rho.matrix /= static_cast<double>(run.stats.snapshots.size());

    const auto& last = run.stats.mean.back();
    GridSpec grid = default_grid(std::sqrt(mode == Mode::one ? last.n1 : last.n2));
    if (c.grid_extent > 0.0) grid.x_max = c.grid_extent;
    grid.points = c.grid_points;
    const auto w = wigner(rho, grid, "mode " + std::to_string(c.wigner_mode));

    CsvFile csv(ctx.path("wigner.csv"),
                ctx.header_for("wigner.csv",
                               {describe("quantum_params", r.quantum),
                                "wigner_source = " + w.source + ", snapshot_times " + format_list(times) +
                                    " (averaged)"}),
                {"re_alpha", "im_alpha", "W"});
    for (std::size_t i = 0; i < w.re_axis.size(); ++i)
        for (std::size_t j = 0; j < w.im_axis.size(); ++j)
            csv.row({w.re_axis[i], w.im_axis[j],
                     w.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});

    const auto peaks = peak_analysis(w);
    json locations = json::array();
    for (const auto& z : peaks.peak_locations) locations.push_back({z.real(), z.imag()});
    auto out = ensemble_json(run, r.quantum, c);
    out["wigner"] = {{"mode", c.wigner_mode},
                     {"grid_extent", grid.x_max},
                     {"grid_points", grid.points},
                     {"normalization", w.normalization()},
                     {"peak_count", peaks.peak_count},
                     {"peak_locations", locations},
                     {"inversion_symmetric", peaks.inversion_symmetric},
                     {"is_ring", peaks.is_ring},
                     {"ring_radius", optional_json(peaks.ring_radius)}};
    out["runtime_seconds"] = seconds_since(start);
    return out;
}

json run_entanglement_scan(Context& ctx, const Resolved& r) {
    const auto start = std::chrono::steady_clock::now();
    const auto& c = ctx.config;
    if (!r.threshold) throw ValidationError("entanglement-scan needs a finite threshold");
    if (c.scan_ratios.empty()) throw ValidationError("scan_ratios must not be empty");

    CsvFile csv(ctx.path("entanglement_scan.csv"),
                ctx.header_for("entanglement_scan.csv",
                               {describe("quantum_params", r.quantum),
                                "epsilon_threshold = " + format_double(*r.threshold)}),
                {"epsilon_ratio", "epsilon", "V_min", "V_min_se", "t_at_min", "n1_final", "n2_final"});
    json points = json::array();
    for (double ratio : c.scan_ratios) {
        const auto params = r.quantum.with_epsilon(ratio * *r.threshold);
        const auto run = simulate(ctx, params, {});
        const auto vmin = variance_minimum(c, run);
        const auto& last = run.stats.mean.back();
        csv.row({ratio, params.epsilon(), vmin["V"].get<double>(), vmin["V_se"].get<double>(),
                 vmin["t"].get<double>(), last.n1, last.n2});
        points.push_back({{"epsilon_ratio", ratio},
                          {"epsilon", params.epsilon()},
                          {"V_min_after_transient", vmin},
                          {"max_top_population", run.stats.max_top_population},
                          {"truncation_warning", run.stats.truncation_warning},
                          {"failed_trajectories", run.stats.failed_count}});
    }
    return {{"params", params_json(r.quantum)},
            {"threshold", *r.threshold},
            {"n_traj", c.n_traj},
            {"master_seed", c.seed},
            {"points", points},
            {"runtime_seconds", seconds_since(start)}};
}

using ScenarioFn = json (*)(Context&, const Resolved&);

struct PresetDef {
    const char* name;
    const char* description;
    std::vector<std::pair<const char*, ScenarioFn>> steps;
    std::vector<std::pair<const char*, const char*>> settings;
};

const std::vector<PresetDef>& presets() {
    static const std::vector<PresetDef> table{
        {"preset:fig1",
         "phase-locked stationary regime: two-peak single-mode Wigner function "
         "(delta1 = delta2 = 10, chi = 0.1, epsilon = 11; quantum lambda 0.5)",
         {{"wigner", run_wigner}},
         {{"delta1", "10"}, {"delta2", "10"}, {"chi", "0.1"}, {"epsilon", "11"},
          {"lambda", "0.1"}, {"quantum_lambda", "0.5"},
          {"desk_scale", "quantum lambda 0.5 instead of 0.1 keeps n_max = 20 adequate"},
          {"dt", "1e-4"}, {"t_end", "4"}, {"record_stride", "1000"},
          {"snapshot_times", "3,3.5,4"}, {"n_traj", "500"}, {"parity_pairs", "true"}}},
        {"preset:fig2",
         "self-pulsing: classical trajectory at the reference parameters and QSD ensemble "
         "(delta1 = 10, delta2 = -5, chi = 0.1, epsilon = 4; quantum lambda 0.5)",
         {{"semiclassical", run_semiclassical}, {"qsd-ensemble", run_qsd_ensemble}},
         {{"delta1", "10"}, {"delta2", "-5"}, {"chi", "0.1"}, {"epsilon", "4"},
          {"lambda", "0.1"}, {"quantum_lambda", "0.5"},
          {"desk_scale", "quantum lambda 0.5 instead of 0.1 keeps n_max = 20 adequate"},
          {"sc_t_end", "200"}, {"dt", "5e-4"}, {"t_end", "10"}, {"record_stride", "20"},
          {"n_traj", "200"}}},
        {"preset:fig3",
         "self-pulsing with phase diffusion: classical orbit and ring-shaped Wigner function "
         "(delta1 = 0.1, delta2 = -0.1, chi = 0.5, epsilon = 3; quantum lambda 0.5)",
         {{"semiclassical", run_semiclassical}, {"wigner", run_wigner}},
         {{"delta1", "0.1"}, {"delta2", "-0.1"}, {"chi", "0.5"}, {"epsilon", "3"},
          {"lambda", "0.1"}, {"quantum_lambda", "0.5"},
          {"desk_scale", "quantum lambda 0.5 instead of 0.1 keeps n_max = 20 adequate"},
          {"sc_t_end", "200"}, {"dt", "5e-4"}, {"t_end", "10"}, {"record_stride", "200"},
          {"snapshot_times", "10"}, {"n_traj", "500"}}},
        {"preset:fig4",
         "entanglement variance V versus pump in the non-stationary regime "
         "(delta1 = 10, delta2 = -10, chi = 0.1, lambda = 0.1)",
         {{"threshold", run_threshold}, {"entanglement-scan", run_entanglement_scan}},
         {{"delta1", "10"}, {"delta2", "-10"}, {"chi", "0.1"}, {"epsilon", "1"},
          {"lambda", "0.1"}, {"epsilon_min", "0"}, {"epsilon_max", "3"},
          {"epsilon_steps", "301"}, {"dt", "5e-4"}, {"t_end", "10"}, {"record_stride", "100"},
          {"transient_time", "5"}, {"scan_ratios", "0.5,0.8,1,1.2,1.5"}, {"n_traj", "500"}}},
    };
    return table;
}

const PresetDef* find_preset(std::string_view name) {
    for (const auto& p : presets())
        if (p.name == name) return &p;
    return nullptr;
}

ScenarioFn find_scenario(std::string_view name) {
    if (name == "semiclassical") return run_semiclassical;
    if (name == "threshold") return run_threshold;
    if (name == "qsd-ensemble") return run_qsd_ensemble;
    if (name == "wigner") return run_wigner;
    if (name == "entanglement-scan") return run_entanglement_scan;
    return nullptr;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> RunConfig::to_pairs() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : fields()) out.emplace_back(f.name, f.get(*this));
    return out;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
    key = trim(key);
    for (const auto& f : fields()) {
        if (key == f.name) {
            f.set(config, value);
            return;
        }
    }
    throw ValidationError("unknown key: " + std::string(key));
}

void apply_assignment(RunConfig& config, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos)
        throw ValidationError("expected key=value, got '" + std::string(assignment) + "'");
    apply_setting(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

RunConfig parse_config(std::string_view text, RunConfig base) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.find('=') == std::string_view::npos)
            throw ValidationError("line " + std::to_string(line_no) + ": expected key = value");
        apply_assignment(base, line);
    }
    return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), std::move(base));
}

RunConfig build_config(std::string_view file_text, const std::vector<std::string>& assignments) {
    auto apply_all = [&](RunConfig config) {
        config = parse_config(file_text, std::move(config));
        for (const auto& a : assignments) apply_assignment(config, a);
        return config;
    };
    auto config = apply_all({});
    if (config.scenario.starts_with("preset:")) config = apply_all(preset_config(config.scenario));
    return config;
}

std::vector<PresetInfo> list_presets() {
    std::vector<PresetInfo> out;
    for (const auto& p : presets()) out.push_back({p.name, p.description});
    return out;
}

RunConfig preset_config(std::string_view scenario) {
    const auto* p = find_preset(scenario);
    if (!p) throw ValidationError("unknown preset: " + std::string(scenario));
    RunConfig config;
    config.scenario = p->name;
    for (const auto& [key, value] : p->settings) apply_setting(config, key, value);
    return config;
}

std::size_t worker_count_from_env() {
    const char* raw = std::getenv("NOPO_SIM_THREADS");
    if (!raw || !*raw) return 0;
    return static_cast<std::size_t>(parse_unsigned("NOPO_SIM_THREADS", raw));
}

nlohmann::json run(const RunConfig& config, std::size_t workers) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::pair<const char*, ScenarioFn>> steps;
    if (const auto* p = find_preset(config.scenario)) {
        steps = p->steps;
    } else if (auto fn = find_scenario(config.scenario)) {
        steps.emplace_back(nullptr, fn);
    } else {
        throw ValidationError("unknown scenario: " + config.scenario);
    }

    const auto resolved = resolve(config);
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());

    Context ctx{config, workers, {}, {}};
    // The output directory is not part of the simulation, so identical runs
    // written to different places stay byte-identical.
    for (const auto& [key, value] : config.to_pairs())
        if (key != "out") ctx.header.push_back(key + " = " + value);
    std::filesystem::create_directories(config.out);

    json summary{{"scenario", config.scenario},
                 {"version", NOPO_VERSION},
                 {"seed", config.seed},
                 {"workers", workers}};
    if (!config.desk_scale.empty()) summary["desk_scale"] = config.desk_scale;
    for (const auto& [name, fn] : steps) {
        try {
            auto part = fn(ctx, resolved);
            if (name)
                summary[name] = std::move(part);
            else
                summary.update(part);
        } catch (const NumericalError& e) {
            throw NumericalError("scenario " + config.scenario + ": " + e.what());
        } catch (const TruncationError& e) {
            throw TruncationError("scenario " + config.scenario + ": " + e.what());
        }
    }
    summary["files"] = ctx.files;
    summary["runtime_seconds"] = seconds_since(start);

    std::ofstream(config.out / "summary.json", std::ios::binary) << summary.dump(2) << '\n';
    return summary;
}

}  // namespace nopo::cli
