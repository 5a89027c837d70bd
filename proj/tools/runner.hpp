#pragma once

// Scenario runner behind the nopo-sim command line tool.
//
// Configuration is a flat "key = value" text format with '#' comments.
// Every output file starts with '#' lines holding the fully resolved
// configuration, enough to reproduce the run bit for bit.

#include <complex>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nopo/model.hpp"

namespace nopo::cli {

struct RunConfig {
    std::string scenario = "semiclassical";

    RawParams params;
    /// > 0: epsilon = epsilon_ratio * numerical threshold (overrides epsilon).
    double epsilon_ratio = 0.0;
    /// > 0: lambda used by quantum scenarios instead of params.lambda.
    double quantum_lambda = 0.0;
    std::string desk_scale;

    // Semiclassical integration.
    double sc_dt = 1e-3;
    double sc_t_end = 200.0;
    std::size_t sc_record_stride = 10;
    double transient_fraction = 0.5;

    // Threshold scan.
    double epsilon_min = 0.0;
    double epsilon_max = 20.0;
    std::size_t epsilon_steps = 201;

    // Quantum trajectories.
    int n_max1 = 20;
    int n_max2 = 20;
    double dt = 5e-4;
    double t_end = 10.0;
    std::size_t record_stride = 100;
    std::uint64_t seed = 1;
    std::vector<double> snapshot_times;  ///< empty: t_end
    std::size_t n_traj = 100;
    bool strict_truncation = false;
    bool parity_pairs = false;  ///< antithetic trajectory pairs (vacuum start)
    std::string initial = "vacuum";  ///< vacuum | coherent
    std::complex<double> initial_alpha1{};
    std::complex<double> initial_alpha2{};

    // Analysis.
    int grid_points = 101;
    double grid_extent = 0.0;  ///< 0: max(3, 1.5 * max semiclassical |alpha|)
    int wigner_mode = 1;
    double transient_time = 5.0;  ///< V(t) minimum is taken over t >= transient_time
    std::vector<double> scan_ratios{0.5, 0.8, 1.0, 1.2, 1.5};

    std::filesystem::path out = "nopo-out";

    /// Resolved key/value pairs in a fixed order; values round-trip exactly.
    std::vector<std::pair<std::string, std::string>> to_pairs() const;
};

/// Applies one key = value assignment. Throws ValidationError with
/// "unknown key: <key>" or naming the key whose value is malformed.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Parses "key=value" (used by --set).
void apply_assignment(RunConfig& config, std::string_view assignment);

RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Builds the configuration for one invocation: config file text, then the
/// --set assignments in order. When the resulting scenario names a preset,
/// the preset values form the base and the same assignments override them.
RunConfig build_config(std::string_view file_text, const std::vector<std::string>& assignments);

struct PresetInfo {
    std::string name;
    std::string description;
};

std::vector<PresetInfo> list_presets();

/// Resolves "preset:figN" into its configuration. Throws ValidationError for
/// unknown presets.
RunConfig preset_config(std::string_view scenario);

/// Worker count from NOPO_SIM_THREADS (unset or 0: hardware concurrency).
std::size_t worker_count_from_env();

/// Runs the configured scenario, writes its files under config.out and
/// returns the machine-readable summary (also written to summary.json).
nlohmann::json run(const RunConfig& config, std::size_t workers = 0);

}  // namespace nopo::cli
