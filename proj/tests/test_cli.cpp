#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "nopo/error.hpp"
#include "runner.hpp"

namespace {

namespace fs = std::filesystem;
using nopo::cli::RunConfig;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("nopo-cli-test-" + name);
    fs::remove_all(dir);
    return dir;
}

std::string first_data_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line))
        if (!line.starts_with("#")) return line;
    return {};
}

TEST(Config, ParsesKeysCommentsAndWhitespace) {
    const auto c = nopo::cli::parse_config(
        "# comment line\n"
        "scenario = threshold   # trailing comment\n"
        "  delta1=10\n"
        "\n"
        "delta2 = -10\r\n"
        "snapshot_times = 1, 2.5\n"
        "initial_alpha1 = 0.5,-1\n"
        "strict_truncation = true\n");
    EXPECT_EQ(c.scenario, "threshold");
    EXPECT_EQ(c.params.delta1, 10.0);
    EXPECT_EQ(c.params.delta2, -10.0);
    EXPECT_EQ(c.snapshot_times, (std::vector<double>{1.0, 2.5}));
    EXPECT_EQ(c.initial_alpha1, std::complex<double>(0.5, -1.0));
    EXPECT_TRUE(c.strict_truncation);
}

TEST(Config, UnknownKeyIsNamed) {
    try {
        nopo::cli::parse_config("epsilonn = 3\n");
        FAIL() << "no error";
    } catch (const nopo::ValidationError& e) {
        EXPECT_STREQ(e.what(), "unknown key: epsilonn");
    }
}

TEST(Config, BadValuesNameTheKey) {
    RunConfig c;
    for (auto [k, v] : {std::pair{"dt", "fast"}, std::pair{"n_traj", "-3"}, std::pair{"strict_truncation", "maybe"},
                        std::pair{"initial", "thermal"}, std::pair{"initial_alpha2", "1"}}) {
        try {
            nopo::cli::apply_setting(c, k, v);
            ADD_FAILURE() << k;
        } catch (const nopo::ValidationError& e) {
            EXPECT_NE(std::string(e.what()).find(k), std::string::npos) << e.what();
        }
    }
    EXPECT_THROW(nopo::cli::parse_config("just words\n"), nopo::ValidationError);
}

TEST(Config, PairsRoundTripExactly) {
    RunConfig c;
    c.params.chi = 0.1;
    c.params.epsilon = 1.0 / 3.0;
    c.scan_ratios = {0.5, 0.7};
    std::string text;
    for (const auto& [k, v] : c.to_pairs()) text += k + " = " + v + "\n";
    const auto back = nopo::cli::parse_config(text);
    EXPECT_EQ(back.to_pairs(), c.to_pairs());
    EXPECT_EQ(back.params.epsilon, 1.0 / 3.0);
}

TEST(Config, PresetsAreBaseForOverrides) {
    const auto c = nopo::cli::build_config("scenario = preset:fig2\nn_traj = 8\n", {"t_end=2"});
    EXPECT_EQ(c.params.delta1, 10.0);
    EXPECT_EQ(c.params.delta2, -5.0);
    EXPECT_EQ(c.params.lambda, 0.1);
    EXPECT_EQ(c.quantum_lambda, 0.5);
    EXPECT_FALSE(c.desk_scale.empty());
    EXPECT_EQ(c.n_traj, 8u);
    EXPECT_EQ(c.t_end, 2.0);
    EXPECT_THROW(nopo::cli::preset_config("preset:fig9"), nopo::ValidationError);
    EXPECT_EQ(nopo::cli::list_presets().size(), 4u);
}

TEST(Config, PresetsMatchReferenceValues) {
    const auto f1 = nopo::cli::preset_config("preset:fig1");
    EXPECT_EQ(f1.params.delta1, 10.0);
    EXPECT_EQ(f1.params.delta2, 10.0);
    EXPECT_EQ(f1.params.chi, 0.1);
    EXPECT_EQ(f1.params.epsilon, 11.0);
    EXPECT_EQ(f1.params.lambda, 0.1);
    EXPECT_EQ(f1.quantum_lambda, 0.5);
    const auto f3 = nopo::cli::preset_config("preset:fig3");
    EXPECT_EQ(f3.params.delta1, 0.1);
    EXPECT_EQ(f3.params.delta2, -0.1);
    EXPECT_EQ(f3.params.chi, 0.5);
    EXPECT_EQ(f3.params.epsilon, 3.0);
    const auto f4 = nopo::cli::preset_config("preset:fig4");
    EXPECT_EQ(f4.params.delta2, -10.0);
    EXPECT_EQ(f4.params.lambda, 0.1);
    EXPECT_EQ(f4.quantum_lambda, 0.0);
    EXPECT_EQ(f4.n_max1, 20);
}

TEST(Config, ThreadsFromEnvironment) {
    ::setenv("NOPO_SIM_THREADS", "3", 1);
    EXPECT_EQ(nopo::cli::worker_count_from_env(), 3u);
    ::setenv("NOPO_SIM_THREADS", "0", 1);
    EXPECT_EQ(nopo::cli::worker_count_from_env(), 0u);
    ::setenv("NOPO_SIM_THREADS", "lots", 1);
    EXPECT_THROW(nopo::cli::worker_count_from_env(), nopo::ValidationError);
    ::unsetenv("NOPO_SIM_THREADS");
    EXPECT_EQ(nopo::cli::worker_count_from_env(), 0u);
}

RunConfig quick_quantum(const fs::path& out) {
    auto c = nopo::cli::build_config("scenario = qsd-ensemble\ndelta1 = 1\ndelta2 = -1\nchi = 0.2\n"
                                     "epsilon = 1\nlambda = 0.2\nn_max1 = 6\nn_max2 = 6\n"
                                     "t_end = 0.5\nrecord_stride = 50\nn_traj = 6\nseed = 11\n",
                                     {});
    c.out = out;
    return c;
}

TEST(Run, ByteIdenticalAcrossRunsAndWorkers) {
    const auto a = scratch("det-a");
    const auto b = scratch("det-b");
    nopo::cli::run(quick_quantum(a), 1);
    nopo::cli::run(quick_quantum(b), 3);
    EXPECT_EQ(slurp(a / "ensemble.csv"), slurp(b / "ensemble.csv"));
    auto c = quick_quantum(scratch("det-c"));
    c.seed = 12;
    nopo::cli::run(c, 1);
    EXPECT_NE(slurp(a / "ensemble.csv"), slurp(c.out / "ensemble.csv"));
}

TEST(Run, HeaderRecordsResolvedConfig) {
    const auto dir = scratch("header");
    const auto c = quick_quantum(dir);
    const auto summary = nopo::cli::run(c, 1);
    const auto text = slurp(dir / "ensemble.csv");
    EXPECT_TRUE(text.starts_with("# nopo-sim "));
    for (const auto& [k, v] : c.to_pairs()) {
        if (k == "out") continue;
        EXPECT_NE(text.find("# " + k + " = " + v + "\n"), std::string::npos) << k;
    }
    EXPECT_EQ(first_data_line(dir / "ensemble.csv"), "t,n1_mean,n1_se,n2_mean,n2_se,V,V_se");
    EXPECT_TRUE(fs::exists(dir / "summary.json"));
    EXPECT_EQ(summary["seed"], 11);
    EXPECT_EQ(summary["n_traj"], 6);
}

TEST(Run, HeaderIsEnoughToRerun) {
    const auto dir = scratch("rerun");
    nopo::cli::run(quick_quantum(dir), 1);
    std::string text;
    std::ifstream in(dir / "ensemble.csv");
    std::string line;
    while (std::getline(in, line) && line.starts_with("# ")) {
        const auto body = line.substr(2);
        if (body.find(" = ") != std::string::npos && !body.starts_with("file") && !body.starts_with("quantum_params"))
            text += body + "\n";
    }
    auto again = nopo::cli::build_config(text, {});
    again.out = scratch("rerun-2");
    nopo::cli::run(again, 1);
    EXPECT_EQ(slurp(dir / "ensemble.csv"), slurp(again.out / "ensemble.csv"));
}

TEST(Run, ThresholdAndSemiclassicalColumns) {
    const auto dir = scratch("classical");
    auto c = nopo::cli::build_config("scenario = threshold\ndelta1 = 10\ndelta2 = 10\nchi = 0.1\n"
                                     "epsilon_min = 9\nepsilon_max = 11\nepsilon_steps = 5\n",
                                     {});
    c.out = dir;
    const auto s = nopo::cli::run(c, 1);
    EXPECT_EQ(first_data_line(dir / "threshold_scan.csv"), "epsilon,max_growth_rate");
    EXPECT_NEAR(s["numerical_threshold"].get<double>(), 9.95037, 1e-5);
    EXPECT_NEAR(s["closed_form_threshold"].get<double>(), 9.95037, 1e-5);

    c.scenario = "semiclassical";
    c.sc_t_end = 40.0;
    c.params.epsilon = 11.0;
    const auto t = nopo::cli::run(c, 1);
    EXPECT_EQ(first_data_line(dir / "classical_traj.csv"), "t,re_a1,im_a1,re_a2,im_a2,n1,n2");
    EXPECT_TRUE(t["regime"]["is_stationary_regime"].get<bool>());
    EXPECT_FALSE(t["is_pulsing"].get<bool>());
}

TEST(Run, Fig2PresetSummary) {
    const auto dir = scratch("fig2");
    auto c = nopo::cli::build_config("scenario = preset:fig2\n", {"n_traj=4", "t_end=1", "sc_t_end=60"});
    c.out = dir;
    const auto s = nopo::cli::run(c, 1);
    EXPECT_TRUE(s["semiclassical"]["is_pulsing"].get<bool>());
    EXPECT_TRUE(fs::exists(dir / "classical_traj.csv"));
    EXPECT_TRUE(fs::exists(dir / "ensemble.csv"));
    EXPECT_NE(slurp(dir / "ensemble.csv").find("# desk_scale = "), std::string::npos);
    EXPECT_EQ(s["qsd-ensemble"]["params"]["lambda"], 0.5);
    EXPECT_EQ(s["semiclassical"]["params"]["lambda"], 0.1);
}

TEST(Run, WignerScenarioWritesGrid) {
    const auto dir = scratch("wigner");
    auto c = quick_quantum(dir);
    c.scenario = "wigner";
    c.grid_points = 31;
    c.grid_extent = 2.0;
    const auto s = nopo::cli::run(c, 1);
    EXPECT_EQ(first_data_line(dir / "wigner.csv"), "re_alpha,im_alpha,W");
    std::ifstream in(dir / "wigner.csv");
    std::string line;
    int rows = 0;
    while (std::getline(in, line))
        if (!line.starts_with("#")) ++rows;
    EXPECT_EQ(rows, 1 + 31 * 31);
    EXPECT_TRUE(s["wigner"].contains("peak_count"));
}

TEST(Run, UnknownScenarioFails) {
    RunConfig c;
    c.scenario = "tomography";
    c.out = scratch("unknown");
    EXPECT_THROW(nopo::cli::run(c, 1), nopo::ValidationError);
}

#ifdef NOPO_SIM_PATH
int run_binary(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(NOPO_SIM_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Binary, UnknownKeyExitsNonzero) {
    const auto dir = scratch("bin");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.cfg") << "scenario = threshold\nepsilonn = 3\n";
    EXPECT_NE(run_binary("run --config " + (dir / "bad.cfg").string(), dir / "log"), 0);
    EXPECT_NE(slurp(dir / "log").find("unknown key: epsilonn"), std::string::npos);
}

TEST(Binary, PresetsAndSetOverrides) {
    const auto dir = scratch("bin2");
    fs::create_directories(dir);
    EXPECT_EQ(run_binary("presets", dir / "presets.txt"), 0);
    EXPECT_NE(slurp(dir / "presets.txt").find("preset:fig4"), std::string::npos);
    std::ofstream(dir / "t.cfg") << "scenario = threshold\nepsilon_steps = 3\n";
    EXPECT_EQ(run_binary("run --config " + (dir / "t.cfg").string() + " --set delta1=2 --set delta2=2 --out " +
                             (dir / "out").string(),
                         dir / "log"),
              0);
    EXPECT_NE(slurp(dir / "out" / "threshold_scan.csv").find("# delta1 = 2\n"), std::string::npos);
}
#endif

}  // namespace
