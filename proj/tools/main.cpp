#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nopo/error.hpp"
#include "runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"nopo-sim: phase-locked nondegenerate OPO simulator", "nopo-sim"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> assignments;
    std::string out_dir;
    auto* run = app.add_subcommand("run", "run a scenario or preset");
    run->add_option("--config", config_path, "key = value configuration file");
    run->add_option("--set", assignments, "override a key (key=value), repeatable");
    run->add_option("--out", out_dir, "output directory");

    app.add_subcommand("presets", "list the built-in presets");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("presets")) {
            for (const auto& p : nopo::cli::list_presets())
                std::cout << p.name << "\n    " << p.description << '\n';
            return 0;
        }

        std::string text;
        if (!config_path.empty()) {
            std::ifstream in(config_path, std::ios::binary);
            if (!in) throw nopo::ValidationError("cannot read config file " + config_path);
            std::ostringstream buf;
            buf << in.rdbuf();
            text = buf.str();
        }
        auto config = nopo::cli::build_config(text, assignments);
        if (!out_dir.empty()) config.out = out_dir;

        const auto summary = nopo::cli::run(config, nopo::cli::worker_count_from_env());
        std::cout << summary.dump(2) << '\n';
        return 0;
    } catch (const nopo::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
