// Scenario runner: loads a config, assembles the model/process/design/chart
// stack, runs the simulation or sweep, writes traces and reports.
//
// Exit codes: 0 all declared checks pass, 1 check failures, 2 parse or
// reference errors.

#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "regul/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"regul scenario runner"};

    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    bool check_only = false;

    app.add_option("--config", config_path, "scenario config (JSON)")->required();
    app.add_option("--out", out_dir, "output directory for traces and reports");
    app.add_option("--seed", seed, "override the config seed");
    app.add_flag("--check-only", check_only,
                 "run chart verification and the design report without simulation");

    CLI11_PARSE(app, argc, argv);

    try {
        const regul::ScenarioResult result =
            regul::run_scenario_file(config_path, seed, check_only);
        regul::write_artifacts(result, out_dir);
        for (const auto& chk : result.checks)
            std::printf("[%s] %s: %s\n", chk.pass ? "PASS" : "FAIL", chk.name.c_str(),
                        chk.detail.c_str());
        if (!result.all_pass) {
            std::fprintf(stderr, "declared checks failed\n");
            return 1;
        }
        return 0;
    } catch (const regul::config_error& ex) {
        std::fprintf(stderr, "config error: %s\n", ex.what());
        return 2;
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
}
