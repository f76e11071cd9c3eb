#pragma once

#include <map>
#include <optional>
#include <string>

#include "regul/analysis.hpp"
#include "regul/registry.hpp"

namespace regul {

/// One declared check and its outcome.
struct CheckOutcome {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ScenarioResult {
    bool all_pass = false;
    std::vector<CheckOutcome> checks;
    Trace trace;                       // presentation (physical) coordinates
    std::optional<SweepResult> sweep;
    LevelSetEstimate levels;
    DesignReport design_report;
    ChartReport chart_report;
    std::string verdicts_json;
};

/// Parses a scenario config (JSON text; schema documented in the README),
/// assembles the closed loop from the registry, runs the simulation and/or
/// sweep, evaluates the declared checks, and returns all artifacts.
/// check_only limits the run to the chart/design verification reports.
/// Throws config_error for parse/reference problems.
ScenarioResult run_scenario(const std::string& config_text, std::uint64_t seed_override,
                            bool has_seed_override, bool check_only);

/// Convenience: load the file then run.
ScenarioResult run_scenario_file(const std::string& config_path,
                                 std::optional<std::uint64_t> seed_override, bool check_only);

/// Write the artifacts the CLI contract names into out_dir (created if
/// missing): trace.csv/.json, design_report.json, chart_report.json,
/// levels.json, verdicts.json, and sweep.csv/.json when present.
void write_artifacts(const ScenarioResult& result, const std::string& out_dir);

}  // namespace regul
