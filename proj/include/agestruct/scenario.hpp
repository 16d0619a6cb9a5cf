#pragma once

#include "agestruct/general.hpp"
#include "agestruct/grid.hpp"
#include "agestruct/hiv.hpp"
#include "agestruct/sir.hpp"

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace agestruct {

struct CheckSpec {
    std::string name;
    nlohmann::json options;
};

/// Validated scenario: one model with parameters and initial data on a grid,
/// a run horizon, and the list of verification checks to execute.
struct Scenario {
    std::string model; // "sir" | "hiv" | "general"
    AgeGridPtr grid;
    double horizon = 0.0;
    unsigned long long seed = 0;
    std::string output_dir;
    std::vector<CheckSpec> checks;

    std::optional<SirParams> sir;
    std::optional<SirState> sir_initial;
    std::optional<HivParams> hiv;
    std::optional<HivState> hiv_initial;
    std::optional<GeneralParams> general;
    std::optional<GeneralState> general_initial;

    nlohmann::ordered_json echo; // config with all defaults filled in
};

/// Parse and validate a JSON scenario document. Schema violations raise
/// ConfigError with a JSON-pointer-like path to the offending entry.
Scenario parse_config(const std::string& text);
Scenario parse_config_file(const std::string& path);

enum class RunMode { Simulate, Bounds, Spectral, Compare, Invariance, Probe, Convergence };

struct RunOptions {
    RunMode mode = RunMode::Simulate;
    std::string output_dir; // overrides the scenario's directory when nonempty
    std::optional<unsigned long long> seed;
    bool quiet = false;
    int levels = 3; // convergence mode
};

/// Execute a scenario: run the model, evaluate the requested checks, write
/// timeseries.csv and report.json into the output directory, and return 0
/// exactly when every requested check passed.
int run_scenario(const Scenario& sc, const RunOptions& opts);

struct ConvergenceRow {
    int n_cells = 0;
    double conservation_residual = 0.0;
    double solution_diff = 0.0; // sup distance to the finest level's solution
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    double residual_order = 0.0; // observed order of the conservation residual
    double solution_order = 0.0; // observed order of the solution differences
};

/// Rerun the scenario on grids with n_cells * 2^k for k = 0..levels-1 and
/// report observed convergence orders.
ConvergenceTable convergence_study(const Scenario& sc, int levels);

} // namespace agestruct
