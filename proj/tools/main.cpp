#include "agestruct/errors.hpp"
#include "agestruct/scenario.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>
#include <string>

namespace {

struct CommonArgs {
    std::string config;
    std::string output_dir;
    std::optional<unsigned long long> seed;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args)
{
    cmd->add_option("config", args.config, "scenario configuration file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--output-dir", args.output_dir,
                    "artifact directory (falls back to the config entry, then AGESTRUCT_OUTPUT_DIR)");
    cmd->add_option("--seed", args.seed, "override the scenario seed");
    cmd->add_flag("--quiet", args.quiet, "suppress the console summary");
}

int dispatch(const CommonArgs& args, agestruct::RunMode mode, int levels)
{
    try {
        const agestruct::Scenario sc = agestruct::parse_config_file(args.config);
        agestruct::RunOptions opts;
        opts.mode = mode;
        opts.output_dir = args.output_dir;
        opts.seed = args.seed;
        opts.quiet = args.quiet;
        opts.levels = levels;
        return agestruct::run_scenario(sc, opts);
    } catch (const agestruct::ConfigError& e) {
        std::cerr << "config error at " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"age-structured population model solver and verification runner"};
    app.require_subcommand(1);

    CommonArgs sim_args;
    CLI::App* sim = app.add_subcommand("simulate", "run the model and the checks listed in the config");
    add_common(sim, sim_args);

    CommonArgs bounds_args;
    CLI::App* bounds = app.add_subcommand("bounds", "a priori compartment bounds and their margins");
    add_common(bounds, bounds_args);

    CommonArgs spectral_args;
    CLI::App* spectral =
        app.add_subcommand("spectral", "characteristic roots and adjoint eigenprofiles");
    add_common(spectral, spectral_args);

    CommonArgs compare_args;
    CLI::App* compare =
        app.add_subcommand("compare", "fixed-point iteration against direct stepping");
    add_common(compare, compare_args);

    CommonArgs inv_args;
    CLI::App* inv = app.add_subcommand("invariance", "sub-region classification along the run");
    add_common(inv, inv_args);

    CommonArgs probe_args;
    CLI::App* probe = app.add_subcommand("probe", "sampled positivity / monotonicity probe");
    add_common(probe, probe_args);

    CommonArgs conv_args;
    int levels = 3;
    CLI::App* conv = app.add_subcommand("convergence", "grid refinement study");
    add_common(conv, conv_args);
    conv->add_option("--levels", levels, "number of refinement levels")->check(CLI::Range(2, 8));

    CLI11_PARSE(app, argc, argv);

    if (sim->parsed()) return dispatch(sim_args, agestruct::RunMode::Simulate, levels);
    if (bounds->parsed()) return dispatch(bounds_args, agestruct::RunMode::Bounds, levels);
    if (spectral->parsed()) return dispatch(spectral_args, agestruct::RunMode::Spectral, levels);
    if (compare->parsed()) return dispatch(compare_args, agestruct::RunMode::Compare, levels);
    if (inv->parsed()) return dispatch(inv_args, agestruct::RunMode::Invariance, levels);
    if (probe->parsed()) return dispatch(probe_args, agestruct::RunMode::Probe, levels);
    if (conv->parsed()) return dispatch(conv_args, agestruct::RunMode::Convergence, levels);
    return 2;
}
