// Command line front end for the TDHO squeezing toolkit.
//
// Subcommands
//   simulate          integrate protocols and write trajectories + observables
//   design            evaluate prescribed-rho profiles and their feasibility
//   sweep             scan config parameters and tabulate final-state scalars
//   equivalence solve find protocol parameters with matching end states
//
// Exit codes: 0 success, 2 configuration error, 3 solver failure,
// 4 expulsive regime rejected under the strict policy.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tdho/errors.hpp"
#include "tdho/scenario.hpp"

namespace {

struct CommonArgs {
    std::string config_file;
    std::string preset_name;
    double rtol = -1.0;
    double atol = -1.0;
    std::string out_dir;
    std::string format;
    std::string policy;
    bool dump = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_file, "JSON scenario file");
    cmd->add_option("--preset", args.preset_name, "built-in scenario: fig1, fig2, fig3, fig4");
    cmd->add_option("--rtol", args.rtol, "integrator relative tolerance override");
    cmd->add_option("--atol", args.atol, "integrator absolute tolerance override");
    cmd->add_option("--out", args.out_dir, "output directory override");
    cmd->add_option("--format", args.format, "table format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--expulsive-policy", args.policy, "record or strict")
        ->check(CLI::IsMember({"record", "strict"}));
    cmd->add_flag("--dump-config", args.dump, "print the resolved config as JSON and exit");
}

tdho::ScenarioConfig resolve_config(const CommonArgs& args) {
    if (!args.config_file.empty() && !args.preset_name.empty())
        throw tdho::ConfigError("pass either --config or --preset, not both");
    tdho::ScenarioConfig cfg;
    if (!args.config_file.empty())
        cfg = tdho::parse_config_file(args.config_file);
    else if (!args.preset_name.empty())
        cfg = tdho::preset(args.preset_name);
    if (args.rtol > 0.0) cfg.rtol = args.rtol;
    if (args.atol > 0.0) cfg.atol = args.atol;
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (!args.format.empty()) cfg.format = args.format;
    if (!args.policy.empty()) cfg.expulsive_policy = args.policy;
    return cfg;
}

int dispatch(const CommonArgs& args,
             tdho::RunResult (*runner)(const tdho::ScenarioConfig&)) {
    const tdho::ScenarioConfig cfg = resolve_config(args);
    if (args.dump) {
        std::cout << tdho::dump_config(cfg) << '\n';
        return 0;
    }
    const tdho::RunResult result = runner(cfg);
    for (const std::string& file : result.files) std::cout << "wrote " << file << '\n';
    if (!result.summary.empty()) std::cout << result.summary << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Time-dependent harmonic oscillator squeezing toolkit"};
    app.require_subcommand(1);

    CommonArgs sim_args, des_args, swp_args, eqv_args;
    CLI::App* sim = app.add_subcommand("simulate", "integrate protocols and record observables");
    add_common(sim, sim_args);
    CLI::App* des = app.add_subcommand("design", "evaluate prescribed-rho ramp profiles");
    add_common(des, des_args);
    CLI::App* swp = app.add_subcommand("sweep", "tabulate final-state scalars over a grid");
    add_common(swp, swp_args);
    CLI::App* eqv = app.add_subcommand("equivalence", "squeezing-equivalence tools");
    eqv->require_subcommand(1);
    CLI::App* slv = eqv->add_subcommand("solve", "search for equivalent protocol parameters");
    add_common(slv, eqv_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // bad usage is a configuration error
    }

    try {
        if (sim->parsed()) return dispatch(sim_args, &tdho::run_simulate);
        if (des->parsed()) return dispatch(des_args, &tdho::run_design);
        if (swp->parsed()) return dispatch(swp_args, &tdho::run_sweep);
        if (slv->parsed()) return dispatch(eqv_args, &tdho::run_equivalence);
        std::cerr << "error: no subcommand selected\n";
        return 2;
    } catch (const tdho::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const tdho::ExpulsiveRegime& e) {
        std::cerr << "error: " << e.what() << " (omega^2 < 0 on [" << e.t_lo << ", " << e.t_hi
                  << "])\n";
        return 4;
    } catch (const tdho::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
