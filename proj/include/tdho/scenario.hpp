#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tdho/equivalence.hpp"
#include "tdho/ermakov.hpp"
#include "tdho/protocols.hpp"

namespace tdho {

// ---------------------------------------------------------------------------
// Declarative scenario description, loadable from JSON and echoable back.

struct ProtocolConfig {
    std::string name = "protocol";
    std::string type = "sudden_jump"; // sudden_jump | exp_ramp | ansatz | quasi_optimal
    double omega0 = 1.0;
    double omega1 = 0.0; // sudden_jump only
    double omegaf = 0.0; // 0 -> omega0 for sudden_jump
    double tau = 1.0;
    // ansatz / quasi_optimal profile parameters
    std::string basis = "polynomial"; // ansatz only: polynomial | exponential
    double rate = 1.0;
    std::optional<double> delta; // default 1/sqrt(m0*omegaf)
    double epsilon = 0.0;
    double gamma = 0.0;
    double sigma = 0.3; // quasi_optimal cap fraction
};

struct SweepParameter {
    std::string path; // JSON pointer into the canonical config, e.g. /protocols/0/tau
    std::vector<double> values;
};

struct SweepConfig {
    std::vector<SweepParameter> parameters;
    std::size_t max_points = 10000;
    unsigned n = 0; // quantum number used for the reported observables
};

struct EquivalenceConfig {
    std::string problem = "jump_vs_exp_ramp"; // or janszky_tau | identical
    double omega0 = 1.0;                      // janszky_tau inputs
    double omega1 = 2.0;
    double tau_min = 0.1;
    double tau_max = 6.4;
    std::size_t grid = 0;    // 0 -> problem default
    double accept_tol = 0.0; // 0 -> problem default
    std::vector<std::pair<double, double>> box; // optional box override
    bool write_scan = false;
};

struct ScenarioConfig {
    double m0 = 1.0;
    double hbar = 1.0;
    double t_min_over_tau = -0.25;
    double t_max_over_tau = 2.0;
    std::size_t points = 901;
    double rtol = 1e-10;
    double atol = 1e-12;
    std::string expulsive_policy = "record"; // record | strict
    std::vector<unsigned> quantum_numbers = {0};
    std::vector<ProtocolConfig> protocols;
    SweepConfig sweep;
    EquivalenceConfig equivalence;
    std::string out_dir = ".";
    std::string prefix = "tdho";
    std::string format = "csv"; // csv | json (time-series files)
};

// Scenario presets named after the bundled example configurations.
ScenarioConfig preset(const std::string& name); // fig1 | fig2 | fig3 | fig4

// JSON ingestion with field-level error messages (paths in the message).
ScenarioConfig parse_config_text(const std::string& text);
ScenarioConfig parse_config_file(const std::string& path);

// Canonical JSON echo; parse_config_text(dump_config(c)) reproduces c.
std::string dump_config(const ScenarioConfig& config);

// Protocol construction shared by the runners.
FrequencyProtocol build_protocol(const ProtocolConfig& pc, double m0);
// Present only for prescribed-rho types (ansatz, quasi_optimal).
std::optional<RhoProfile> build_profile(const ProtocolConfig& pc, double m0);

// ---------------------------------------------------------------------------
// Runners. Each writes its artifacts under config.out_dir and returns the file
// list plus a JSON summary (also written when the runner produces one).

struct RunResult {
    std::vector<std::string> files;
    std::string summary; // JSON text
};

RunResult run_simulate(const ScenarioConfig& config);
RunResult run_design(const ScenarioConfig& config);
RunResult run_sweep(const ScenarioConfig& config);
RunResult run_equivalence(const ScenarioConfig& config);

} // namespace tdho
