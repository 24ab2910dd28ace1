#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tdho/errors.hpp"

namespace tdho {

// ---------------------------------------------------------------------------
// Squeezing equivalence of frozen end states. Two modulations are equivalent
// when they hand over the same (omega_f, delta, epsilon) at their respective
// switch-off times; everything observable for t > tau then coincides.

struct EndState {
    double delta = 1.0;   // rho(tau)
    double epsilon = 0.0; // rho'(tau)
    double omegaf = 1.0;
    double m0 = 1.0;
};

struct Tolerance {
    double atol = 1e-10;
    double rtol = 1e-8;

    bool close(double a, double b) const;
    double slack(double a, double b) const; // atol + rtol*max(|a|,|b|)
};

struct EquivalenceCheck {
    bool equivalent = false;
    double d_omegaf = 0.0; // absolute residuals
    double d_delta = 0.0;
    double d_epsilon = 0.0;
    double r_a = 0.0; // final squeezing parameters of the two states
    double r_b = 0.0;

    explicit operator bool() const { return equivalent; }
};

// Requires matching m0 (the comparison is meaningless otherwise). On every
// positive result the squeezing parameters are cross-checked against the
// bound propagated from the component tolerances.
EquivalenceCheck check_equivalence(const EndState& a, const EndState& b,
                                   const Tolerance& tol = {});

// All-pairs equivalence of k >= 2 end states.
bool chain_equivalence(const std::vector<EndState>& states, const Tolerance& tol = {});

// Duration that undoes a sudden jump to omega1: tau = q pi / omega1.
double janszky_adam_tau(double omega1, unsigned q);

// ---------------------------------------------------------------------------
// Nonlinear equivalence conditions over free protocol parameters.

struct EquivalenceProblem {
    std::vector<std::string> names;                           // one per parameter
    std::vector<std::pair<double, double>> box;               // search bounds
    std::function<std::vector<double>(const std::vector<double>&)> residual;
    std::size_t residual_dim = 2;
    std::size_t grid = 64;              // scan resolution per dimension
    std::size_t max_iterations = 60;    // polish iterations
    double accept_tol = 1e-9;           // residual norm accepted as a root
    double degenerate_frac = 0.25;      // scan fraction that flags a flat zero set

    std::size_t dim() const { return box.size(); }
};

struct EquivalenceRoot {
    std::vector<double> params;
    std::vector<double> residual;
    double residual_norm = 0.0;
};

struct EquivalenceSolution {
    std::vector<EquivalenceRoot> roots;
    bool degenerate_family = false; // residual vanishes over a large part of the box
    double best_norm = 0.0;         // smallest norm seen anywhere in the search
};

// Coarse grid scan for sign-change cells and local norm minima, then damped
// Gauss-Newton polish of every candidate. Throws NoRootFound when nothing
// reaches accept_tol and the zero set is not degenerate.
EquivalenceSolution solve_equivalence(const EquivalenceProblem& problem);

// Polish from an explicit start; throws NoRootFound when it stalls above tol.
EquivalenceRoot polish_root(const EquivalenceProblem& problem, std::vector<double> start);

// ---------------------------------------------------------------------------
// Prebuilt problems.

// Sudden jump to omega1 held for tau versus the exponential ramp that connects
// the same omega0 to omegaf = e*omega0 over the same tau. Solved in the scaled
// variables (omega0*tau, omega1*tau); the duration drops out.
EquivalenceProblem jump_vs_exp_ramp_problem(double m0 = 1.0);

// Sudden jump to omega1 switched back to omega0: unknown duration tau, residual
// (delta - rho0, epsilon). Roots form the family tau = q pi / omega1.
EquivalenceProblem janszky_tau_problem(double omega0, double omega1, double m0,
                                       double tau_min, double tau_max);

} // namespace tdho
