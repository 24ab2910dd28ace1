#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "tdho/ermakov.hpp"

namespace tdho {

// ---------------------------------------------------------------------------
// Squeezing parameter of the instantaneous vacuum relative to the oscillator
// with frequency omega, as a functional of (rho, rho_dot).
//   lambda = [m0^2 rho_dot^2 + 1/rho^2 + m0^2 omega^2 rho^2 + 2 m0 omega]/(4 m0 omega)
// evaluated through the grouped form
//   lambda - 1 = [m0^2 rho_dot^2 + (1/rho - m0 omega rho)^2]/(4 m0 omega)
// which is nonnegative by construction, and r = arcosh(sqrt(lambda)).

double squeeze_lambda_minus_one(double rho, double rho_dot, double m0, double omega);
double squeeze_lambda(double rho, double rho_dot, double m0, double omega);
double squeeze_param(double rho, double rho_dot, double m0, double omega);

// r from a caller-supplied lambda. Values in [1 - 1e-9, 1) are treated as
// round-off and clamped to 1; smaller values throw NonPhysical.
double squeeze_param_from_lambda(double lambda);

// Squeezing angle in [0, pi]. Throws PhaseUndefined when r <= 1e-12 (the
// angle is meaningless for an unsqueezed state); callers usually substitute 0.
double squeeze_phase(double rho, double rho_dot, double m0, double omega);

// ---------------------------------------------------------------------------
// Observables of the evolved n-th eigenstate, parameterized by (r, phi).

double position_variance(double r, double phi, unsigned n, double m0, double omega,
                         double hbar = 1.0);
double momentum_variance(double r, double phi, unsigned n, double m0, double omega,
                         double hbar = 1.0);
// sigma_x^2 sigma_p^2 = (n + 1/2)^2 hbar^2 [1 + sinh^2(2r) sin^2(phi)]
double uncertainty_product(double r, double phi, unsigned n, double hbar = 1.0);

double mean_energy(double r, unsigned n, double omega, double hbar = 1.0);
double energy_variance(double r, unsigned n, double omega, double hbar = 1.0);
double mean_excitations(double r, unsigned n);
// Adiabaticity measure Q* = cosh(2r) = 2<N>(from ground) + 1.
double adiabaticity(double r);

// ---------------------------------------------------------------------------
// Transition probabilities mu -> nu for the frozen final state, written in
// terms of n0 = sinh^2(r_f), the mean excitation reached from the ground state.
// Zero whenever mu + nu is odd. Uses plain products for mu + nu <= 30 and a
// sign-tracked log-space accumulation beyond that.

double transition_prob(unsigned mu, unsigned nu, double n0);
// 1 - P(0 -> 0) = 1 - 1/sqrt(n0 + 1)
double excitation_prob(double n0);

// ---------------------------------------------------------------------------
// Squeezing data for t >= tau where omega is frozen at omegaf: r is constant,
// the angle rotates with period pi/omegaf.

struct FinalSqueeze {
    FinalSegmentCoefficients seg;
    double lambda = 1.0;
    double r = 0.0;
    double n0 = 0.0;    // sinh^2 r = lambda - 1
    double qstar = 1.0; // cosh 2r = 2 lambda - 1

    double phase(double t) const; // throws PhaseUndefined when r ~ 0
};

FinalSqueeze final_squeeze(const FinalSegmentCoefficients& seg);

// ---------------------------------------------------------------------------
// One observable row along a trajectory.

struct SqueezeRecord {
    double t = 0.0;
    double r = 0.0;
    double phi = 0.0; // 0 when the angle is undefined
    double sigma_x2 = 0.0;
    double sigma_p2 = 0.0;
    double energy = 0.0;
    double energy_var = 0.0;
    double excitations = 0.0;
    double qstar = 1.0;
};

// Requires omega > 0 (observables are undefined while omega^2 < 0).
SqueezeRecord make_record(double t, double rho, double rho_dot, double m0, double omega,
                          unsigned n, double hbar = 1.0);

// Columns: t,r,phi,sigma_x2,sigma_p2,E,sigma_H2,N,Qstar
void write_observables_csv(std::ostream& os, const std::vector<SqueezeRecord>& rows);

} // namespace tdho
