#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "tdho/ode.hpp"
#include "tdho/protocols.hpp"

namespace tdho {

struct ErmakovState {
    double t = 0.0;
    double rho = 1.0;
    double rho_dot = 0.0;
};

// ---------------------------------------------------------------------------
// Formal solution of the Ermakov-Pinney equation on top of a classical pair
// (u, v) of solutions of y'' + omega^2(t) y = 0 with nonzero Wronskian W:
//   rho(t)^2 = A u^2 + B v^2 + 2 C u v,  with A B - C^2 = 1/(m0 W)^2.

struct FormalCoefficients {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
};

// Coefficients that impose rho(t_s) = 1/sqrt(m0*omega0), rho'(t_s) = 0 given
// the pair's values (u0, du0, v0, dv0) at t_s. Throws DegenerateSolutions when
// the Wronskian vanishes.
FormalCoefficients formal_coefficients(double u0, double du0, double v0, double dv0,
                                       double m0, double omega0);

// A classical solution pair with its frequency, all as callables of global t.
struct ClassicalPair {
    std::function<double(double)> u, du, v, dv;
    std::function<double(double)> omega_sq;
};

// u = sin(omega t), v = cos(omega t), W = -omega.
ClassicalPair harmonic_pair(double omega);

// Exponential ramp omega(t) = omega_ref exp(t/tau_ref):
// u = J0(omega_ref tau_ref e^{t/tau_ref}), v = Y0(same), W = 2/(pi tau_ref).
ClassicalPair bessel_ramp_pair(double omega_ref, double tau_ref);

class FormalSolution {
public:
    FormalSolution(ClassicalPair pair, FormalCoefficients coef, double m0)
        : pair_(std::move(pair)), coef_(coef), m0_(m0) {}

    double rho(double t) const;
    double rho_dot(double t) const;
    double rho_ddot(double t) const;
    ErmakovState state(double t) const;

    const FormalCoefficients& coefficients() const { return coef_; }
    double m0() const { return m0_; }

private:
    void squares(double t, double& s, double& ds, double& dds) const;

    ClassicalPair pair_;
    FormalCoefficients coef_;
    double m0_;
};

// Formal solution matching arbitrary initial data (rho_s > 0, drho_s) at t_s.
FormalSolution formal_solution_through(ClassicalPair pair, double t_s, double rho_s,
                                       double drho_s, double m0);

// ---------------------------------------------------------------------------
// Constant-frequency continuation for t > tau, built from the state reached at
// the end of the modulation. Everything downstream (squeezing parameter, phase,
// variances) follows from these three coefficients.

struct FinalSegmentCoefficients {
    double af = 0.0;
    double bf = 0.0;
    double cf = 0.0;
    double delta = 0.0;   // rho(tau)
    double epsilon = 0.0; // rho'(tau)
    double omegaf = 0.0;
    double tau = 0.0;
    double m0 = 0.0;

    double rho(double t) const;
    double rho_dot(double t) const;
    double rho_ddot(double t) const;
};

FinalSegmentCoefficients final_segment(double rho_tau, double drho_tau, double m0,
                                       double omegaf, double tau);

// ---------------------------------------------------------------------------
// Sampled trajectory over a caller-supplied time grid.

struct ErmakovTrajectory {
    double m0 = 0.0;
    std::vector<double> t;
    std::vector<double> rho;
    std::vector<double> rho_dot;
    std::vector<double> rho_ddot;
    std::vector<double> omega_sq;
    std::vector<std::string> segment;

    std::size_t size() const { return t.size(); }
    ErmakovState back_state() const;
};

struct IntegrateOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    // "record" keeps integrating through omega^2 < 0 stretches; "strict" throws
    // ExpulsiveRegime as soon as one is detected on the sample grid.
    bool strict_expulsive = false;
};

// Adaptive-step route: integrates the Ermakov-Pinney equation across (0, tau]
// segment by segment (restarting exactly at the boundaries), then continues
// with the constant-frequency closed form for t > tau. Grid times may extend
// to both sides of the modulation window.
ErmakovTrajectory integrate_ep(const FrequencyProtocol& protocol,
                               const std::vector<double>& grid,
                               const IntegrateOptions& opt = {});

// Closed-form route: chains formal solutions through every segment. Available
// when all segments are constant or exponential-ramp pieces.
ErmakovTrajectory solve_closed_form(const FrequencyProtocol& protocol,
                                    const std::vector<double>& grid);

// Final-state helpers (state at t = tau).
ErmakovState end_state_ode(const FrequencyProtocol& protocol,
                           const IntegrateOptions& opt = {});
ErmakovState end_state_closed_form(const FrequencyProtocol& protocol);

// Largest scaled equation residual |rho'' + omega^2 rho - 1/(m0^2 rho^3)| over
// the trajectory, normalized by max(1, |omega^2 rho|, 1/(m0^2 rho^3)).
double max_ermakov_residual(const ErmakovTrajectory& traj);

// Columns: t,rho,rho_dot,omega,segment. Imaginary omega is written as nan.
void write_trajectory_csv(std::ostream& os, const ErmakovTrajectory& traj);

// Uniform grid helper: points values from t_min to t_max inclusive.
std::vector<double> linspace(double t_min, double t_max, std::size_t points);

} // namespace tdho
