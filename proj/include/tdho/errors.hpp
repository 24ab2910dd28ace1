#pragma once

#include <stdexcept>
#include <string>

namespace tdho {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Configuration / input validation problems (bad files, bad fields, bad preconditions).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Eq. of motion frequency turned imaginary: the radicand 1/(m0^2 rho^4) - rho_ddot/rho
// went negative somewhere on the requested interval.
class ExpulsiveRegime : public Error {
public:
    ExpulsiveRegime(const std::string& msg, double t_lo, double t_hi)
        : Error(msg), t_lo(t_lo), t_hi(t_hi) {}
    double t_lo;
    double t_hi;
};

// Boundary-condition matrix of an ansatz basis is singular (e.g. polynomial basis with beta=0).
class SingularBasis : public Error {
public:
    using Error::Error;
};

// Classical solution pair has (numerically) vanishing Wronskian.
class DegenerateSolutions : public Error {
public:
    using Error::Error;
};

// A quantity left its mathematically guaranteed range by more than rounding slack.
class NonPhysical : public Error {
public:
    using Error::Error;
};

// Squeezing phase is undefined because r is (numerically) zero.
class PhaseUndefined : public Error {
public:
    using Error::Error;
};

// Adaptive integration could not proceed (step size underflow / step budget exhausted).
class StepFailure : public Error {
public:
    using Error::Error;
};

// Trajectory left the configured [rho_min, rho_max] guards.
class BlowUp : public Error {
public:
    using Error::Error;
};

// Root scan + polish found no residual zero in the box.
class NoRootFound : public Error {
public:
    NoRootFound(const std::string& msg, double best_norm)
        : Error(msg), best_norm(best_norm) {}
    double best_norm;
};

} // namespace tdho
