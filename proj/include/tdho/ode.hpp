#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>

namespace tdho {

using OdeState = std::array<double, 2>;
using OdeRhs = std::function<void(double t, const OdeState& y, OdeState& dydt)>;

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_init = 0.0;                 // 0 -> choose automatically
    std::size_t max_steps = 2'000'000;
    // Return false to abort the integration (mapped to BlowUp by the caller's message).
    std::function<bool(double t, const OdeState& y)> guard;
};

struct OdeStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t rhs_evals = 0;
};

// Dormand-Prince 5(4) with the standard quartic dense-output interpolant.
// Integrates y from t0 to t1 (t1 > t0), updating y in place. Sample times must
// be sorted and lie in [t0, t1]; each is delivered through sink via dense output.
// Throws StepFailure when the controller stalls, BlowUp when the guard trips.
OdeStats dopri5_integrate(const OdeRhs& rhs, double t0, OdeState& y, double t1,
                          const OdeOptions& opt, std::span<const double> sample_ts,
                          const std::function<void(double, const OdeState&)>& sink);

} // namespace tdho
