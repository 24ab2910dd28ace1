#include "tdho/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tdho/errors.hpp"

namespace tdho {
namespace {

// Dormand-Prince 5(4) tableau (Hairer, Norsett & Wanner, DOPRI5).
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;

constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                 a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;

// Embedded 4th-order error coefficients (b - bhat).
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

// Dense-output coefficients.
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

struct DenseCoef {
    OdeState c1, c2, c3, c4, c5;
    double t0 = 0.0, h = 0.0;

    double eval(std::size_t i, double t) const {
        const double th = (t - t0) / h;
        return c1[i] + th * (c2[i] + (1.0 - th) * (c3[i] + th * (c4[i] + (1.0 - th) * c5[i])));
    }
};

double initial_step(const OdeRhs& rhs, double t0, const OdeState& y, const OdeState& f0,
                    double t1, double rtol, double atol, OdeStats& stats) {
    // Hairer's hinit heuristic, order 5.
    double d0 = 0.0, d1n = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        const double sc = atol + rtol * std::fabs(y[i]);
        d0 = std::max(d0, std::fabs(y[i]) / sc);
        d1n = std::max(d1n, std::fabs(f0[i]) / sc);
    }
    double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * (d0 / d1n);
    h0 = std::min(h0, t1 - t0);

    OdeState y1, f1;
    for (std::size_t i = 0; i < 2; ++i) y1[i] = y[i] + h0 * f0[i];
    rhs(t0 + h0, y1, f1);
    ++stats.rhs_evals;

    double d2 = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        const double sc = atol + rtol * std::fabs(y[i]);
        d2 = std::max(d2, std::fabs(f1[i] - f0[i]) / sc);
    }
    d2 /= h0;

    const double dm = std::max(d1n, d2);
    double h1 = (dm <= 1e-15) ? std::max(1e-6, h0 * 1e-3)
                              : std::pow(0.01 / dm, 1.0 / 5.0);
    return std::min({100.0 * h0, h1, t1 - t0});
}

} // namespace

OdeStats dopri5_integrate(const OdeRhs& rhs, double t0, OdeState& y, double t1,
                          const OdeOptions& opt, std::span<const double> sample_ts,
                          const std::function<void(double, const OdeState&)>& sink) {
    if (!(t1 > t0)) throw Error("dopri5: t1 must exceed t0");
    OdeStats stats;

    std::size_t next_sample = 0;
    // Deliver samples exactly at t0 before stepping.
    while (next_sample < sample_ts.size() && sample_ts[next_sample] <= t0) {
        if (sink) sink(sample_ts[next_sample], y);
        ++next_sample;
    }

    OdeState k1, k2, k3, k4, k5, k6, k7, yt, ynew, err;
    double t = t0;
    rhs(t, y, k1);
    ++stats.rhs_evals;

    double h = opt.h_init > 0.0 ? std::min(opt.h_init, t1 - t0)
                                : initial_step(rhs, t0, y, k1, t1, opt.rtol, opt.atol, stats);
    const double hmin_floor = 16.0 * std::numeric_limits<double>::epsilon();
    double errold = 1.0e-4;

    while (t < t1) {
        if (stats.accepted + stats.rejected >= opt.max_steps)
            throw StepFailure("dopri5: step budget exhausted at t=" + std::to_string(t));
        if (h < hmin_floor * std::max(std::fabs(t), 1.0))
            throw StepFailure("dopri5: step size underflow at t=" + std::to_string(t));
        if (t + 1.01 * h >= t1) h = t1 - t;

        for (std::size_t i = 0; i < 2; ++i) yt[i] = y[i] + h * a21 * k1[i];
        rhs(t + c2 * h, yt, k2);
        for (std::size_t i = 0; i < 2; ++i) yt[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        rhs(t + c3 * h, yt, k3);
        for (std::size_t i = 0; i < 2; ++i)
            yt[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs(t + c4 * h, yt, k4);
        for (std::size_t i = 0; i < 2; ++i)
            yt[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs(t + c5 * h, yt, k5);
        for (std::size_t i = 0; i < 2; ++i)
            yt[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        rhs(t + h, yt, k6);
        for (std::size_t i = 0; i < 2; ++i)
            ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        rhs(t + h, ynew, k7);
        stats.rhs_evals += 6;

        double errnorm = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
            err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sc = opt.atol + opt.rtol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
            const double q = err[i] / sc;
            errnorm += q * q;
        }
        errnorm = std::sqrt(errnorm / 2.0);

        if (errnorm <= 1.0) {
            // Accept; hand out dense output for samples inside (t, t+h].
            if (next_sample < sample_ts.size() && sample_ts[next_sample] <= t + h) {
                DenseCoef dc;
                dc.t0 = t;
                dc.h = h;
                for (std::size_t i = 0; i < 2; ++i) {
                    const double dy = ynew[i] - y[i];
                    const double bspl = h * k1[i] - dy;
                    dc.c1[i] = y[i];
                    dc.c2[i] = dy;
                    dc.c3[i] = bspl;
                    dc.c4[i] = dy - h * k7[i] - bspl;
                    dc.c5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                                    d6 * k6[i] + d7 * k7[i]);
                }
                while (next_sample < sample_ts.size() && sample_ts[next_sample] <= t + h) {
                    OdeState ys{dc.eval(0, sample_ts[next_sample]), dc.eval(1, sample_ts[next_sample])};
                    if (sink) sink(sample_ts[next_sample], ys);
                    ++next_sample;
                }
            }
            t += h;
            y = ynew;
            k1 = k7; // FSAL
            ++stats.accepted;
            if (opt.guard && !opt.guard(t, y))
                throw BlowUp("dopri5: guard tripped at t=" + std::to_string(t));

            // PI controller (beta = 0.04).
            double fac = std::pow(errnorm > 0.0 ? errnorm : 1e-10, -0.2) *
                         std::pow(errold, 0.04) * 0.9;
            fac = std::clamp(fac, 0.2, 5.0);
            h *= fac;
            errold = std::max(errnorm, 1.0e-4);
        } else {
            ++stats.rejected;
            h *= std::max(0.2, 0.9 * std::pow(errnorm, -0.2));
        }
    }

    // Anything left must sit exactly at t1 up to rounding.
    while (next_sample < sample_ts.size()) {
        if (sink) sink(sample_ts[next_sample], y);
        ++next_sample;
    }
    return stats;
}

} // namespace tdho
