#include <doctest.h>

#include <cmath>
#include <vector>

#include "tdho/errors.hpp"
#include "tdho/ode.hpp"

using namespace tdho;

TEST_SUITE("ode") {

TEST_CASE("harmonic oscillator to machine-level accuracy") {
    const OdeRhs rhs = [](double, const OdeState& y, OdeState& dydt) {
        dydt[0] = y[1];
        dydt[1] = -y[0];
    };
    OdeState y{1.0, 0.0};
    OdeOptions opt;
    opt.rtol = 1e-12;
    opt.atol = 1e-14;
    const OdeStats st = dopri5_integrate(rhs, 0.0, y, 20.0, opt, {}, {});
    CHECK(std::abs(y[0] - std::cos(20.0)) < 1e-10);
    CHECK(std::abs(y[1] + std::sin(20.0)) < 1e-10);
    CHECK(st.accepted > 0);
    CHECK(st.rhs_evals > 6 * st.accepted);
}

TEST_CASE("dense output samples the interpolant, not the step endpoints") {
    const OdeRhs rhs = [](double, const OdeState& y, OdeState& dydt) {
        dydt[0] = y[1];
        dydt[1] = -y[0];
    };
    OdeState y{0.0, 1.0}; // sin(t)
    OdeOptions opt;
    opt.rtol = 1e-10;
    opt.atol = 1e-12;
    std::vector<double> ts;
    for (int i = 0; i <= 100; ++i) ts.push_back(10.0 * i / 100.0);
    double worst = 0.0;
    std::size_t hits = 0;
    dopri5_integrate(rhs, 0.0, y, 10.0, opt, ts, [&](double t, const OdeState& yt) {
        worst = std::max(worst, std::abs(yt[0] - std::sin(t)));
        ++hits;
    });
    CHECK(hits == ts.size());
    CHECK(worst < 1e-8);
}

TEST_CASE("guard violation raises BlowUp") {
    // y' = y^2 blows up at t = 1 from y(0) = 1.
    const OdeRhs rhs = [](double, const OdeState& y, OdeState& dydt) {
        dydt[0] = y[0] * y[0];
        dydt[1] = 0.0;
    };
    OdeState y{1.0, 0.0};
    OdeOptions opt;
    opt.guard = [](double, const OdeState& yt) { return yt[0] < 1e6; };
    CHECK_THROWS_AS(dopri5_integrate(rhs, 0.0, y, 2.0, opt, {}, {}), BlowUp);
}

TEST_CASE("nonautonomous right-hand side uses the stage times") {
    // y' = 2t exactly integrable; a solver evaluating at wrong times fails this.
    const OdeRhs rhs = [](double t, const OdeState&, OdeState& dydt) {
        dydt[0] = 2.0 * t;
        dydt[1] = 0.0;
    };
    OdeState y{0.0, 0.0};
    dopri5_integrate(rhs, 0.0, y, 3.0, {}, {}, {});
    CHECK(std::abs(y[0] - 9.0) < 1e-10);
}

} // TEST_SUITE
