#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "tdho/ermakov.hpp"
#include "tdho/errors.hpp"
#include "tdho/protocols.hpp"
#include "tdho/squeeze.hpp"

using namespace tdho;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kE = 2.71828182845904523536;

RhoProfile fig2_poly_profile() {
    AnsatzSpec s;
    s.rho0 = rho_constant(1.0, 20.0);
    s.delta = 1.0 / std::sqrt(1.25);
    s.epsilon = 3.0;
    s.tau = 0.5;
    return RhoProfile(ansatz_coefficients(s), 1.0);
}

} // namespace

TEST_SUITE("ermakov") {

TEST_CASE("classical pairs have the advertised constant Wronskian") {
    const ClassicalPair h = harmonic_pair(3.0);
    for (double t : {0.0, 0.4, 2.0}) {
        CHECK(h.u(t) * h.dv(t) - h.du(t) * h.v(t) == doctest::Approx(-3.0).epsilon(1e-12));
        CHECK(h.omega_sq(t) == doctest::Approx(9.0));
    }
    const double tref = 1.0 / std::log(2.0);
    const ClassicalPair b = bessel_ramp_pair(2.657887, tref);
    const double w_expected = 2.0 / (kPi * tref);
    for (double t : {0.0, 0.3, 1.0}) {
        CHECK(b.u(t) * b.dv(t) - b.du(t) * b.v(t) ==
              doctest::Approx(w_expected).epsilon(1e-10));
        const double w = 2.657887 * std::exp(t / tref);
        CHECK(b.omega_sq(t) == doctest::Approx(w * w).epsilon(1e-12));
    }
}

TEST_CASE("classical pair solutions satisfy their oscillator equation") {
    // Finite-difference curvature against -omega^2 y for the Bessel pair.
    const ClassicalPair b = bessel_ramp_pair(1.7, 0.8);
    const double h = 1e-5;
    for (double t : {0.1, 0.6, 1.4}) {
        const double ydd = (b.u(t + h) - 2.0 * b.u(t) + b.u(t - h)) / (h * h);
        CHECK(ydd == doctest::Approx(-b.omega_sq(t) * b.u(t)).epsilon(1e-5));
        const double vdd = (b.v(t + h) - 2.0 * b.v(t) + b.v(t - h)) / (h * h);
        CHECK(vdd == doctest::Approx(-b.omega_sq(t) * b.v(t)).epsilon(1e-5));
    }
}

TEST_CASE("formal coefficients reproduce the equilibrium start") {
    const double m0 = 1.3, w0 = 2.2;
    const ClassicalPair pair = harmonic_pair(w0);
    const FormalCoefficients fc =
        formal_coefficients(pair.u(0.0), pair.du(0.0), pair.v(0.0), pair.dv(0.0), m0, w0);
    const FormalSolution sol(pair, fc, m0);
    CHECK(sol.rho(0.0) == doctest::Approx(rho_constant(m0, w0)).epsilon(1e-13));
    CHECK(std::abs(sol.rho_dot(0.0)) < 1e-13);
    CHECK(fc.a * fc.b - fc.c * fc.c == doctest::Approx(1.0 / (m0 * m0 * w0 * w0)).epsilon(1e-12));
    // Identical solutions have zero Wronskian.
    CHECK_THROWS_AS(formal_coefficients(1.0, 0.0, 1.0, 0.0, 1.0, 1.0), DegenerateSolutions);
}

TEST_CASE("formal solution through arbitrary data solves the Ermakov-Pinney equation") {
    const double m0 = 0.7;
    const ClassicalPair pair = bessel_ramp_pair(1.9, 1.1);
    const FormalSolution sol = formal_solution_through(pair, 0.2, 0.8, -0.35, m0);
    CHECK(sol.rho(0.2) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(sol.rho_dot(0.2) == doctest::Approx(-0.35).epsilon(1e-11));
    for (double t : {0.3, 0.7, 1.3}) {
        const double rho = sol.rho(t);
        const double res = sol.rho_ddot(t) + pair.omega_sq(t) * rho -
                           1.0 / (m0 * m0 * rho * rho * rho);
        CHECK(std::abs(res) < 1e-8 * pair.omega_sq(t) * rho);
    }
}

TEST_CASE("negative formal square is reported as non-physical") {
    const FormalSolution sol(harmonic_pair(1.0), FormalCoefficients{1.0, 1.0, 2.0}, 1.0);
    CHECK_THROWS_AS(sol.rho(0.75 * kPi), NonPhysical);
}

TEST_CASE("jump held for a half period of the intermediate frequency undoes itself") {
    for (unsigned q : {1u, 2u, 3u}) {
        const double w1 = 2.0;
        const double tau = q * kPi / w1;
        const FrequencyProtocol p = make_sudden_jump(1.0, 1.0, w1, tau, 1.0);
        const ErmakovState s = end_state_closed_form(p);
        CHECK(std::abs(s.rho - 1.0) < 1e-12);
        CHECK(std::abs(s.rho_dot) < 1e-12);
    }
}

TEST_CASE("adaptive and closed-form routes agree for jump and ramp") {
    IntegrateOptions opt;
    opt.rtol = 1e-12;
    opt.atol = 1e-14;
    for (const FrequencyProtocol& p :
         {make_sudden_jump(1.0, 2.657887, 4.473165, 1.0, kE * 2.657887),
          make_exp_ramp(1.0, 2.657887, 1.0, kE * 2.657887)}) {
        const ErmakovState a = end_state_closed_form(p);
        const ErmakovState b = end_state_ode(p, opt);
        CHECK(std::abs(a.rho - b.rho) < 1e-9);
        CHECK(std::abs(a.rho_dot - b.rho_dot) < 1e-9);
    }
}

TEST_CASE("exponential ramp end state matches the independently computed value") {
    const FrequencyProtocol p = make_exp_ramp(1.0, 2.657887, 1.0, kE * 2.657887);
    const ErmakovState s = end_state_closed_form(p);
    CHECK(s.rho == doctest::Approx(0.38275225767421073).epsilon(1e-10));
    CHECK(s.rho_dot == doctest::Approx(-0.6548385350736271).epsilon(1e-10));
}

TEST_CASE("trajectories label pre, modulation and final stretches") {
    const FrequencyProtocol p = make_sudden_jump(1.0, 2.0, 3.0, 1.0, 2.5);
    const std::vector<double> grid = linspace(-0.25, 2.0, 91);
    const ErmakovTrajectory traj = integrate_ep(p, grid);
    REQUIRE(traj.size() == 91);
    const double rho0 = rho_constant(1.0, 2.0);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (traj.t[i] <= 0.0) {
            CHECK(traj.segment[i] == "pre");
            CHECK(traj.rho[i] == doctest::Approx(rho0).epsilon(1e-14));
            CHECK(traj.rho_dot[i] == 0.0);
        } else if (traj.t[i] > 1.0) {
            CHECK(traj.segment[i] == "final");
        } else {
            CHECK(traj.segment[i] == "seg0:constant");
        }
    }
    CHECK(traj.back_state().t == doctest::Approx(2.0));
}

TEST_CASE("closed-form trajectories satisfy the equation on every grid point") {
    const FrequencyProtocol p = make_exp_ramp(1.0, 2.657887, 1.0, kE * 2.657887);
    const ErmakovTrajectory traj = solve_closed_form(p, linspace(-0.25, 2.0, 201));
    CHECK(max_ermakov_residual(traj) < 1e-10);
}

TEST_CASE("squeezing parameter is frozen once the modulation stops") {
    const FrequencyProtocol p = make_sudden_jump(1.0, 2.0, 5.0, 0.7, 3.0);
    const ErmakovTrajectory traj = solve_closed_form(p, linspace(0.7, 5.0, 200));
    const double r0 = squeeze_param(traj.rho[1], traj.rho_dot[1], 1.0, 3.0);
    CHECK(r0 > 0.1);
    for (std::size_t i = 1; i < traj.size(); ++i) {
        if (traj.t[i] <= 0.7) continue;
        CHECK(std::abs(squeeze_param(traj.rho[i], traj.rho_dot[i], 1.0, 3.0) - r0) < 1e-12);
    }
}

TEST_CASE("final segment coefficients reproduce the handover data") {
    const double m0 = 1.4, wf = 2.3, tau = 0.9, delta = 0.77, eps = -0.41;
    const FinalSegmentCoefficients seg = final_segment(delta, eps, m0, wf, tau);
    CHECK(seg.rho(tau) == doctest::Approx(delta).epsilon(1e-13));
    CHECK(seg.rho_dot(tau) == doctest::Approx(eps).epsilon(1e-12));
    CHECK(seg.af * seg.bf - seg.cf * seg.cf ==
          doctest::Approx(1.0 / (m0 * m0 * wf * wf)).epsilon(1e-12));
    // Width oscillates with period pi/omegaf and solves the equation.
    const double period = kPi / wf;
    for (double t : {1.0, 1.7, 2.5}) {
        CHECK(seg.rho(t + period) == doctest::Approx(seg.rho(t)).epsilon(1e-11));
        const double rho = seg.rho(t);
        const double res = seg.rho_ddot(t) + wf * wf * rho - 1.0 / (m0 * m0 * rho * rho * rho);
        CHECK(std::abs(res) < 1e-10 * wf * wf * rho);
    }
}

TEST_CASE("strict expulsive policy aborts with the offending interval") {
    const FrequencyProtocol p = make_from_rho(fig2_poly_profile(), 1.25);
    IntegrateOptions opt;
    opt.strict_expulsive = true;
    bool thrown = false;
    try {
        integrate_ep(p, linspace(0.0, 1.0, 21), opt);
    } catch (const ExpulsiveRegime& e) {
        thrown = true;
        CHECK(e.t_lo > 0.0);
        CHECK(e.t_hi > e.t_lo);
        CHECK(e.t_hi <= 0.5);
    }
    CHECK(thrown);
    // The default policy keeps going.
    const ErmakovTrajectory traj = integrate_ep(p, linspace(0.0, 1.0, 21));
    CHECK(traj.size() == 21);
}

TEST_CASE("closed-form route refuses prescribed-width segments") {
    const FrequencyProtocol p = make_from_rho(fig2_poly_profile(), 1.25);
    CHECK_THROWS_AS(solve_closed_form(p, linspace(0.0, 1.0, 11)), ConfigError);
}

TEST_CASE("trajectory csv header and grid helpers") {
    const FrequencyProtocol p = make_sudden_jump(1.0, 2.0, 3.0, 1.0, 2.0);
    const ErmakovTrajectory traj = integrate_ep(p, linspace(0.0, 1.5, 4));
    std::ostringstream os;
    write_trajectory_csv(os, traj);
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    CHECK(header == "t,rho,rho_dot,omega,segment");

    const std::vector<double> g = linspace(-1.0, 3.0, 9);
    CHECK(g.size() == 9);
    CHECK(g.front() == -1.0);
    CHECK(g.back() == 3.0);
    CHECK(g[4] == doctest::Approx(1.0));
    CHECK(linspace(2.0, 5.0, 1) == std::vector<double>{2.0});
}

} // TEST_SUITE
