#include <doctest.h>

#include <cmath>
#include <vector>

#include "tdho/equivalence.hpp"
#include "tdho/ermakov.hpp"
#include "tdho/errors.hpp"
#include "tdho/protocols.hpp"
#include "tdho/squeeze.hpp"

using namespace tdho;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_SUITE("equivalence") {

TEST_CASE("tolerance helper") {
    Tolerance tol;
    CHECK(tol.slack(1.0, 2.0) == doctest::Approx(1e-10 + 2e-8));
    CHECK(tol.close(1.0, 1.0 + 1e-9));
    CHECK(!tol.close(1.0, 1.001));
}

TEST_CASE("end-state comparison checks all three handover numbers") {
    EndState a{0.9, -0.7, 2.0, 1.0};
    EndState b = a;
    const EquivalenceCheck same = check_equivalence(a, b);
    CHECK(same.equivalent);
    CHECK(same.d_delta == 0.0);
    CHECK(same.r_a == doctest::Approx(same.r_b));

    b.epsilon = -0.5;
    const EquivalenceCheck diff = check_equivalence(a, b);
    CHECK(!diff.equivalent);
    CHECK(diff.d_epsilon == doctest::Approx(0.2));

    b = a;
    b.omegaf = 2.5;
    CHECK(!check_equivalence(a, b).equivalent);

    b = a;
    b.m0 = 2.0;
    CHECK_THROWS_AS(check_equivalence(a, b), ConfigError);
    b = a;
    b.delta = -0.9;
    CHECK_THROWS_AS(check_equivalence(a, b), ConfigError);
}

TEST_CASE("equivalent end states share the whole frozen evolution") {
    const EndState a{0.9, -0.7, 2.0, 1.0};
    EndState b = a;
    b.delta += 1e-12;
    REQUIRE(check_equivalence(a, b).equivalent);
    const FinalSegmentCoefficients fa = final_segment(a.delta, a.epsilon, a.m0, a.omegaf, 0.5);
    const FinalSegmentCoefficients fb = final_segment(b.delta, b.epsilon, b.m0, b.omegaf, 0.5);
    for (double t : {0.6, 1.1, 2.3}) {
        CHECK(fa.rho(t) == doctest::Approx(fb.rho(t)).epsilon(1e-10));
        CHECK(fa.rho_dot(t) == doctest::Approx(fb.rho_dot(t)).epsilon(1e-10));
    }
}

TEST_CASE("exact-tolerance comparison is an equivalence relation") {
    const Tolerance exact{0.0, 0.0};
    const EndState a{0.8, 0.3, 1.7, 1.0};
    const EndState b = a;
    const EndState c = a;
    CHECK(check_equivalence(a, a, exact).equivalent);                   // reflexive
    CHECK(check_equivalence(a, b, exact).equivalent);
    CHECK(check_equivalence(b, a, exact).equivalent);                   // symmetric
    CHECK((check_equivalence(a, b, exact) && check_equivalence(b, c, exact)
               ? check_equivalence(a, c, exact).equivalent
               : false));                                               // transitive
    EndState d = a;
    d.epsilon = std::nextafter(d.epsilon, 1.0);
    CHECK(!check_equivalence(a, d, exact).equivalent);
}

TEST_CASE("chains need at least two states and compare all pairs") {
    const EndState a{0.9, -0.7, 2.0, 1.0};
    CHECK_THROWS_AS(chain_equivalence({a}), ConfigError);
    CHECK(chain_equivalence({a, a, a}));
    EndState off = a;
    off.epsilon += 1.0;
    CHECK(!chain_equivalence({a, a, off}));
}

TEST_CASE("reversal durations undo the jump") {
    CHECK(janszky_adam_tau(2.0, 1) == doctest::Approx(kPi / 2.0).epsilon(1e-15));
    CHECK(janszky_adam_tau(5.0, 3) == doctest::Approx(3.0 * kPi / 5.0).epsilon(1e-15));
    // Full pipeline: jump to 5*omega0 held for three half-periods.
    const double tau = janszky_adam_tau(5.0, 3);
    const ErmakovState s = end_state_closed_form(make_sudden_jump(1.0, 1.0, 5.0, tau, 1.0));
    CHECK(squeeze_param(s.rho, s.rho_dot, 1.0, 1.0) < 1e-12);
    // No jump at all: any duration works.
    const ErmakovState id = end_state_closed_form(make_sudden_jump(1.0, 2.0, 2.0, 1.37, 2.0));
    CHECK(squeeze_param(id.rho, id.rho_dot, 1.0, 2.0) < 1e-12);
}

TEST_CASE("jump versus exponential ramp has the known scaled root") {
    const EquivalenceProblem prob = jump_vs_exp_ramp_problem();
    const EquivalenceSolution sol = solve_equivalence(prob);
    REQUIRE(!sol.roots.empty());
    CHECK(!sol.degenerate_family);
    // Closest root to the reference values.
    double best = 1e9;
    EquivalenceRoot pick = sol.roots.front();
    for (const EquivalenceRoot& r : sol.roots) {
        const double d = std::hypot(r.params[0] - 2.65788789, r.params[1] - 4.47316512);
        if (d < best) {
            best = d;
            pick = r;
        }
    }
    CHECK(std::abs(pick.params[0] - 2.65788789) < 1e-6);
    CHECK(std::abs(pick.params[1] - 4.47316512) < 1e-6);
    CHECK(pick.residual_norm <= prob.accept_tol);

    // Deterministic and order-independent output, sorted by parameters.
    const EquivalenceSolution again = solve_equivalence(prob);
    REQUIRE(again.roots.size() == sol.roots.size());
    for (std::size_t i = 0; i < sol.roots.size(); ++i) {
        CHECK(again.roots[i].params[0] == sol.roots[i].params[0]);
        CHECK(again.roots[i].params[1] == sol.roots[i].params[1]);
        if (i > 0) {
            CHECK(sol.roots[i - 1].params[0] <= sol.roots[i].params[0]);
        }
    }
}

TEST_CASE("polishing is stable against start perturbations") {
    const EquivalenceProblem prob = jump_vs_exp_ramp_problem();
    for (double dx : {-1e-3, 1e-3}) {
        for (double dy : {-1e-3, 1e-3}) {
            const EquivalenceRoot r =
                polish_root(prob, {2.65788789 + dx, 4.47316512 + dy});
            CHECK(std::abs(r.params[0] - 2.65788789) < 1e-6);
            CHECK(std::abs(r.params[1] - 4.47316512) < 1e-6);
        }
    }
}

TEST_CASE("reversal family is recovered as separate roots") {
    const EquivalenceProblem prob = janszky_tau_problem(1.0, 2.0, 1.0, 0.1, 6.4);
    const EquivalenceSolution sol = solve_equivalence(prob);
    REQUIRE(sol.roots.size() == 4);
    for (std::size_t q = 1; q <= 4; ++q) {
        CHECK(std::abs(sol.roots[q - 1].params[0] - q * kPi / 2.0) < 1e-8);
    }
}

TEST_CASE("identically satisfied conditions are flagged as degenerate") {
    EquivalenceProblem prob;
    prob.names = {"x"};
    prob.box = {{0.0, 1.0}};
    prob.residual = [](const std::vector<double>&) { return std::vector<double>{0.0, 0.0}; };
    const EquivalenceSolution sol = solve_equivalence(prob);
    CHECK(sol.degenerate_family);
    CHECK(sol.best_norm == 0.0);
}

TEST_CASE("absence of roots is a solver failure with diagnostics") {
    // The reversal condition has no solution for tau within (0.3, 1.2).
    const EquivalenceProblem prob = janszky_tau_problem(1.0, 2.0, 1.0, 0.3, 1.2);
    bool thrown = false;
    try {
        solve_equivalence(prob);
    } catch (const NoRootFound& e) {
        thrown = true;
        CHECK(e.best_norm > 1e-6);
    }
    CHECK(thrown);
}

TEST_CASE("problem validation") {
    EquivalenceProblem prob = jump_vs_exp_ramp_problem();
    CHECK_THROWS_AS(polish_root(prob, {1.0}), ConfigError); // wrong dimension
    prob.names = {"only_one"};
    CHECK_THROWS_AS(solve_equivalence(prob), ConfigError); // names/box mismatch
}

} // TEST_SUITE
