#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "tdho/ermakov.hpp"
#include "tdho/errors.hpp"
#include "tdho/squeeze.hpp"

using namespace tdho;

namespace {

constexpr double kPi = 3.14159265358979323846;

// P(0 -> 2j) = C(2j, j) [n0/(4(n0+1))]^j / sqrt(n0+1), evaluated in long double.
long double ground_prob_ref(unsigned j, long double n0) {
    long double binom = 1.0L;
    for (unsigned i = 1; i <= j; ++i)
        binom = binom * static_cast<long double>(j + i) / static_cast<long double>(i);
    return binom * std::pow(n0 / (4.0L * (n0 + 1.0L)), static_cast<long double>(j)) /
           std::sqrt(n0 + 1.0L);
}

} // namespace

TEST_SUITE("squeeze") {

TEST_CASE("equilibrium data is unsqueezed and has no angle") {
    const double m0 = 1.7, w = 2.9;
    const double rho0 = 1.0 / std::sqrt(m0 * w);
    CHECK(squeeze_lambda(rho0, 0.0, m0, w) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(squeeze_param(rho0, 0.0, m0, w) < 1e-13);
    CHECK_THROWS_AS(squeeze_phase(rho0, 0.0, m0, w), PhaseUndefined);
}

TEST_CASE("lambda clamp tolerates round-off but rejects real violations") {
    CHECK(squeeze_param_from_lambda(1.0 - 1e-10) == 0.0);
    CHECK(squeeze_param_from_lambda(1.0) == 0.0);
    CHECK_THROWS_AS(squeeze_param_from_lambda(0.5), NonPhysical);
}

TEST_CASE("quadrupled frequency right after a jump: closed-form scalars") {
    // rho continues from equilibrium of omega0 = 1 while omega is already 4.
    const double r = squeeze_param(1.0, 0.0, 1.0, 4.0);
    CHECK(std::abs(r - std::log(2.0)) < 1e-12);
    const double phi = squeeze_phase(1.0, 0.0, 1.0, 4.0);
    CHECK(std::abs(phi) < 1e-12);
    CHECK(std::abs(mean_excitations(r, 0) - 0.5625) < 1e-12);
    CHECK(std::abs(adiabaticity(r) - 17.0 / 8.0) < 1e-12);
    CHECK(std::abs(mean_energy(r, 0, 4.0) - 4.25) < 1e-12);
    CHECK(std::abs(excitation_prob(0.5625) - 0.2) < 1e-12);
}

TEST_CASE("variances stay continuous across the jump") {
    // Right before: vacuum of omega0. Right after: same wavefunction, new omega.
    const double m0 = 1.0, w0 = 1.0, w1 = 4.0, hbar = 1.0;
    for (unsigned n : {0u, 2u}) {
        const SqueezeRecord rec = make_record(0.0, 1.0, 0.0, m0, w1, n, hbar);
        const double before_x = (n + 0.5) * hbar / (m0 * w0);
        const double before_p = (n + 0.5) * hbar * m0 * w0;
        CHECK(rec.sigma_x2 == doctest::Approx(before_x).epsilon(1e-12));
        CHECK(rec.sigma_p2 == doctest::Approx(before_p).epsilon(1e-12));
    }
}

TEST_CASE("uncertainty product identity") {
    for (double r : {0.0, 0.4, 1.2}) {
        for (double phi : {0.0, 0.7, 1.9, 3.0}) {
            for (unsigned n : {0u, 1u, 4u}) {
                const double direct = position_variance(r, phi, n, 1.3, 2.1, 0.9) *
                                      momentum_variance(r, phi, n, 1.3, 2.1, 0.9);
                const double s2 = std::sinh(2.0 * r) * std::sin(phi);
                const double expect =
                    std::pow((n + 0.5) * 0.9, 2) * (1.0 + s2 * s2);
                CHECK(direct == doctest::Approx(expect).epsilon(1e-12));
                CHECK(uncertainty_product(r, phi, n, 0.9) ==
                      doctest::Approx(expect).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("energy statistics") {
    // Unsqueezed: eigenstate of the instantaneous Hamiltonian.
    CHECK(mean_energy(0.0, 3, 2.0) == doctest::Approx(7.0).epsilon(1e-14));
    CHECK(energy_variance(0.0, 3, 2.0) == 0.0);
    // Squeezed: cosh(2r) enhancement and (n^2+n+1) scaling of the spread.
    const double r = 0.8, w = 2.0, hbar = 1.0;
    for (unsigned n : {0u, 2u}) {
        CHECK(mean_energy(r, n, w, hbar) ==
              doctest::Approx(std::cosh(2 * r) * (n + 0.5) * hbar * w).epsilon(1e-13));
        const double c2 = std::cosh(2.0 * r);
        const double expect =
            0.5 * hbar * hbar * w * w * (n * n + n + 1.0) * (c2 * c2 - 1.0);
        CHECK(energy_variance(r, n, w, hbar) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("transition probabilities match the ground-state closed form") {
    for (double n0 : {0.5625, 2.0, 5.0}) {
        for (unsigned j = 0; j <= 40; ++j) { // spans the direct and log-space paths
            const double got = transition_prob(0, 2 * j, n0);
            const long double want = ground_prob_ref(j, static_cast<long double>(n0));
            CHECK(std::abs(got - static_cast<double>(want)) <=
                  1e-9 * static_cast<double>(want) + 1e-300);
        }
    }
}

TEST_CASE("transition probability structure") {
    // Odd total excitation change is forbidden, exactly.
    CHECK(transition_prob(0, 1, 2.0) == 0.0);
    CHECK(transition_prob(1, 2, 0.5625) == 0.0);
    CHECK(transition_prob(2, 5, 5.0) == 0.0);
    // No modulation leaves the populations untouched.
    CHECK(transition_prob(3, 3, 0.0) == 1.0);
    CHECK(transition_prob(3, 1, 0.0) == 0.0);
    // Detailed balance of the symmetric kernel.
    for (auto [mu, nu] : std::vector<std::pair<unsigned, unsigned>>{{0, 6}, {1, 3}, {2, 4}}) {
        CHECK(transition_prob(mu, nu, 2.0) ==
              doctest::Approx(transition_prob(nu, mu, 2.0)).epsilon(1e-12));
    }
    // Nonnegative over a block of the kernel.
    for (unsigned mu = 0; mu <= 12; ++mu)
        for (unsigned nu = 0; nu <= 12; ++nu) CHECK(transition_prob(mu, nu, 3.0) >= 0.0);
    CHECK_THROWS_AS(transition_prob(0, 0, -0.5), NonPhysical);
}

TEST_CASE("transition probabilities are normalized") {
    for (unsigned mu : {0u, 1u}) {
        for (double n0 : {0.5625, 2.0}) {
            double sum = 0.0;
            for (unsigned nu = mu % 2; nu <= 400; nu += 2) sum += transition_prob(mu, nu, n0);
            CHECK(std::abs(sum - 1.0) < 1e-8);
        }
    }
}

TEST_CASE("frozen final state: constant r, rotating angle") {
    const double m0 = 1.0, wf = 2.0, tau = 0.6;
    const FinalSegmentCoefficients seg = final_segment(0.9, -0.7, m0, wf, tau);
    const FinalSqueeze fin = final_squeeze(seg);
    CHECK(fin.r == doctest::Approx(squeeze_param(0.9, -0.7, m0, wf)).epsilon(1e-12));
    CHECK(fin.qstar == doctest::Approx(std::cosh(2.0 * fin.r)).epsilon(1e-12));
    CHECK(fin.n0 == doctest::Approx(std::sinh(fin.r) * std::sinh(fin.r)).epsilon(1e-12));
    CHECK(fin.phase(tau) == doctest::Approx(squeeze_phase(0.9, -0.7, m0, wf)).epsilon(1e-10));
    const double period = kPi / wf;
    for (double t : {0.9, 1.4, 2.2})
        CHECK(fin.phase(t + period) == doctest::Approx(fin.phase(t)).epsilon(1e-9));
    // r recomputed anywhere on the tail agrees with the frozen value.
    for (double t : {0.8, 1.3, 2.9})
        CHECK(squeeze_param(seg.rho(t), seg.rho_dot(t), m0, wf) ==
              doctest::Approx(fin.r).epsilon(1e-11));
}

TEST_CASE("records assemble the individual observables") {
    const double m0 = 1.0, w = 3.0, rho = 0.8, rho_dot = 0.5, hbar = 1.0;
    const SqueezeRecord rec = make_record(1.2, rho, rho_dot, m0, w, 1, hbar);
    const double r = squeeze_param(rho, rho_dot, m0, w);
    const double phi = squeeze_phase(rho, rho_dot, m0, w);
    CHECK(rec.t == 1.2);
    CHECK(rec.r == doctest::Approx(r).epsilon(1e-14));
    CHECK(rec.phi == doctest::Approx(phi).epsilon(1e-14));
    CHECK(rec.sigma_x2 == doctest::Approx(position_variance(r, phi, 1, m0, w)).epsilon(1e-13));
    CHECK(rec.sigma_p2 == doctest::Approx(momentum_variance(r, phi, 1, m0, w)).epsilon(1e-13));
    CHECK(rec.energy == doctest::Approx(mean_energy(r, 1, w)).epsilon(1e-13));
    CHECK(rec.energy_var == doctest::Approx(energy_variance(r, 1, w)).epsilon(1e-13));
    CHECK(rec.excitations == doctest::Approx(mean_excitations(r, 1)).epsilon(1e-13));
    CHECK(rec.qstar == doctest::Approx(adiabaticity(r)).epsilon(1e-13));

    std::ostringstream os;
    write_observables_csv(os, {rec});
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    CHECK(header == "t,r,phi,sigma_x2,sigma_p2,E,sigma_H2,N,Qstar");
}

TEST_CASE("phase stays inside its principal branch") {
    // Sample states around the final-frequency circle.
    const double m0 = 1.0, wf = 2.0;
    const FinalSegmentCoefficients seg = final_segment(1.1, 0.9, m0, wf, 0.0);
    for (int i = 0; i <= 50; ++i) {
        const double t = 0.02 + i * (kPi / wf) / 50.0;
        const double phi = seg.rho(t) > 0 ? squeeze_phase(seg.rho(t), seg.rho_dot(t), m0, wf)
                                          : 0.0;
        CHECK(phi >= 0.0);
        CHECK(phi <= kPi);
    }
}

} // TEST_SUITE
