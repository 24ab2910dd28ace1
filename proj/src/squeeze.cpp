#include "tdho/squeeze.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "tdho/format.hpp"

namespace tdho {

namespace {

constexpr double kPhaseClamp = 1e-12; // |cos phi| may leak past 1 by round-off
constexpr double kRZero = 1e-12;      // below this the angle carries no information
constexpr double kLambdaClamp = 1e-9; // lambda this far below 1 is still round-off

void check_state(double rho, double m0, double omega) {
    if (!(m0 > 0.0)) throw ConfigError("squeeze: m0 must be positive");
    if (!(omega > 0.0)) throw ConfigError("squeeze: omega must be positive");
    if (!(rho > 0.0)) throw NonPhysical("squeeze: rho must be positive");
}

double clamped_acos(double c) {
    if (c > 1.0) {
        if (c > 1.0 + kPhaseClamp) throw NonPhysical("squeeze: |cos phi| exceeds 1");
        c = 1.0;
    } else if (c < -1.0) {
        if (c < -1.0 - kPhaseClamp) throw NonPhysical("squeeze: |cos phi| exceeds 1");
        c = -1.0;
    }
    return std::acos(c);
}

} // namespace

double squeeze_lambda_minus_one(double rho, double rho_dot, double m0, double omega) {
    check_state(rho, m0, omega);
    const double d = 1.0 / rho - m0 * omega * rho;
    return (m0 * m0 * rho_dot * rho_dot + d * d) / (4.0 * m0 * omega);
}

double squeeze_lambda(double rho, double rho_dot, double m0, double omega) {
    return 1.0 + squeeze_lambda_minus_one(rho, rho_dot, m0, omega);
}

double squeeze_param(double rho, double rho_dot, double m0, double omega) {
    return std::asinh(std::sqrt(squeeze_lambda_minus_one(rho, rho_dot, m0, omega)));
}

double squeeze_param_from_lambda(double lambda) {
    if (lambda >= 1.0) return std::asinh(std::sqrt(lambda - 1.0));
    if (lambda >= 1.0 - kLambdaClamp) return 0.0;
    std::ostringstream os;
    os << "squeeze: lambda = " << lambda << " lies below 1";
    throw NonPhysical(os.str());
}

double squeeze_phase(double rho, double rho_dot, double m0, double omega) {
    const double lm1 = squeeze_lambda_minus_one(rho, rho_dot, m0, omega);
    const double r = std::asinh(std::sqrt(lm1));
    if (r <= kRZero) throw PhaseUndefined("squeeze: angle undefined for r ~ 0");
    // cos phi = [m0^2 w^2 rho^2 - m0^2 rho_dot^2 - 1/rho^2] / (4 m0 w sqrt(lambda(lambda-1)))
    const double d = 1.0 / rho - m0 * omega * rho;
    const double num = -d * (m0 * omega * rho + 1.0 / rho) - m0 * m0 * rho_dot * rho_dot;
    const double den = 4.0 * m0 * omega * std::sqrt((1.0 + lm1) * lm1);
    return clamped_acos(num / den);
}

double position_variance(double r, double phi, unsigned n, double m0, double omega,
                         double hbar) {
    check_state(1.0, m0, omega);
    const double ch = std::cosh(r), sh = std::sinh(r);
    const double shape = ch * ch + 2.0 * sh * ch * std::cos(phi) + sh * sh;
    return shape * (n + 0.5) * hbar / (m0 * omega);
}

double momentum_variance(double r, double phi, unsigned n, double m0, double omega,
                         double hbar) {
    check_state(1.0, m0, omega);
    const double ch = std::cosh(r), sh = std::sinh(r);
    const double shape = ch * ch - 2.0 * sh * ch * std::cos(phi) + sh * sh;
    return shape * (n + 0.5) * hbar * m0 * omega;
}

double uncertainty_product(double r, double phi, unsigned n, double hbar) {
    const double s2 = std::sinh(2.0 * r) * std::sin(phi);
    const double half = n + 0.5;
    return half * half * hbar * hbar * (1.0 + s2 * s2);
}

double mean_energy(double r, unsigned n, double omega, double hbar) {
    return std::cosh(2.0 * r) * (n + 0.5) * hbar * omega;
}

double energy_variance(double r, unsigned n, double omega, double hbar) {
    const double c2 = std::cosh(2.0 * r);
    const double nn = static_cast<double>(n);
    return 0.5 * hbar * hbar * omega * omega * (nn * nn + nn + 1.0) * (c2 * c2 - 1.0);
}

double mean_excitations(double r, unsigned n) {
    const double sh = std::sinh(r);
    return n + (2.0 * n + 1.0) * sh * sh;
}

double adiabaticity(double r) { return std::cosh(2.0 * r); }

// ---------------------------------------------------------------------------
// Transition probabilities

namespace {

// Generalized binomial coefficient binom(x, m) = x(x-1)...(x-m+1)/m! for real
// x; the factors can vanish or change sign, both of which are meaningful here.
double falling_binomial(double x, unsigned m) {
    double prod = 1.0;
    for (unsigned i = 0; i < m; ++i) prod *= (x - i) / (i + 1.0);
    return prod;
}

// Same quantity split into sign and log magnitude; zero flagged separately.
void falling_binomial_log(double x, unsigned m, bool& zero, double& sign, double& logmag) {
    zero = false;
    sign = 1.0;
    logmag = 0.0;
    for (unsigned i = 0; i < m; ++i) {
        const double f = x - i;
        if (f == 0.0) {
            zero = true;
            return;
        }
        if (f < 0.0) sign = -sign;
        logmag += std::log(std::abs(f)) - std::log(i + 1.0);
    }
}

double binom_exact(unsigned n, unsigned k) {
    double prod = 1.0;
    for (unsigned i = 1; i <= k; ++i) prod *= static_cast<double>(n - k + i) / i;
    return prod;
}

double transition_prob_direct(unsigned mu, unsigned nu, double n0) {
    const unsigned big_m = (mu + nu) / 2;
    const unsigned big_d = (mu > nu ? mu - nu : nu - mu) / 2;
    const double np1 = n0 + 1.0;

    double bracket = 0.0;
    for (unsigned k = big_d; k <= big_m; ++k) {
        const double x = 0.5 * (static_cast<double>(big_m) + k - 1.0);
        double term = binom_exact(big_m, k) * falling_binomial(x, big_m);
        for (unsigned i = k - big_d + 1; i <= k; ++i) term *= i; // k!/(k-D)!
        term /= std::pow(np1, 0.5 * k);
        bracket += term;
    }

    const unsigned lo = std::min(mu, nu);
    double fact_lo = 1.0, fact_mu = 1.0, fact_nu = 1.0;
    for (unsigned i = 2; i <= lo; ++i) fact_lo *= i;
    for (unsigned i = 2; i <= mu; ++i) fact_mu *= i;
    for (unsigned i = 2; i <= nu; ++i) fact_nu *= i;

    const double pref = std::pow(2.0, static_cast<double>(mu + nu)) * fact_lo * fact_lo *
                        std::pow(n0, static_cast<double>(big_d)) /
                        (fact_mu * fact_nu * std::sqrt(np1));
    return bracket * bracket * pref;
}

double transition_prob_log(unsigned mu, unsigned nu, double n0) {
    const unsigned big_m = (mu + nu) / 2;
    const unsigned big_d = (mu > nu ? mu - nu : nu - mu) / 2;
    const double log_np1 = std::log1p(n0);

    // Sign-tracked accumulation: collect each term's sign and log magnitude,
    // then sum relative to the largest magnitude.
    std::vector<double> logs, signs;
    logs.reserve(big_m - big_d + 1);
    signs.reserve(big_m - big_d + 1);
    for (unsigned k = big_d; k <= big_m; ++k) {
        const double x = 0.5 * (static_cast<double>(big_m) + k - 1.0);
        bool zero;
        double sgn, lg;
        falling_binomial_log(x, big_m, zero, sgn, lg);
        if (zero) continue;
        lg += std::lgamma(big_m + 1.0) - std::lgamma(k + 1.0) - std::lgamma(big_m - k + 1.0);
        lg += std::lgamma(k + 1.0) - std::lgamma(k - big_d + 1.0);
        lg -= 0.5 * k * log_np1;
        logs.push_back(lg);
        signs.push_back(sgn);
    }
    if (logs.empty()) return 0.0;
    const double peak = *std::max_element(logs.begin(), logs.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < logs.size(); ++i) acc += signs[i] * std::exp(logs[i] - peak);
    if (acc == 0.0) return 0.0;
    const double log_bracket_sq = 2.0 * (peak + std::log(std::abs(acc)));

    const unsigned lo = std::min(mu, nu);
    double logp = log_bracket_sq;
    logp += (mu + nu) * std::log(2.0);
    logp += 2.0 * std::lgamma(lo + 1.0);
    logp += big_d * std::log(n0);
    logp -= std::lgamma(mu + 1.0) + std::lgamma(nu + 1.0);
    logp -= 0.5 * log_np1;
    return std::exp(logp);
}

} // namespace

double transition_prob(unsigned mu, unsigned nu, double n0) {
    if (n0 < 0.0) throw NonPhysical("transition_prob: n0 must be nonnegative");
    if ((mu + nu) % 2 != 0) return 0.0;
    if (n0 == 0.0) return mu == nu ? 1.0 : 0.0;
    if (mu + nu <= 30) return transition_prob_direct(mu, nu, n0);
    return transition_prob_log(mu, nu, n0);
}

double excitation_prob(double n0) {
    if (n0 < 0.0) throw NonPhysical("excitation_prob: n0 must be nonnegative");
    return 1.0 - 1.0 / std::sqrt(n0 + 1.0);
}

// ---------------------------------------------------------------------------
// Final-stretch squeezing

double FinalSqueeze::phase(double t) const {
    return squeeze_phase(seg.rho(t), seg.rho_dot(t), seg.m0, seg.omegaf);
}

FinalSqueeze final_squeeze(const FinalSegmentCoefficients& seg) {
    FinalSqueeze out;
    out.seg = seg;
    const double lm1 = squeeze_lambda_minus_one(seg.delta, seg.epsilon, seg.m0, seg.omegaf);
    out.lambda = 1.0 + lm1;
    out.r = std::asinh(std::sqrt(lm1));
    out.n0 = lm1;
    out.qstar = 2.0 * out.lambda - 1.0;
    return out;
}

SqueezeRecord make_record(double t, double rho, double rho_dot, double m0, double omega,
                          unsigned n, double hbar) {
    SqueezeRecord rec;
    rec.t = t;
    rec.r = squeeze_param(rho, rho_dot, m0, omega);
    try {
        rec.phi = squeeze_phase(rho, rho_dot, m0, omega);
    } catch (PhaseUndefined&) {
        rec.phi = 0.0;
    }
    rec.sigma_x2 = position_variance(rec.r, rec.phi, n, m0, omega, hbar);
    rec.sigma_p2 = momentum_variance(rec.r, rec.phi, n, m0, omega, hbar);
    rec.energy = mean_energy(rec.r, n, omega, hbar);
    rec.energy_var = energy_variance(rec.r, n, omega, hbar);
    rec.excitations = mean_excitations(rec.r, n);
    rec.qstar = adiabaticity(rec.r);
    return rec;
}

void write_observables_csv(std::ostream& os, const std::vector<SqueezeRecord>& rows) {
    os << "t,r,phi,sigma_x2,sigma_p2,E,sigma_H2,N,Qstar\n";
    for (const SqueezeRecord& rec : rows) {
        os << detail::g12(rec.t) << ',' << detail::g12(rec.r) << ',' << detail::g12(rec.phi)
           << ',' << detail::g12(rec.sigma_x2) << ',' << detail::g12(rec.sigma_p2) << ','
           << detail::g12(rec.energy) << ',' << detail::g12(rec.energy_var) << ','
           << detail::g12(rec.excitations) << ',' << detail::g12(rec.qstar) << '\n';
    }
}

} // namespace tdho
