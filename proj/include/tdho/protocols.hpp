#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tdho/errors.hpp"

namespace tdho {

// Constant-frequency Ermakov-Pinney solution rho0 = 1/sqrt(m0*omega0).
double rho_constant(double m0, double omega0);

// Frequency-squared obtained by inverting the Ermakov-Pinney equation for a
// prescribed rho(t):  omega^2 = 1/(m0^2 rho^4) - rho_ddot/rho.
double ep_frequency_sq(double rho, double rho_ddot, double m0);

// ---------------------------------------------------------------------------
// Ansatz profiles: rho(t) = sum_{j=1..6} coeff_j a_j(t) with
//   polynomial basis  a_j(t) = (1 + rate*t)^(j-1)
//   exponential basis a_j(t) = exp(j*rate*t)
// solved against (rho0, 0, 0) at t=0 and (delta, epsilon, gamma) at t=tau.

enum class AnsatzBasis { polynomial, exponential };

struct AnsatzSpec {
    AnsatzBasis basis = AnsatzBasis::polynomial;
    double rate = 1.0; // beta (polynomial) or kappa (exponential)
    double rho0 = 1.0;
    double delta = 1.0;
    double epsilon = 0.0;
    double gamma = 0.0;
    double tau = 1.0;
};

class AnsatzProfile {
public:
    AnsatzProfile(AnsatzSpec spec, std::array<double, 6> coeff)
        : spec_(spec), coeff_(coeff) {}

    double value(double t) const;
    double deriv(double t) const;
    double second(double t) const;

    const AnsatzSpec& spec() const { return spec_; }
    const std::array<double, 6>& coefficients() const { return coeff_; }

private:
    AnsatzSpec spec_;
    std::array<double, 6> coeff_;
};

// Solves the 6x6 boundary-condition system. Throws SingularBasis when the
// basis degenerates (e.g. polynomial with rate=0).
AnsatzProfile ansatz_coefficients(const AnsatzSpec& spec);

// ---------------------------------------------------------------------------
// Quasi-optimal three-piece profile: quintic entry cap on (0, sigma*tau],
// middle segment rho0*f(t/tau) with f(s) = sqrt([B^2-(w0 tau)^2] s^2 + 2 B s + 1),
// B = sqrt((w0 tau)^2 + w0/wf) - 1, and a quintic exit cap on ((1-sigma)*tau, tau],
// C^2-matched at both seams and at the (rho0,0,0)/(delta,epsilon,gamma) endpoints.

struct QuasiOptimalSpec {
    double m0 = 1.0;
    double omega0 = 1.0;
    double omegaf = 1.0;
    double tau = 1.0;
    double sigma = 0.3;                 // cap fraction, 0 < sigma < 1/2
    std::optional<double> delta;        // default: 1/sqrt(m0*omegaf)
    double epsilon = 0.0;
    double gamma = 0.0;
};

class QuasiOptimalProfile {
public:
    QuasiOptimalProfile(QuasiOptimalSpec spec, double delta, double big_b,
                        std::array<double, 6> start_cap, std::array<double, 6> end_cap)
        : spec_(spec), delta_(delta), big_b_(big_b), start_cap_(start_cap), end_cap_(end_cap) {}

    double value(double t) const;
    double deriv(double t) const;
    double second(double t) const;

    // Middle-segment scaling factor f and its s-derivatives (s = t/tau).
    double middle(double s, int order = 0) const;

    const QuasiOptimalSpec& spec() const { return spec_; }
    double delta() const { return delta_; }
    double big_b() const { return big_b_; }
    const std::array<double, 6>& start_cap() const { return start_cap_; }
    const std::array<double, 6>& end_cap() const { return end_cap_; }

private:
    double piece(double s, int order) const;

    QuasiOptimalSpec spec_;
    double delta_;
    double big_b_;
    std::array<double, 6> start_cap_; // c_l, entry cap in s = t/tau, units of rho0
    std::array<double, 6> end_cap_;   // d_l, exit cap
};

QuasiOptimalProfile quasi_optimal_rho(const QuasiOptimalSpec& spec);

// ---------------------------------------------------------------------------
// A prescribed rho(t) with analytic derivatives, usable as a protocol segment.

class RhoProfile {
public:
    RhoProfile(AnsatzProfile p, double m0);
    explicit RhoProfile(QuasiOptimalProfile p);

    double value(double t) const;
    double deriv(double t) const;
    double second(double t) const;
    double omega_sq(double t) const; // Eq.-of-motion inversion at stored m0

    double m0() const { return m0_; }
    double tau() const { return tau_; }
    const std::string& kind() const { return kind_; }

    const AnsatzProfile* ansatz() const { return std::get_if<AnsatzProfile>(&impl_); }
    const QuasiOptimalProfile* quasi_optimal() const {
        return std::get_if<QuasiOptimalProfile>(&impl_);
    }

private:
    std::variant<AnsatzProfile, QuasiOptimalProfile> impl_;
    double m0_;
    double tau_;
    std::string kind_;
};

// Pointwise frequency samples over (0, tau] for a prescribed rho profile.
struct FrequencySample {
    double t = 0.0;
    double omega_sq = 0.0;
    double omega = 0.0; // NaN where omega_sq < 0
};
std::vector<FrequencySample> omega_from_rho(const RhoProfile& rho, std::size_t points);

// ---------------------------------------------------------------------------
// Piecewise protocol: omega(t) = omega0 for t <= 0, segment frequencies on
// (0, tau] with half-open pieces (t_start, t_end], and omegaf for t > tau.

struct ConstantSegment {
    double omega1;
};

// omega(t) = omega_ref * exp(t/tau_ref) with t the global time.
struct ExpRampSegment {
    double omega_ref;
    double tau_ref;
};

struct FromRhoSegment {
    RhoProfile profile;
};

using SegmentKind = std::variant<ConstantSegment, ExpRampSegment, FromRhoSegment>;

struct Segment {
    double t_start;
    double t_end;
    SegmentKind kind;
    std::string label;
};

class FrequencyProtocol {
public:
    FrequencyProtocol(double m0, double omega0, double omegaf, double tau,
                      std::vector<Segment> segments);

    double m0() const { return m0_; }
    double omega0() const { return omega0_; }
    double omegaf() const { return omegaf_; }
    double tau() const { return tau_; }
    const std::vector<Segment>& segments() const { return segments_; }

    double omega_squared(double t) const;           // total over all t
    double omega(double t) const;                   // throws ExpulsiveRegime if negative
    const Segment* segment_at(double t) const;      // nullptr outside (0, tau]
    std::string tag_at(double t) const;             // "pre", segment label, or "final"

private:
    double m0_, omega0_, omegaf_, tau_;
    std::vector<Segment> segments_;
};

double eval_omega(const FrequencyProtocol& p, double t);
double eval_omega_squared(const FrequencyProtocol& p, double t);

// Builders for the protocols used throughout.
FrequencyProtocol make_sudden_jump(double m0, double omega0, double omega1, double tau,
                                   double omegaf);
FrequencyProtocol make_exp_ramp(double m0, double omega0, double tau, double omegaf);
FrequencyProtocol make_from_rho(RhoProfile profile, double omegaf,
                                std::optional<double> omega0 = std::nullopt);
FrequencyProtocol make_piecewise(double m0, double omega0, double omegaf, double tau,
                                 std::vector<Segment> segments);

// Grid scan of omega^2 over (0, tau]; collects intervals where omega^2 < 0.
struct ExpulsiveReport {
    double min_omega_sq = 0.0;
    double argmin_t = 0.0;
    std::vector<std::pair<double, double>> negative_intervals;
    bool clean() const { return negative_intervals.empty(); }
};
ExpulsiveReport scan_expulsive(const FrequencyProtocol& p, std::size_t points);

} // namespace tdho
