#include "tdho/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tdho/linsolve.hpp"

namespace tdho {

namespace {

double boundary_slack(double tau) { return 1e-12 * std::max(1.0, std::abs(tau)); }

// Basis value and first two derivatives for one ansatz member.
void ansatz_basis(const AnsatzSpec& s, int j, double t, double& a, double& da, double& dda) {
    if (s.basis == AnsatzBasis::polynomial) {
        // a_j = (1 + rate t)^(j-1)
        const double x = 1.0 + s.rate * t;
        const int p = j - 1;
        const double xp = std::pow(x, p);
        a = xp;
        da = (p >= 1) ? p * s.rate * std::pow(x, p - 1) : 0.0;
        dda = (p >= 2) ? p * (p - 1) * s.rate * s.rate * std::pow(x, p - 2) : 0.0;
    } else {
        // a_j = exp(j rate t)
        const double w = j * s.rate;
        const double e = std::exp(w * t);
        a = e;
        da = w * e;
        dda = w * w * e;
    }
}

} // namespace

double rho_constant(double m0, double omega0) {
    if (!(m0 > 0.0) || !(omega0 > 0.0))
        throw ConfigError("rho_constant requires m0 > 0 and omega0 > 0");
    return 1.0 / std::sqrt(m0 * omega0);
}

double ep_frequency_sq(double rho, double rho_ddot, double m0) {
    if (!(rho > 0.0)) throw NonPhysical("ep_frequency_sq requires rho > 0");
    const double r2 = rho * rho;
    return 1.0 / (m0 * m0 * r2 * r2) - rho_ddot / rho;
}

// ---------------------------------------------------------------------------
// Ansatz profile

double AnsatzProfile::value(double t) const {
    double sum = 0.0;
    for (int j = 1; j <= 6; ++j) {
        double a, da, dda;
        ansatz_basis(spec_, j, t, a, da, dda);
        sum += coeff_[j - 1] * a;
    }
    return sum;
}

double AnsatzProfile::deriv(double t) const {
    double sum = 0.0;
    for (int j = 1; j <= 6; ++j) {
        double a, da, dda;
        ansatz_basis(spec_, j, t, a, da, dda);
        sum += coeff_[j - 1] * da;
    }
    return sum;
}

double AnsatzProfile::second(double t) const {
    double sum = 0.0;
    for (int j = 1; j <= 6; ++j) {
        double a, da, dda;
        ansatz_basis(spec_, j, t, a, da, dda);
        sum += coeff_[j - 1] * dda;
    }
    return sum;
}

AnsatzProfile ansatz_coefficients(const AnsatzSpec& spec) {
    if (!(spec.tau > 0.0)) throw ConfigError("ansatz: tau must be positive");
    if (!(spec.rho0 > 0.0)) throw ConfigError("ansatz: rho0 must be positive");
    if (!(spec.delta > 0.0)) throw ConfigError("ansatz: delta must be positive");
    if (spec.rate == 0.0) throw SingularBasis("ansatz: rate must be nonzero");

    std::array<std::array<double, 6>, 6> mat{};
    std::array<double, 6> rhs{};
    const double ts[2] = {0.0, spec.tau};
    for (int side = 0; side < 2; ++side) {
        for (int j = 1; j <= 6; ++j) {
            double a, da, dda;
            ansatz_basis(spec, j, ts[side], a, da, dda);
            mat[3 * side + 0][j - 1] = a;
            mat[3 * side + 1][j - 1] = da;
            mat[3 * side + 2][j - 1] = dda;
        }
    }
    rhs[0] = spec.rho0;
    rhs[1] = 0.0;
    rhs[2] = 0.0;
    rhs[3] = spec.delta;
    rhs[4] = spec.epsilon;
    rhs[5] = spec.gamma;

    if (!detail::solve_dense<6>(mat, rhs))
        throw SingularBasis("ansatz: boundary-condition system is singular for this basis");
    return AnsatzProfile(spec, rhs);
}

// ---------------------------------------------------------------------------
// Quasi-optimal profile

double QuasiOptimalProfile::middle(double s, int order) const {
    const double a = spec_.omega0 * spec_.tau;
    const double g = (big_b_ * big_b_ - a * a) * s * s + 2.0 * big_b_ * s + 1.0;
    const double f = std::sqrt(g);
    if (order == 0) return f;
    const double dg = 2.0 * (big_b_ * big_b_ - a * a) * s + 2.0 * big_b_;
    if (order == 1) return dg / (2.0 * f);
    // f'' reduces to -(omega0 tau)^2 / f^3 for this parabola.
    return -(a * a) / (f * f * f);
}

double QuasiOptimalProfile::piece(double s, int order) const {
    const double sig = spec_.sigma;
    const std::array<double, 6>* cap = nullptr;
    if (s <= sig)
        cap = &start_cap_;
    else if (s > 1.0 - sig)
        cap = &end_cap_;
    else
        return middle(s, order);

    double sum = 0.0;
    for (int l = 5; l >= order; --l) {
        double c = (*cap)[l];
        for (int k = 0; k < order; ++k) c *= (l - k);
        sum = sum * s + c;
    }
    return sum;
}

double QuasiOptimalProfile::value(double t) const {
    const double rho0 = 1.0 / std::sqrt(spec_.m0 * spec_.omega0);
    return rho0 * piece(t / spec_.tau, 0);
}

double QuasiOptimalProfile::deriv(double t) const {
    const double rho0 = 1.0 / std::sqrt(spec_.m0 * spec_.omega0);
    return rho0 * piece(t / spec_.tau, 1) / spec_.tau;
}

double QuasiOptimalProfile::second(double t) const {
    const double rho0 = 1.0 / std::sqrt(spec_.m0 * spec_.omega0);
    return rho0 * piece(t / spec_.tau, 2) / (spec_.tau * spec_.tau);
}

QuasiOptimalProfile quasi_optimal_rho(const QuasiOptimalSpec& spec) {
    if (!(spec.m0 > 0.0)) throw ConfigError("quasi_optimal: m0 must be positive");
    if (!(spec.omega0 > 0.0) || !(spec.omegaf > 0.0))
        throw ConfigError("quasi_optimal: omega0 and omegaf must be positive");
    if (!(spec.tau > 0.0)) throw ConfigError("quasi_optimal: tau must be positive");
    if (!(spec.sigma > 0.0) || !(spec.sigma < 0.5))
        throw ConfigError("quasi_optimal: sigma must lie in (0, 1/2)");

    const double rho0 = rho_constant(spec.m0, spec.omega0);
    const double delta = spec.delta.value_or(1.0 / std::sqrt(spec.m0 * spec.omegaf));
    if (!(delta > 0.0)) throw ConfigError("quasi_optimal: delta must be positive");

    const double a = spec.omega0 * spec.tau;
    const double big_b = std::sqrt(a * a + spec.omega0 / spec.omegaf) - 1.0;

    // The middle scaling factor must stay real on [0, 1].
    for (int i = 0; i <= 512; ++i) {
        const double s = i / 512.0;
        const double g = (big_b * big_b - a * a) * s * s + 2.0 * big_b * s + 1.0;
        if (!(g > 0.0))
            throw ConfigError("quasi_optimal: scaling factor becomes non-real inside the ramp");
    }

    QuasiOptimalProfile seed(spec, delta, big_b, {}, {});

    // Quintic caps in s = t/tau, in units of rho0, matched C^2 to the middle
    // segment at s = sigma and s = 1 - sigma.
    auto cap_solve = [&](double s_lo, std::array<double, 3> lo, double s_hi,
                         std::array<double, 3> hi) {
        std::array<std::array<double, 6>, 6> mat{};
        std::array<double, 6> rhs{};
        const double ss[2] = {s_lo, s_hi};
        for (int side = 0; side < 2; ++side) {
            for (int l = 0; l < 6; ++l) {
                const double s = ss[side];
                mat[3 * side + 0][l] = std::pow(s, l);
                mat[3 * side + 1][l] = (l >= 1) ? l * std::pow(s, l - 1) : 0.0;
                mat[3 * side + 2][l] = (l >= 2) ? l * (l - 1) * std::pow(s, l - 2) : 0.0;
            }
            for (int d = 0; d < 3; ++d) rhs[3 * side + d] = (side == 0 ? lo : hi)[d];
        }
        if (!detail::solve_dense<6>(mat, rhs))
            throw SingularBasis("quasi_optimal: cap boundary system is singular");
        return rhs;
    };

    const double sig = spec.sigma;
    const std::array<double, 3> at_zero = {1.0, 0.0, 0.0};
    const std::array<double, 3> at_sig = {seed.middle(sig, 0), seed.middle(sig, 1),
                                          seed.middle(sig, 2)};
    const std::array<double, 3> at_one_minus = {seed.middle(1.0 - sig, 0),
                                                seed.middle(1.0 - sig, 1),
                                                seed.middle(1.0 - sig, 2)};
    const double tau = spec.tau;
    const std::array<double, 3> at_one = {delta / rho0, spec.epsilon * tau / rho0,
                                          spec.gamma * tau * tau / rho0};

    const auto start_cap = cap_solve(0.0, at_zero, sig, at_sig);
    const auto end_cap = cap_solve(1.0 - sig, at_one_minus, 1.0, at_one);
    return QuasiOptimalProfile(spec, delta, big_b, start_cap, end_cap);
}

// ---------------------------------------------------------------------------
// RhoProfile

RhoProfile::RhoProfile(AnsatzProfile p, double m0)
    : impl_(std::move(p)), m0_(m0), tau_(std::get<AnsatzProfile>(impl_).spec().tau) {
    if (!(m0_ > 0.0)) throw ConfigError("rho profile: m0 must be positive");
    kind_ = std::get<AnsatzProfile>(impl_).spec().basis == AnsatzBasis::polynomial
                ? "ansatz:poly"
                : "ansatz:exp";
}

RhoProfile::RhoProfile(QuasiOptimalProfile p)
    : impl_(std::move(p)),
      m0_(std::get<QuasiOptimalProfile>(impl_).spec().m0),
      tau_(std::get<QuasiOptimalProfile>(impl_).spec().tau),
      kind_("quasi_optimal") {}

double RhoProfile::value(double t) const {
    return std::visit([&](const auto& p) { return p.value(t); }, impl_);
}
double RhoProfile::deriv(double t) const {
    return std::visit([&](const auto& p) { return p.deriv(t); }, impl_);
}
double RhoProfile::second(double t) const {
    return std::visit([&](const auto& p) { return p.second(t); }, impl_);
}
double RhoProfile::omega_sq(double t) const {
    return ep_frequency_sq(value(t), second(t), m0_);
}

std::vector<FrequencySample> omega_from_rho(const RhoProfile& rho, std::size_t points) {
    if (points < 2) throw ConfigError("omega_from_rho: need at least 2 points");
    std::vector<FrequencySample> out;
    out.reserve(points);
    for (std::size_t i = 1; i <= points; ++i) {
        FrequencySample s;
        s.t = rho.tau() * static_cast<double>(i) / static_cast<double>(points);
        s.omega_sq = rho.omega_sq(s.t);
        s.omega = s.omega_sq >= 0.0 ? std::sqrt(s.omega_sq)
                                    : std::numeric_limits<double>::quiet_NaN();
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// FrequencyProtocol

FrequencyProtocol::FrequencyProtocol(double m0, double omega0, double omegaf, double tau,
                                     std::vector<Segment> segments)
    : m0_(m0), omega0_(omega0), omegaf_(omegaf), tau_(tau), segments_(std::move(segments)) {
    if (!(m0_ > 0.0)) throw ConfigError("protocol: m0 must be positive");
    if (!(omega0_ > 0.0)) throw ConfigError("protocol: omega0 must be positive");
    if (!(omegaf_ > 0.0)) throw ConfigError("protocol: omegaf must be positive");
    if (!(tau_ > 0.0)) throw ConfigError("protocol: tau must be positive");
    if (segments_.empty()) throw ConfigError("protocol: needs at least one segment");

    std::sort(segments_.begin(), segments_.end(),
              [](const Segment& a, const Segment& b) { return a.t_start < b.t_start; });
    const double slack = boundary_slack(tau_);
    if (std::abs(segments_.front().t_start) > slack)
        throw ConfigError("protocol: segments must start at t = 0");
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const Segment& s = segments_[i];
        if (!(s.t_end > s.t_start)) throw ConfigError("protocol: empty segment span");
        if (i + 1 < segments_.size() &&
            std::abs(segments_[i + 1].t_start - s.t_end) > slack)
            throw ConfigError("protocol: segments must tile (0, tau] without gaps");
        if (const auto* fr = std::get_if<FromRhoSegment>(&s.kind)) {
            if (std::abs(fr->profile.m0() - m0_) > 1e-12 * std::max(1.0, m0_))
                throw ConfigError("protocol: rho-profile segment was built for a different m0");
            if (std::abs(s.t_start) > slack || std::abs(s.t_end - tau_) > slack ||
                std::abs(fr->profile.tau() - tau_) > slack)
                throw ConfigError("protocol: rho-profile segment must span all of (0, tau]");
        }
    }
    if (std::abs(segments_.back().t_end - tau_) > slack)
        throw ConfigError("protocol: segments must end at t = tau");
}

const Segment* FrequencyProtocol::segment_at(double t) const {
    if (t <= 0.0) return nullptr;
    const double slack = boundary_slack(tau_);
    if (t > tau_ + slack) return nullptr;
    for (const Segment& s : segments_)
        if (t <= s.t_end + slack) return &s;
    return nullptr;
}

double FrequencyProtocol::omega_squared(double t) const {
    if (t <= 0.0) return omega0_ * omega0_;
    const Segment* s = segment_at(t);
    if (s == nullptr) return omegaf_ * omegaf_;
    return std::visit(
        [&](const auto& k) -> double {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, ConstantSegment>) {
                return k.omega1 * k.omega1;
            } else if constexpr (std::is_same_v<K, ExpRampSegment>) {
                const double w = k.omega_ref * std::exp(t / k.tau_ref);
                return w * w;
            } else {
                return k.profile.omega_sq(t);
            }
        },
        s->kind);
}

double FrequencyProtocol::omega(double t) const {
    const double w2 = omega_squared(t);
    if (w2 < 0.0) {
        std::ostringstream os;
        os << "omega^2 = " << w2 << " < 0 at t = " << t;
        throw ExpulsiveRegime(os.str(), t, t);
    }
    return std::sqrt(w2);
}

std::string FrequencyProtocol::tag_at(double t) const {
    if (t <= 0.0) return "pre";
    const Segment* s = segment_at(t);
    return s != nullptr ? s->label : "final";
}

double eval_omega(const FrequencyProtocol& p, double t) { return p.omega(t); }
double eval_omega_squared(const FrequencyProtocol& p, double t) { return p.omega_squared(t); }

FrequencyProtocol make_sudden_jump(double m0, double omega0, double omega1, double tau,
                                   double omegaf) {
    if (!(omega1 > 0.0)) throw ConfigError("sudden jump: omega1 must be positive");
    std::vector<Segment> segs;
    segs.push_back(Segment{0.0, tau, ConstantSegment{omega1}, "seg0:constant"});
    return FrequencyProtocol(m0, omega0, omegaf, tau, std::move(segs));
}

FrequencyProtocol make_exp_ramp(double m0, double omega0, double tau, double omegaf) {
    if (!(omega0 > 0.0) || !(omegaf > 0.0))
        throw ConfigError("exp ramp: endpoint frequencies must be positive");
    if (omegaf == omega0)
        throw ConfigError("exp ramp: endpoint frequencies must differ (use a constant segment)");
    const double tau_ref = tau / std::log(omegaf / omega0);
    std::vector<Segment> segs;
    segs.push_back(Segment{0.0, tau, ExpRampSegment{omega0, tau_ref}, "seg0:exp_ramp"});
    return FrequencyProtocol(m0, omega0, omegaf, tau, std::move(segs));
}

FrequencyProtocol make_from_rho(RhoProfile profile, double omegaf,
                                std::optional<double> omega0) {
    const double m0 = profile.m0();
    const double tau = profile.tau();
    const double rho_at_0 = profile.value(0.0);
    const double w0 = omega0.value_or(1.0 / (m0 * rho_at_0 * rho_at_0));
    std::vector<Segment> segs;
    segs.push_back(Segment{0.0, tau, FromRhoSegment{std::move(profile)}, "seg0:from_rho"});
    return FrequencyProtocol(m0, w0, omegaf, tau, std::move(segs));
}

FrequencyProtocol make_piecewise(double m0, double omega0, double omegaf, double tau,
                                 std::vector<Segment> segments) {
    return FrequencyProtocol(m0, omega0, omegaf, tau, std::move(segments));
}

ExpulsiveReport scan_expulsive(const FrequencyProtocol& p, std::size_t points) {
    if (points < 2) throw ConfigError("scan_expulsive: need at least 2 points");
    ExpulsiveReport rep;
    rep.min_omega_sq = std::numeric_limits<double>::infinity();
    bool in_neg = false;
    double neg_start = 0.0, neg_last = 0.0;
    for (std::size_t i = 1; i <= points; ++i) {
        const double t = p.tau() * static_cast<double>(i) / static_cast<double>(points);
        const double w2 = p.omega_squared(t);
        if (w2 < rep.min_omega_sq) {
            rep.min_omega_sq = w2;
            rep.argmin_t = t;
        }
        if (w2 < 0.0) {
            if (!in_neg) {
                in_neg = true;
                neg_start = t;
            }
            neg_last = t;
        } else if (in_neg) {
            in_neg = false;
            rep.negative_intervals.emplace_back(neg_start, neg_last);
        }
    }
    if (in_neg) rep.negative_intervals.emplace_back(neg_start, neg_last);
    return rep;
}

} // namespace tdho
