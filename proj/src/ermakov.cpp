#include "tdho/ermakov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "tdho/format.hpp"

namespace tdho {

namespace {

double wronskian_floor(double u0, double du0, double v0, double dv0) {
    const double scale = std::max({std::abs(u0), std::abs(du0), std::abs(v0), std::abs(dv0), 1.0});
    return 1e-14 * scale * scale;
}

std::function<double(double)> segment_omega_sq(const Segment& seg) {
    return std::visit(
        [](const auto& k) -> std::function<double(double)> {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, ConstantSegment>) {
                const double w2 = k.omega1 * k.omega1;
                return [w2](double) { return w2; };
            } else if constexpr (std::is_same_v<K, ExpRampSegment>) {
                const double wr = k.omega_ref, tr = k.tau_ref;
                return [wr, tr](double t) {
                    const double w = wr * std::exp(t / tr);
                    return w * w;
                };
            } else {
                const RhoProfile* prof = &k.profile;
                return [prof](double t) { return prof->omega_sq(t); };
            }
        },
        seg.kind);
}

} // namespace

FormalCoefficients formal_coefficients(double u0, double du0, double v0, double dv0,
                                       double m0, double omega0) {
    if (!(m0 > 0.0) || !(omega0 > 0.0))
        throw ConfigError("formal_coefficients requires m0 > 0 and omega0 > 0");
    const double w = u0 * dv0 - du0 * v0;
    if (std::abs(w) <= wronskian_floor(u0, du0, v0, dv0))
        throw DegenerateSolutions("classical solutions are linearly dependent (W ~ 0)");
    const double den = m0 * omega0 * w * w;
    FormalCoefficients c;
    c.a = (omega0 * omega0 * v0 * v0 + dv0 * dv0) / den;
    c.b = (omega0 * omega0 * u0 * u0 + du0 * du0) / den;
    c.c = -(omega0 * omega0 * u0 * v0 + du0 * dv0) / den;
    return c;
}

ClassicalPair harmonic_pair(double omega) {
    if (!(omega > 0.0)) throw ConfigError("harmonic_pair requires omega > 0");
    ClassicalPair p;
    p.u = [omega](double t) { return std::sin(omega * t); };
    p.du = [omega](double t) { return omega * std::cos(omega * t); };
    p.v = [omega](double t) { return std::cos(omega * t); };
    p.dv = [omega](double t) { return -omega * std::sin(omega * t); };
    p.omega_sq = [omega](double) { return omega * omega; };
    return p;
}

ClassicalPair bessel_ramp_pair(double omega_ref, double tau_ref) {
    if (!(omega_ref > 0.0) || tau_ref == 0.0)
        throw ConfigError("bessel_ramp_pair requires omega_ref > 0 and tau_ref != 0");
    const double wr = omega_ref, tr = tau_ref;
    // Evaluate the cylinder functions at |omega tau_ref| so that downward
    // ramps (tau_ref < 0) stay inside their domain; d(arg)/dt = arg / tau_ref
    // keeps the chain rule exact for either sign.
    auto arg = [wr, tr](double t) { return std::abs(wr * tr) * std::exp(t / tr); };
    ClassicalPair p;
    p.u = [arg](double t) { return std::cyl_bessel_j(0, arg(t)); };
    p.du = [arg, tr](double t) {
        const double z = arg(t);
        return -std::cyl_bessel_j(1, z) * z / tr;
    };
    p.v = [arg](double t) { return std::cyl_neumann(0, arg(t)); };
    p.dv = [arg, tr](double t) {
        const double z = arg(t);
        return -std::cyl_neumann(1, z) * z / tr;
    };
    p.omega_sq = [arg, tr](double t) {
        const double w = arg(t) / tr;
        return w * w;
    };
    return p;
}

void FormalSolution::squares(double t, double& s, double& ds, double& dds) const {
    const double u = pair_.u(t), du = pair_.du(t);
    const double v = pair_.v(t), dv = pair_.dv(t);
    const double a = coef_.a, b = coef_.b, c = coef_.c;
    s = a * u * u + b * v * v + 2.0 * c * u * v;
    ds = 2.0 * (a * u * du + b * v * dv + c * (du * v + u * dv));
    dds = 2.0 * (a * du * du + b * dv * dv + 2.0 * c * du * dv) - 2.0 * pair_.omega_sq(t) * s;
}

double FormalSolution::rho(double t) const {
    double s, ds, dds;
    squares(t, s, ds, dds);
    if (!(s > 0.0)) throw NonPhysical("formal solution lost positivity of rho^2");
    return std::sqrt(s);
}

double FormalSolution::rho_dot(double t) const {
    double s, ds, dds;
    squares(t, s, ds, dds);
    if (!(s > 0.0)) throw NonPhysical("formal solution lost positivity of rho^2");
    return ds / (2.0 * std::sqrt(s));
}

double FormalSolution::rho_ddot(double t) const {
    double s, ds, dds;
    squares(t, s, ds, dds);
    if (!(s > 0.0)) throw NonPhysical("formal solution lost positivity of rho^2");
    const double r = std::sqrt(s);
    const double rd = ds / (2.0 * r);
    return dds / (2.0 * r) - rd * rd / r;
}

ErmakovState FormalSolution::state(double t) const {
    double s, ds, dds;
    squares(t, s, ds, dds);
    if (!(s > 0.0)) throw NonPhysical("formal solution lost positivity of rho^2");
    ErmakovState st;
    st.t = t;
    st.rho = std::sqrt(s);
    st.rho_dot = ds / (2.0 * st.rho);
    return st;
}

FormalSolution formal_solution_through(ClassicalPair pair, double t_s, double rho_s,
                                       double drho_s, double m0) {
    if (!(rho_s > 0.0)) throw ConfigError("formal_solution_through requires rho_s > 0");
    if (!(m0 > 0.0)) throw ConfigError("formal_solution_through requires m0 > 0");
    const double u0 = pair.u(t_s), du0 = pair.du(t_s);
    const double v0 = pair.v(t_s), dv0 = pair.dv(t_s);
    const double w = u0 * dv0 - du0 * v0;
    if (std::abs(w) <= wronskian_floor(u0, du0, v0, dv0))
        throw DegenerateSolutions("classical solutions are linearly dependent (W ~ 0)");

    // Combination with initial data (rho_s, drho_s); a second one with (0, 1)
    // supplies the Pinney term rho^2 = utilde^2 + vtilde^2/(m0 rho_s)^2.
    const double alpha = (rho_s * dv0 - drho_s * v0) / w;
    const double beta = (drho_s * u0 - rho_s * du0) / w;
    const double gamma = -v0 / w;
    const double delta = u0 / w;
    const double p = 1.0 / (m0 * m0 * rho_s * rho_s);

    FormalCoefficients c;
    c.a = alpha * alpha + p * gamma * gamma;
    c.b = beta * beta + p * delta * delta;
    c.c = alpha * beta + p * gamma * delta;
    return FormalSolution(std::move(pair), c, m0);
}

// ---------------------------------------------------------------------------
// Final constant-frequency stretch

namespace {
void final_squares(const FinalSegmentCoefficients& f, double t, double& s, double& ds,
                   double& dds) {
    const double u = std::sin(f.omegaf * t), du = f.omegaf * std::cos(f.omegaf * t);
    const double v = std::cos(f.omegaf * t), dv = -f.omegaf * std::sin(f.omegaf * t);
    s = f.af * u * u + f.bf * v * v + 2.0 * f.cf * u * v;
    ds = 2.0 * (f.af * u * du + f.bf * v * dv + f.cf * (du * v + u * dv));
    dds = 2.0 * (f.af * du * du + f.bf * dv * dv + 2.0 * f.cf * du * dv) -
          2.0 * f.omegaf * f.omegaf * s;
}
} // namespace

double FinalSegmentCoefficients::rho(double t) const {
    double s, ds, dds;
    final_squares(*this, t, s, ds, dds);
    if (!(s > 0.0)) throw NonPhysical("final-segment rho^2 lost positivity");
    return std::sqrt(s);
}

double FinalSegmentCoefficients::rho_dot(double t) const {
    double s, ds, dds;
    final_squares(*this, t, s, ds, dds);
    if (!(s > 0.0)) throw NonPhysical("final-segment rho^2 lost positivity");
    return ds / (2.0 * std::sqrt(s));
}

double FinalSegmentCoefficients::rho_ddot(double t) const {
    double s, ds, dds;
    final_squares(*this, t, s, ds, dds);
    if (!(s > 0.0)) throw NonPhysical("final-segment rho^2 lost positivity");
    const double r = std::sqrt(s);
    const double rd = ds / (2.0 * r);
    return dds / (2.0 * r) - rd * rd / r;
}

FinalSegmentCoefficients final_segment(double rho_tau, double drho_tau, double m0,
                                       double omegaf, double tau) {
    if (!(rho_tau > 0.0)) throw NonPhysical("final_segment requires rho(tau) > 0");
    if (!(m0 > 0.0) || !(omegaf > 0.0))
        throw ConfigError("final_segment requires m0 > 0 and omegaf > 0");
    FinalSegmentCoefficients f;
    f.delta = rho_tau;
    f.epsilon = drho_tau;
    f.omegaf = omegaf;
    f.tau = tau;
    f.m0 = m0;

    // Continuation coefficients assembled from the matched pair at t = tau;
    // this form avoids the cancellation the expanded products suffer from.
    const double st = std::sin(omegaf * tau), ct = std::cos(omegaf * tau);
    const double alpha = rho_tau * st + (drho_tau / omegaf) * ct;
    const double beta = rho_tau * ct - (drho_tau / omegaf) * st;
    const double gamma = ct / omegaf;
    const double delta = -st / omegaf;
    const double p = 1.0 / (m0 * m0 * rho_tau * rho_tau);
    f.af = alpha * alpha + p * gamma * gamma;
    f.bf = beta * beta + p * delta * delta;
    f.cf = alpha * beta + p * gamma * delta;
    return f;
}

// ---------------------------------------------------------------------------
// Trajectories

ErmakovState ErmakovTrajectory::back_state() const {
    if (t.empty()) throw ConfigError("trajectory is empty");
    ErmakovState st;
    st.t = t.back();
    st.rho = rho.back();
    st.rho_dot = rho_dot.back();
    return st;
}

namespace {

struct GridSplit {
    std::vector<double> pre, post;
    std::vector<std::vector<double>> per_segment;
};

GridSplit split_grid(const FrequencyProtocol& protocol, const std::vector<double>& grid) {
    const double tau = protocol.tau();
    const double slack = 1e-12 * std::max(1.0, tau);
    const auto& segs = protocol.segments();
    GridSplit gs;
    gs.per_segment.resize(segs.size());
    std::size_t cur = 0;
    double prev = -std::numeric_limits<double>::infinity();
    for (double t : grid) {
        if (t < prev) throw ConfigError("time grid must be sorted ascending");
        prev = t;
        if (t <= 0.0) {
            gs.pre.push_back(t);
        } else if (t > tau + slack) {
            gs.post.push_back(t);
        } else {
            while (cur + 1 < segs.size() && t > segs[cur].t_end + slack) ++cur;
            gs.per_segment[cur].push_back(t);
        }
    }
    return gs;
}

void push_row(ErmakovTrajectory& tr, double t, double rho, double rho_dot, double rho_ddot,
              double omega_sq, const std::string& tag) {
    tr.t.push_back(t);
    tr.rho.push_back(rho);
    tr.rho_dot.push_back(rho_dot);
    tr.rho_ddot.push_back(rho_ddot);
    tr.omega_sq.push_back(omega_sq);
    tr.segment.push_back(tag);
}

void append_pre_rows(ErmakovTrajectory& tr, const FrequencyProtocol& p,
                     const std::vector<double>& ts) {
    const double rho0 = rho_constant(p.m0(), p.omega0());
    for (double t : ts) push_row(tr, t, rho0, 0.0, 0.0, p.omega0() * p.omega0(), "pre");
}

void append_final_rows(ErmakovTrajectory& tr, const FinalSegmentCoefficients& f,
                       const std::vector<double>& ts) {
    for (double t : ts)
        push_row(tr, t, f.rho(t), f.rho_dot(t), f.rho_ddot(t), f.omegaf * f.omegaf, "final");
}

ErmakovState integrate_core(const FrequencyProtocol& protocol, const std::vector<double>& grid,
                            const IntegrateOptions& opt, ErmakovTrajectory* out) {
    if (opt.strict_expulsive) {
        const ExpulsiveReport rep = scan_expulsive(protocol, 2048);
        if (!rep.clean()) {
            std::ostringstream os;
            os << "omega^2 dips to " << rep.min_omega_sq << " near t = " << rep.argmin_t;
            throw ExpulsiveRegime(os.str(), rep.negative_intervals.front().first,
                                  rep.negative_intervals.front().second);
        }
    }

    const GridSplit gs = split_grid(protocol, grid);
    const double m0 = protocol.m0();
    if (out != nullptr) {
        out->m0 = m0;
        append_pre_rows(*out, protocol, gs.pre);
    }

    OdeOptions ode_opt;
    ode_opt.rtol = opt.rtol;
    ode_opt.atol = opt.atol;
    ode_opt.guard = [](double, const OdeState& y) {
        return y[0] > 0.0 && std::abs(y[0]) < 1e12 && std::abs(y[1]) < 1e12;
    };

    ErmakovState st;
    st.t = 0.0;
    st.rho = rho_constant(m0, protocol.omega0());
    st.rho_dot = 0.0;

    const auto& segs = protocol.segments();
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const Segment& seg = segs[i];
        const auto w2 = segment_omega_sq(seg);
        const double inv_m2 = 1.0 / (m0 * m0);
        OdeRhs rhs = [&w2, inv_m2](double t, const OdeState& y, OdeState& dy) {
            dy[0] = y[1];
            dy[1] = inv_m2 / (y[0] * y[0] * y[0]) - w2(t) * y[0];
        };

        const std::vector<double>& want = gs.per_segment[i];
        std::vector<double> clamped(want.size());
        for (std::size_t k = 0; k < want.size(); ++k)
            clamped[k] = std::clamp(want[k], seg.t_start, seg.t_end);

        std::size_t emitted = 0;
        OdeState y{st.rho, st.rho_dot};
        auto sink = [&](double t_sample, const OdeState& ys) {
            if (out != nullptr) {
                const double w2v = w2(t_sample);
                const double rddot = inv_m2 / (ys[0] * ys[0] * ys[0]) - w2v * ys[0];
                push_row(*out, want[emitted], ys[0], ys[1], rddot, w2v, seg.label);
            }
            ++emitted;
        };
        try {
            dopri5_integrate(rhs, seg.t_start, y, seg.t_end, ode_opt, clamped, sink);
        } catch (BlowUp&) {
            std::ostringstream os;
            os << "rho left the trust region inside segment '" << seg.label << "'";
            throw BlowUp(os.str());
        }
        st.t = seg.t_end;
        st.rho = y[0];
        st.rho_dot = y[1];
    }

    if (out != nullptr && !gs.post.empty()) {
        const auto fin = final_segment(st.rho, st.rho_dot, m0, protocol.omegaf(), protocol.tau());
        append_final_rows(*out, fin, gs.post);
    }
    return st;
}

ErmakovState closed_form_core(const FrequencyProtocol& protocol, const std::vector<double>& grid,
                              ErmakovTrajectory* out) {
    const GridSplit gs = split_grid(protocol, grid);
    const double m0 = protocol.m0();
    if (out != nullptr) {
        out->m0 = m0;
        append_pre_rows(*out, protocol, gs.pre);
    }

    ErmakovState st;
    st.t = 0.0;
    st.rho = rho_constant(m0, protocol.omega0());
    st.rho_dot = 0.0;

    const auto& segs = protocol.segments();
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const Segment& seg = segs[i];
        ClassicalPair pair = std::visit(
            [](const auto& k) -> ClassicalPair {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, ConstantSegment>) {
                    return harmonic_pair(k.omega1);
                } else if constexpr (std::is_same_v<K, ExpRampSegment>) {
                    return bessel_ramp_pair(k.omega_ref, k.tau_ref);
                } else {
                    throw ConfigError(
                        "closed-form route needs constant or exponential-ramp segments");
                }
            },
            seg.kind);
        FormalSolution sol = formal_solution_through(std::move(pair), st.t, st.rho, st.rho_dot, m0);
        if (out != nullptr) {
            for (double t : gs.per_segment[i]) {
                const double tc = std::clamp(t, seg.t_start, seg.t_end);
                push_row(*out, t, sol.rho(tc), sol.rho_dot(tc), sol.rho_ddot(tc),
                         eval_omega_squared(protocol, tc), seg.label);
            }
        }
        st = sol.state(seg.t_end);
    }

    if (out != nullptr && !gs.post.empty()) {
        const auto fin = final_segment(st.rho, st.rho_dot, m0, protocol.omegaf(), protocol.tau());
        append_final_rows(*out, fin, gs.post);
    }
    return st;
}

} // namespace

ErmakovTrajectory integrate_ep(const FrequencyProtocol& protocol, const std::vector<double>& grid,
                               const IntegrateOptions& opt) {
    ErmakovTrajectory tr;
    integrate_core(protocol, grid, opt, &tr);
    return tr;
}

ErmakovTrajectory solve_closed_form(const FrequencyProtocol& protocol,
                                    const std::vector<double>& grid) {
    ErmakovTrajectory tr;
    closed_form_core(protocol, grid, &tr);
    return tr;
}

ErmakovState end_state_ode(const FrequencyProtocol& protocol, const IntegrateOptions& opt) {
    return integrate_core(protocol, {}, opt, nullptr);
}

ErmakovState end_state_closed_form(const FrequencyProtocol& protocol) {
    return closed_form_core(protocol, {}, nullptr);
}

double max_ermakov_residual(const ErmakovTrajectory& traj) {
    if (!(traj.m0 > 0.0)) throw ConfigError("trajectory carries no mass scale");
    const double inv_m2 = 1.0 / (traj.m0 * traj.m0);
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double rho = traj.rho[i];
        const double spring = traj.omega_sq[i] * rho;
        const double barrier = inv_m2 / (rho * rho * rho);
        const double res = std::abs(traj.rho_ddot[i] + spring - barrier);
        const double scale = std::max({1.0, std::abs(spring), std::abs(barrier)});
        worst = std::max(worst, res / scale);
    }
    return worst;
}

void write_trajectory_csv(std::ostream& os, const ErmakovTrajectory& traj) {
    os << "t,rho,rho_dot,omega,segment\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double w2 = traj.omega_sq[i];
        const double w = w2 >= 0.0 ? std::sqrt(w2) : std::numeric_limits<double>::quiet_NaN();
        os << detail::g12(traj.t[i]) << ',' << detail::g12(traj.rho[i]) << ','
           << detail::g12(traj.rho_dot[i]) << ',' << detail::g12(w) << ',' << traj.segment[i]
           << '\n';
    }
}

std::vector<double> linspace(double t_min, double t_max, std::size_t points) {
    if (points == 0) throw ConfigError("linspace: need at least 1 point");
    std::vector<double> out;
    out.reserve(points);
    if (points == 1) {
        out.push_back(t_min);
        return out;
    }
    for (std::size_t i = 0; i < points; ++i)
        out.push_back(t_min + (t_max - t_min) * static_cast<double>(i) /
                                  static_cast<double>(points - 1));
    out.back() = t_max;
    return out;
}

} // namespace tdho
