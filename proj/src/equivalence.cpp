#include "tdho/equivalence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tdho/ermakov.hpp"
#include "tdho/protocols.hpp"
#include "tdho/squeeze.hpp"

namespace tdho {

namespace {

constexpr double kE = 2.71828182845904523536;

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Residual norm with failures mapped to +inf so the scan can step over them.
double safe_norm(const EquivalenceProblem& p, const std::vector<double>& x,
                 std::vector<double>* r_out = nullptr) {
    try {
        std::vector<double> r = p.residual(x);
        if (r.size() != p.residual_dim)
            throw ConfigError("equivalence: residual dimension mismatch");
        for (double v : r)
            if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
        const double nn = norm2(r);
        if (r_out != nullptr) *r_out = std::move(r);
        return nn;
    } catch (ConfigError&) {
        throw;
    } catch (Error&) {
        return std::numeric_limits<double>::infinity();
    }
}

// Small dense least-squares step: solves (J^T J) d = -J^T r in n unknowns.
bool normal_equation_step(const std::vector<std::vector<double>>& jac,
                          const std::vector<double>& r, std::vector<double>& d) {
    const std::size_t n = d.size();
    const std::size_t m = r.size();
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    std::vector<double> b(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < m; ++k) a[i][j] += jac[k][i] * jac[k][j];
        for (std::size_t k = 0; k < m; ++k) b[i] -= jac[k][i] * r[k];
    }
    // Partial-pivot elimination on the (tiny) normal system.
    double scale = 0.0;
    for (const auto& row : a)
        for (double v : row) scale = std::max(scale, std::abs(v));
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t i = col + 1; i < n; ++i)
            if (std::abs(a[i][col]) > std::abs(a[piv][col])) piv = i;
        if (std::abs(a[piv][col]) <= 1e-14 * std::max(scale, 1e-300)) return false;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t i = col + 1; i < n; ++i) {
            const double f = a[i][col] / a[col][col];
            for (std::size_t j = col; j < n; ++j) a[i][j] -= f * a[col][j];
            b[i] -= f * b[col];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * d[j];
        d[i] = s / a[i][i];
    }
    return true;
}

std::vector<double> clamp_to_box(std::vector<double> x, const EquivalenceProblem& p) {
    for (std::size_t j = 0; j < x.size(); ++j)
        x[j] = std::clamp(x[j], p.box[j].first, p.box[j].second);
    return x;
}

struct PolishResult {
    std::vector<double> params;
    std::vector<double> residual;
    double norm = std::numeric_limits<double>::infinity();
};

PolishResult gauss_newton(const EquivalenceProblem& p, std::vector<double> x) {
    const std::size_t n = p.dim();
    PolishResult best;
    std::vector<double> r;
    double fx = safe_norm(p, x, &r);
    if (std::isfinite(fx)) {
        best.params = x;
        best.residual = r;
        best.norm = fx;
    }
    for (std::size_t it = 0; it < p.max_iterations && std::isfinite(fx); ++it) {
        if (fx <= p.accept_tol * 0.01) break;
        // Central-difference Jacobian, rows indexed by residual component.
        std::vector<std::vector<double>> jac(p.residual_dim, std::vector<double>(n, 0.0));
        bool jac_ok = true;
        for (std::size_t j = 0; j < n && jac_ok; ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
            std::vector<double> xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            std::vector<double> rp, rm;
            if (!std::isfinite(safe_norm(p, xp, &rp)) || !std::isfinite(safe_norm(p, xm, &rm))) {
                jac_ok = false;
                break;
            }
            for (std::size_t k = 0; k < p.residual_dim; ++k)
                jac[k][j] = (rp[k] - rm[k]) / (2.0 * h);
        }
        if (!jac_ok) break;

        std::vector<double> d(n, 0.0);
        if (!normal_equation_step(jac, r, d)) break;

        double step = 1.0;
        bool improved = false;
        for (int halving = 0; halving < 14; ++halving, step *= 0.5) {
            std::vector<double> xt(n);
            for (std::size_t j = 0; j < n; ++j) xt[j] = x[j] + step * d[j];
            xt = clamp_to_box(std::move(xt), p);
            std::vector<double> rt;
            const double ft = safe_norm(p, xt, &rt);
            if (ft < fx) {
                x = std::move(xt);
                r = std::move(rt);
                fx = ft;
                improved = true;
                break;
            }
        }
        if (fx < best.norm) {
            best.params = x;
            best.residual = r;
            best.norm = fx;
        }
        if (!improved) break;
        double dmax = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            dmax = std::max(dmax, std::abs(step * d[j]) / std::max(1.0, std::abs(x[j])));
        if (dmax < 1e-14) break;
    }
    return best;
}

} // namespace

bool Tolerance::close(double a, double b) const { return std::abs(a - b) <= slack(a, b); }

double Tolerance::slack(double a, double b) const {
    return atol + rtol * std::max(std::abs(a), std::abs(b));
}

EquivalenceCheck check_equivalence(const EndState& a, const EndState& b, const Tolerance& tol) {
    if (!(a.delta > 0.0) || !(b.delta > 0.0))
        throw ConfigError("check_equivalence: delta must be positive");
    if (!(a.omegaf > 0.0) || !(b.omegaf > 0.0))
        throw ConfigError("check_equivalence: omegaf must be positive");
    if (!tol.close(a.m0, b.m0))
        throw ConfigError("check_equivalence: end states carry different masses");

    EquivalenceCheck out;
    out.d_omegaf = std::abs(a.omegaf - b.omegaf);
    out.d_delta = std::abs(a.delta - b.delta);
    out.d_epsilon = std::abs(a.epsilon - b.epsilon);
    out.equivalent = tol.close(a.omegaf, b.omegaf) && tol.close(a.delta, b.delta) &&
                     tol.close(a.epsilon, b.epsilon);
    out.r_a = squeeze_param(a.delta, a.epsilon, a.m0, a.omegaf);
    out.r_b = squeeze_param(b.delta, b.epsilon, b.m0, b.omegaf);

    if (out.equivalent) {
        // Propagate the component slacks through r(delta, epsilon, omegaf) by
        // one-sided sensitivities; a positive check must respect this bound.
        auto r_of = [&](double d, double e, double w) {
            return squeeze_param(d, e, a.m0, w);
        };
        const double sd = tol.slack(a.delta, b.delta);
        const double se = tol.slack(a.epsilon, b.epsilon);
        const double sw = tol.slack(a.omegaf, b.omegaf);
        const double base = out.r_a;
        double bound = 1e-12;
        bound += std::abs(r_of(a.delta + sd, a.epsilon, a.omegaf) - base);
        bound += std::abs(r_of(a.delta, a.epsilon + se, a.omegaf) - base);
        bound += std::abs(r_of(a.delta, a.epsilon, a.omegaf + sw) - base);
        bound += std::abs(r_of(a.delta - sd, a.epsilon, a.omegaf) - base);
        bound += std::abs(r_of(a.delta, a.epsilon - se, a.omegaf) - base);
        bound += std::abs(r_of(a.delta, a.epsilon, a.omegaf - sw) - base);
        if (std::abs(out.r_a - out.r_b) > bound)
            throw Error("check_equivalence: squeezing parameters disagree beyond the "
                        "propagated tolerance on a positive check");
    }
    return out;
}

bool chain_equivalence(const std::vector<EndState>& states, const Tolerance& tol) {
    if (states.size() < 2)
        throw ConfigError("chain_equivalence: need at least two end states");
    for (std::size_t i = 0; i < states.size(); ++i)
        for (std::size_t j = i + 1; j < states.size(); ++j)
            if (!check_equivalence(states[i], states[j], tol).equivalent) return false;
    return true;
}

double janszky_adam_tau(double omega1, unsigned q) {
    if (!(omega1 > 0.0)) throw ConfigError("janszky_adam_tau: omega1 must be positive");
    if (q == 0) throw ConfigError("janszky_adam_tau: q must be at least 1");
    return q * 3.14159265358979323846 / omega1;
}

EquivalenceSolution solve_equivalence(const EquivalenceProblem& p) {
    const std::size_t n = p.dim();
    if (n == 0 || n > 4) throw ConfigError("solve_equivalence: 1 to 4 parameters supported");
    if (p.names.size() != n) throw ConfigError("solve_equivalence: one name per parameter");
    if (!p.residual) throw ConfigError("solve_equivalence: residual map not set");
    if (p.residual_dim < n)
        throw ConfigError("solve_equivalence: underdetermined systems are not supported");
    if (p.grid < 4) throw ConfigError("solve_equivalence: grid too coarse");
    for (const auto& [lo, hi] : p.box)
        if (!(hi > lo)) throw ConfigError("solve_equivalence: empty parameter box");

    // Scan lattice, (grid+1) points per axis.
    const std::size_t side = p.grid + 1;
    std::size_t total = 1;
    for (std::size_t j = 0; j < n; ++j) total *= side;

    auto coord = [&](std::size_t flat, std::size_t j) {
        for (std::size_t q = 0; q < j; ++q) flat /= side;
        const std::size_t idx = flat % side;
        const auto& [lo, hi] = p.box[j];
        return lo + (hi - lo) * static_cast<double>(idx) / static_cast<double>(p.grid);
    };

    std::vector<double> norms(total);
    std::vector<std::vector<double>> values(total);
    std::size_t near_zero = 0;
    double best_norm = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < total; ++f) {
        std::vector<double> x(n);
        for (std::size_t j = 0; j < n; ++j) x[j] = coord(f, j);
        std::vector<double> r;
        norms[f] = safe_norm(p, x, &r);
        values[f] = std::move(r);
        if (norms[f] <= p.accept_tol) ++near_zero;
        best_norm = std::min(best_norm, norms[f]);
    }

    EquivalenceSolution sol;
    sol.best_norm = best_norm;
    if (static_cast<double>(near_zero) >= p.degenerate_frac * static_cast<double>(total)) {
        sol.degenerate_family = true;
        return sol;
    }

    // Candidate starts: lattice-local minima of the norm, plus (for square 2d
    // systems) cells where both residual components change sign.
    std::vector<std::vector<double>> starts;
    auto flat_of = [&](const std::vector<std::size_t>& idx) {
        std::size_t f = 0;
        for (std::size_t j = n; j-- > 0;) f = f * side + idx[j];
        return f;
    };

    std::vector<std::size_t> idx(n, 0);
    for (std::size_t f = 0; f < total; ++f) {
        {
            std::size_t rem = f;
            for (std::size_t j = 0; j < n; ++j) {
                idx[j] = rem % side;
                rem /= side;
            }
        }
        if (!std::isfinite(norms[f])) continue;
        bool is_min = true;
        for (std::size_t j = 0; j < n && is_min; ++j) {
            for (int dir = -1; dir <= 1 && is_min; dir += 2) {
                if ((dir < 0 && idx[j] == 0) || (dir > 0 && idx[j] + 1 == side)) continue;
                auto nb = idx;
                nb[j] += dir;
                if (norms[flat_of(nb)] < norms[f]) is_min = false;
            }
        }
        if (is_min) {
            std::vector<double> x(n);
            for (std::size_t j = 0; j < n; ++j) x[j] = coord(f, j);
            starts.push_back(std::move(x));
        }
    }

    if (n == 2 && p.residual_dim == 2) {
        for (std::size_t i = 0; i + 1 < side; ++i) {
            for (std::size_t j = 0; j + 1 < side; ++j) {
                const std::size_t c00 = flat_of({i, j}), c10 = flat_of({i + 1, j});
                const std::size_t c01 = flat_of({i, j + 1}), c11 = flat_of({i + 1, j + 1});
                bool ok = true;
                for (std::size_t c : {c00, c10, c01, c11})
                    if (!std::isfinite(norms[c])) ok = false;
                if (!ok) continue;
                bool flips = true;
                for (std::size_t comp = 0; comp < 2 && flips; ++comp) {
                    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
                    for (std::size_t c : {c00, c10, c01, c11}) {
                        lo = std::min(lo, values[c][comp]);
                        hi = std::max(hi, values[c][comp]);
                    }
                    if (!(lo <= 0.0 && hi >= 0.0)) flips = false;
                }
                if (flips) {
                    starts.push_back({0.5 * (coord(c00, 0) + coord(c11, 0)),
                                      0.5 * (coord(c00, 1) + coord(c11, 1))});
                }
            }
        }
    }

    for (const auto& start : starts) {
        const PolishResult res = gauss_newton(p, start);
        sol.best_norm = std::min(sol.best_norm, res.norm);
        if (!(res.norm <= p.accept_tol)) continue;
        bool duplicate = false;
        for (const EquivalenceRoot& r : sol.roots) {
            bool same = true;
            for (std::size_t j = 0; j < n; ++j)
                if (std::abs(r.params[j] - res.params[j]) >
                    1e-6 * std::max(1.0, std::abs(res.params[j])))
                    same = false;
            if (same) {
                duplicate = true;
                break;
            }
        }
        if (duplicate) continue;
        EquivalenceRoot root;
        root.params = res.params;
        root.residual = res.residual;
        root.residual_norm = res.norm;
        sol.roots.push_back(std::move(root));
    }

    std::sort(sol.roots.begin(), sol.roots.end(),
              [](const EquivalenceRoot& a, const EquivalenceRoot& b) {
                  return a.params < b.params;
              });

    if (sol.roots.empty()) {
        std::ostringstream os;
        os << "no equivalence root reached tolerance " << p.accept_tol
           << " (best residual norm " << sol.best_norm << ")";
        throw NoRootFound(os.str(), sol.best_norm);
    }
    return sol;
}

EquivalenceRoot polish_root(const EquivalenceProblem& p, std::vector<double> start) {
    if (start.size() != p.dim())
        throw ConfigError("polish_root: start has wrong dimension");
    const PolishResult res = gauss_newton(p, clamp_to_box(std::move(start), p));
    if (!(res.norm <= p.accept_tol)) {
        std::ostringstream os;
        os << "polish stalled at residual norm " << res.norm;
        throw NoRootFound(os.str(), res.norm);
    }
    EquivalenceRoot root;
    root.params = res.params;
    root.residual = res.residual;
    root.residual_norm = res.norm;
    return root;
}

EquivalenceProblem jump_vs_exp_ramp_problem(double m0) {
    if (!(m0 > 0.0)) throw ConfigError("jump_vs_exp_ramp_problem: m0 must be positive");
    EquivalenceProblem p;
    p.names = {"omega0_tau", "omega1_tau"};
    p.box = {{0.5, 6.0}, {0.5, 8.0}};
    p.grid = 64;
    p.residual_dim = 2;
    p.residual = [m0](const std::vector<double>& x) {
        const double w0 = x[0], w1 = x[1]; // omega0*tau and omega1*tau at tau = 1
        if (!(w0 > 0.0) || !(w1 > 0.0))
            throw NonPhysical("scaled frequencies must stay positive");
        const double wf = kE * w0;
        const auto jump = make_sudden_jump(m0, w0, w1, 1.0, wf);
        const auto ramp = make_exp_ramp(m0, w0, 1.0, wf);
        const ErmakovState a = end_state_closed_form(jump);
        const ErmakovState b = end_state_closed_form(ramp);
        return std::vector<double>{a.rho - b.rho, a.rho_dot - b.rho_dot};
    };
    return p;
}

EquivalenceProblem janszky_tau_problem(double omega0, double omega1, double m0,
                                       double tau_min, double tau_max) {
    if (!(omega0 > 0.0) || !(omega1 > 0.0))
        throw ConfigError("janszky_tau_problem: frequencies must be positive");
    if (!(m0 > 0.0)) throw ConfigError("janszky_tau_problem: m0 must be positive");
    if (!(tau_max > tau_min) || !(tau_min > 0.0))
        throw ConfigError("janszky_tau_problem: need 0 < tau_min < tau_max");
    EquivalenceProblem p;
    p.names = {"tau"};
    p.box = {{tau_min, tau_max}};
    p.grid = 256;
    p.residual_dim = 2;
    p.residual = [omega0, omega1, m0](const std::vector<double>& x) {
        const double tau = x[0];
        if (!(tau > 0.0)) throw NonPhysical("tau must stay positive");
        const auto jump = make_sudden_jump(m0, omega0, omega1, tau, omega0);
        const ErmakovState s = end_state_closed_form(jump);
        const double rho0 = rho_constant(m0, omega0);
        return std::vector<double>{s.rho - rho0, s.rho_dot};
    };
    return p;
}

} // namespace tdho
