#pragma once

// Constrained reference solver for eta_tt = (sigma eta_s)_s + g, |eta_s| = 1.
//
// The string is discretized as a chain of rigid links between the grid nodes
// (lumped trapezoid masses, link lengths frozen at their initial values) and
// integrated with RATTLE: a position stage whose link multipliers make every
// link length exact, followed by a velocity stage that projects the velocity
// onto the tangent space (eta_s . v_s = 0 per link). The link multipliers play
// the role of the tension; the discrete tension equation solved for the
// acceleration is the link-staggered counterpart of the tension BVP.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "whipdyn/diagnostics.hpp"
#include "whipdyn/errors.hpp"
#include "whipdyn/grid.hpp"
#include "whipdyn/scenario.hpp"
#include "whipdyn/tension.hpp"

namespace whipdyn {

struct ConstrainedState {
    Field3 eta;
    Field3 v;
    double t = 0.0;
    std::vector<double> rest;  // link lengths; empty means h
};

namespace detail {

// Topology of the chain for a boundary family. For the periodic family node
// n-1 duplicates node 0 and the links close the loop.
struct Chain {
    std::size_t nodes = 0;  // distinct nodes
    std::size_t links = 0;
    bool cyclic = false;
    double h = 0.0;
    std::vector<double> minv;  // 0 for pinned nodes
    std::vector<double> rest;

    std::size_t a(std::size_t j) const { return j; }
    std::size_t b(std::size_t j) const { return cyclic ? (j + 1) % nodes : j + 1; }
    bool free(std::size_t i) const { return minv[i] > 0.0; }
};

inline Chain make_chain(const Grid1D& grid, BoundaryFamily bc, const std::vector<double>& rest) {
    Chain c;
    c.cyclic = bc == BoundaryFamily::Periodic;
    c.h = grid.spacing();
    c.nodes = c.cyclic ? grid.size() - 1 : grid.size();
    c.links = c.cyclic ? c.nodes : c.nodes - 1;
    c.minv.resize(c.nodes);
    for (std::size_t i = 0; i < c.nodes; ++i) c.minv[i] = 1.0 / (c.cyclic ? c.h : grid.weight(i));
    if (bc == BoundaryFamily::Whip || bc == BoundaryFamily::TwoFixed) c.minv[c.nodes - 1] = 0.0;
    if (bc == BoundaryFamily::TwoFixed) c.minv[0] = 0.0;
    c.rest = rest.empty() ? std::vector<double>(c.links, c.h) : rest;
    if (c.rest.size() != c.links) throw SizeError("constrained state: rest lengths do not match the links");
    return c;
}

inline std::vector<Vec3> link_vectors(const Chain& c, const Field3& eta) {
    std::vector<Vec3> e(c.links);
    for (std::size_t j = 0; j < c.links; ++j) e[j] = eta[c.b(j)] - eta[c.a(j)];
    return e;
}

// Acceleration contribution minv_i F_i for link forces sigma along directions e.
inline std::vector<Vec3> link_acceleration(const Chain& c, const std::vector<double>& sigma, const std::vector<Vec3>& e) {
    std::vector<Vec3> acc(c.nodes, Vec3::Zero());
    for (std::size_t j = 0; j < c.links; ++j) {
        const Vec3 f = sigma[j] * e[j] / c.h;
        acc[c.a(j)] += c.minv[c.a(j)] * f;
        acc[c.b(j)] -= c.minv[c.b(j)] * f;
    }
    return acc;
}

// Matrix M(d, e) with (M sigma)_j = d_j . (acc_b - acc_a) for link forces
// along e: coefficients of sigma_{j-1}, sigma_j, sigma_{j+1}.
struct LinkMatrix {
    std::vector<double> lower, diag, upper;
};

inline LinkMatrix link_matrix(const Chain& c, const std::vector<Vec3>& d, const std::vector<Vec3>& e) {
    LinkMatrix m;
    m.lower.assign(c.links, 0.0);
    m.diag.assign(c.links, 0.0);
    m.upper.assign(c.links, 0.0);
    for (std::size_t j = 0; j < c.links; ++j) {
        const std::size_t a = c.a(j), b = c.b(j);
        m.diag[j] = -(c.minv[a] + c.minv[b]) * d[j].dot(e[j]) / c.h;
        const bool has_prev = c.cyclic || j > 0;
        const bool has_next = c.cyclic || j + 1 < c.links;
        if (has_prev) {
            const std::size_t p = (j + c.links - 1) % c.links;
            m.lower[j] = c.minv[a] * d[j].dot(e[p]) / c.h;
        }
        if (has_next) {
            const std::size_t q = (j + 1) % c.links;
            m.upper[j] = c.minv[b] * d[j].dot(e[q]) / c.h;
        }
    }
    return m;
}

inline std::vector<double> solve_links(const Chain& c, const LinkMatrix& m, const std::vector<double>& rhs) {
    if (c.cyclic) return solve_cyclic_tridiagonal(m.lower, m.diag, m.upper, rhs);
    return solve_tridiagonal(m.lower, m.diag, m.upper, rhs);
}

inline Vec3 gravity_at(const Chain& c, std::size_t i, const Vec3& g) { return c.free(i) ? g : Vec3::Zero(); }

inline void sync_periodic(const Chain& c, Field3& f) {
    if (c.cyclic) f[f.size() - 1] = f[0];
}

}  // namespace detail

/// Link tensions sigma_{j+1/2} of the current state: the multipliers that keep
/// the second time derivative of every link length zero.
inline std::vector<double> link_tension(const ConstrainedState& st, BoundaryFamily bc, const Vec3& g) {
    st.eta.check_same(st.v);
    const auto chain = detail::make_chain(st.eta.grid(), bc, st.rest);
    const auto e = detail::link_vectors(chain, st.eta);
    const auto m = detail::link_matrix(chain, e, e);
    std::vector<double> rhs(chain.links);
    for (std::size_t j = 0; j < chain.links; ++j) {
        const std::size_t a = chain.a(j), b = chain.b(j);
        rhs[j] = -(st.v[b] - st.v[a]).squaredNorm() -
                 e[j].dot(detail::gravity_at(chain, b, g) - detail::gravity_at(chain, a, g));
    }
    return detail::solve_links(chain, m, rhs);
}

/// Nodal tension from link tensions: averages inside, 0 at a free end,
/// linear extrapolation at a pinned end.
inline FieldScalar nodal_tension(const std::vector<double>& links, const Grid1D& grid, BoundaryFamily bc) {
    FieldScalar s(grid);
    const std::size_t N = grid.last();
    if (bc == BoundaryFamily::Periodic) {
        const std::size_t L = links.size();
        for (std::size_t i = 0; i < N; ++i) s[i] = 0.5 * (links[(i + L - 1) % L] + links[i]);
        s[N] = s[0];
        return s;
    }
    for (std::size_t i = 1; i < N; ++i) s[i] = 0.5 * (links[i - 1] + links[i]);
    const bool fixed0 = bc == BoundaryFamily::TwoFixed;
    const bool fixedN = bc != BoundaryFamily::TwoFree;
    s[0] = fixed0 ? 1.5 * links[0] - 0.5 * links[1] : 0.0;
    s[N] = fixedN ? 1.5 * links[N - 1] - 0.5 * links[N - 2] : 0.0;
    return s;
}

inline double max_stable_dt(const ConstrainedState& st, BoundaryFamily bc, const Vec3& g) {
    const auto sigma = link_tension(st, bc, g);
    double smax = 0.0;
    for (double s : sigma) smax = std::max(smax, s);
    return 0.5 * st.eta.grid().spacing() / std::sqrt(smax + 1.0);
}

/// max over links of | |e_j| - rest_j | / h.
inline double constraint_drift(const ConstrainedState& st, BoundaryFamily bc) {
    const auto chain = detail::make_chain(st.eta.grid(), bc, st.rest);
    const auto e = detail::link_vectors(chain, st.eta);
    double d = 0.0;
    for (std::size_t j = 0; j < chain.links; ++j) d = std::max(d, std::abs(e[j].norm() - chain.rest[j]) / chain.h);
    return d;
}

/// max over links of |e_j . (v_b - v_a)| / h^2, the discrete eta_s . eta_st.
inline double orthogonality_defect(const ConstrainedState& st, BoundaryFamily bc) {
    const auto chain = detail::make_chain(st.eta.grid(), bc, st.rest);
    const auto e = detail::link_vectors(chain, st.eta);
    double d = 0.0;
    for (std::size_t j = 0; j < chain.links; ++j) {
        d = std::max(d, std::abs(e[j].dot(st.v[chain.b(j)] - st.v[chain.a(j)])) / (chain.h * chain.h));
    }
    return d;
}

/// One RATTLE step. Pinned nodes stay put; link lengths are restored to
/// roundoff and the velocity is tangent to the constraint manifold.
inline ConstrainedState step_constrained(const ConstrainedState& st, double dt, BoundaryFamily bc, const Vec3& g) {
    st.eta.check_same(st.v);
    if (!(dt > 0.0) || !std::isfinite(dt)) throw StepSizeError("constrained step: dt must be positive", dt, 0.0);
    if (!st.eta.all_finite() || !st.v.all_finite()) throw NumericError("constrained step: non-finite state");
    const Grid1D& grid = st.eta.grid();
    const auto chain = detail::make_chain(grid, bc, st.rest);
    const auto sigma0 = link_tension(st, bc, g);
    double smax = 0.0;
    for (double s : sigma0) smax = std::max(smax, s);
    const double dt_max = 0.5 * grid.spacing() / std::sqrt(smax + 1.0);
    if (dt > dt_max * (1.0 + 1e-9)) {
        throw StepSizeError("constrained step: dt = " + std::to_string(dt) + " exceeds " + std::to_string(dt_max), dt,
                            dt_max);
    }
    const std::size_t L = chain.links;
    const auto e0 = detail::link_vectors(chain, st.eta);
    const double c2 = 0.5 * dt * dt;

    // unconstrained prediction
    Field3 pred(grid);
    for (std::size_t i = 0; i < chain.nodes; ++i) {
        pred[i] = chain.free(i) ? Vec3(st.eta[i] + dt * st.v[i] + c2 * g) : st.eta[i];
    }
    auto positions = [&](const std::vector<double>& lam) {
        Field3 x = pred;
        const auto acc = detail::link_acceleration(chain, lam, e0);
        for (std::size_t i = 0; i < chain.nodes; ++i) x[i] += c2 * acc[i];
        return x;
    };

    // position stage: Newton on |e_j(lambda)|^2 = rest_j^2
    std::vector<double> lam = sigma0;
    Field3 x = positions(lam);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0;; ++it) {
        const auto e1 = detail::link_vectors(chain, x);
        std::vector<double> r(L);
        double rmax = 0.0;
        for (std::size_t j = 0; j < L; ++j) {
            r[j] = (e1[j].squaredNorm() - chain.rest[j] * chain.rest[j]) / (2.0 * chain.h);
            rmax = std::max(rmax, std::abs(r[j]));
        }
        if (rmax <= 1e-15 * chain.h || (rmax <= 1e-11 * chain.h && rmax >= 0.5 * prev)) break;
        if (it >= 50) {
            throw ConstraintError("constrained step: link-length projection did not converge at t = " +
                                      std::to_string(st.t),
                                  st.t);
        }
        prev = rmax;
        // d r_j / d lambda = c2 * e1_j . (d(acc_b - acc_a)/d lambda) / h
        auto m = detail::link_matrix(chain, e1, e0);
        for (std::size_t j = 0; j < L; ++j) {
            m.lower[j] *= c2 / chain.h;
            m.diag[j] *= c2 / chain.h;
            m.upper[j] *= c2 / chain.h;
            r[j] = -r[j];
        }
        const auto dl = detail::solve_links(chain, m, r);
        for (std::size_t j = 0; j < L; ++j) lam[j] += dl[j];
        x = positions(lam);
    }
    detail::sync_periodic(chain, x);

    // half-step velocity and velocity projection
    Field3 vh(grid);
    for (std::size_t i = 0; i < chain.nodes; ++i) vh[i] = chain.free(i) ? Vec3((x[i] - st.eta[i]) / dt) : Vec3::Zero();
    const auto e1 = detail::link_vectors(chain, x);
    auto m = detail::link_matrix(chain, e1, e1);
    std::vector<double> rhs(L);
    const double c1 = 0.5 * dt;
    for (std::size_t j = 0; j < L; ++j) {
        const std::size_t a = chain.a(j), b = chain.b(j);
        const Vec3 dv = vh[b] - vh[a] + c1 * (detail::gravity_at(chain, b, g) - detail::gravity_at(chain, a, g));
        rhs[j] = -e1[j].dot(dv);
        m.lower[j] *= c1;
        m.diag[j] *= c1;
        m.upper[j] *= c1;
    }
    const auto mu = detail::solve_links(chain, m, rhs);
    const auto acc = detail::link_acceleration(chain, mu, e1);
    ConstrainedState out{x, Field3(grid), st.t + dt, chain.rest};
    for (std::size_t i = 0; i < chain.nodes; ++i) {
        out.v[i] = chain.free(i) ? Vec3(vh[i] + c1 * (g + acc[i])) : Vec3::Zero();
    }
    detail::sync_periodic(chain, out.v);
    if (!out.eta.all_finite() || !out.v.all_finite()) throw NumericError("constrained step: non-finite state");
    return out;
}

struct ConstrainedTrajectory {
    std::vector<ConstrainedState> snapshots;
    std::vector<FieldScalar> sigma;  // nodal tension at each snapshot
    DiagnosticsSeries series;        // every step
    std::vector<Violation> warnings;
    BoundaryFamily bc = BoundaryFamily::Whip;
    Vec3 g = Vec3::Zero();
    double energy_drift = 0.0;       // max_t |E(t) - E(0)|
    double sup_kinetic = 0.0;        // sup_t int |v|^2
    double max_orthogonality = 0.0;
    bool flagged() const { return !warnings.empty(); }
};

/// Checks initial data for the constrained solver. Returns warnings (corners:
/// the nodal compatibility residuals fail only next to a fold) and throws
/// ValidationError for anything else.
inline std::vector<Violation> check_constrained_data(const Scenario& sc, const Field3& alpha, const Field3& beta) {
    const Grid1D& grid = alpha.grid();
    std::vector<Violation> errors = scenario_violations(sc, grid);
    std::vector<Violation> warnings;
    const double h = grid.spacing();
    const std::size_t N = grid.last();
    for (std::size_t j = 0; j < N; ++j) {
        const double len = (alpha[j + 1] - alpha[j]).norm() / h;
        if (std::abs(len - 1.0) > 1e-3) errors.push_back({"|alpha_s| = 1", static_cast<std::ptrdiff_t>(j), len});
    }
    std::vector<bool> near_corner(grid.size(), false);
    auto mark = [&](std::size_t i) {
        for (std::size_t k = (i >= 3 ? i - 3 : 0); k <= std::min(N, i + 3); ++k) near_corner[k] = true;
    };
    for (std::size_t i = 1; i < N; ++i) {
        const Vec3 a = alpha[i] - alpha[i - 1];
        const Vec3 b = alpha[i + 1] - alpha[i];
        const double c = a.dot(b) / std::max(1e-300, a.norm() * b.norm());
        if (c < std::cos(0.5)) {
            mark(i);
            warnings.push_back({"corner in alpha (|alpha_s| jumps)", static_cast<std::ptrdiff_t>(i), std::acos(std::clamp(c, -1.0, 1.0))});
        }
    }
    if (grid.size() >= 8) {
        const auto comp = compatibility_residuals(alpha, beta, stencil_for(sc.bc));
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (near_corner[i]) continue;
            if (comp.r1_nodal[i] > 1e-8) errors.push_back({"|alpha_s| = 1", static_cast<std::ptrdiff_t>(i), comp.r1_nodal[i]});
            if (comp.r2_nodal[i] > 1e-8) {
                errors.push_back({"alpha_s . beta_s = 0", static_cast<std::ptrdiff_t>(i), comp.r2_nodal[i]});
            }
        }
    }
    auto pinned = [&](std::size_t i) {
        if (beta[i].norm() > 1e-12) errors.push_back({"beta = 0 at a fixed end", static_cast<std::ptrdiff_t>(i), beta[i].norm()});
    };
    if (sc.bc == BoundaryFamily::Whip || sc.bc == BoundaryFamily::TwoFixed) pinned(N);
    if (sc.bc == BoundaryFamily::TwoFixed) pinned(0);
    if (!errors.empty()) throw ValidationError(std::move(errors));
    return warnings;
}

inline ConstrainedState initial_constrained_state(const Field3& alpha, const Field3& beta, BoundaryFamily bc) {
    const auto chain = detail::make_chain(alpha.grid(), bc, {});
    std::vector<double> rest(chain.links);
    for (std::size_t j = 0; j < chain.links; ++j) rest[j] = (alpha[chain.b(j)] - alpha[chain.a(j)]).norm();
    return {alpha, beta, 0.0, std::move(rest)};
}

/// Integrate a scenario with uniform steps no larger than dt. Aborts with
/// ConstraintError when a link drifts by more than 1e-8 h after projection.
inline ConstrainedTrajectory run_constrained(const Scenario& sc, std::size_t n_nodes, double dt,
                                             std::size_t sample_every = 1) {
    if (sample_every == 0) throw DomainError("sample_every must be >= 1");
    const Grid1D grid(n_nodes);
    const auto data = sample(sc, grid);
    ConstrainedTrajectory tr;
    tr.bc = sc.bc;
    tr.g = sc.g;
    tr.warnings = check_constrained_data(sc, data.alpha, data.beta);
    ConstrainedState st = initial_constrained_state(data.alpha, data.beta, sc.bc);

    const std::size_t steps = sc.horizon > 0.0 ? static_cast<std::size_t>(std::ceil(sc.horizon / dt - 1e-9)) : 0;
    const double step = steps > 0 ? sc.horizon / static_cast<double>(steps) : 0.0;

    auto record = [&](const ConstrainedState& s) {
        const Energies en = conserved_energies(s.eta, s.v, sc.g);
        tr.series.times.push_back(s.t);
        tr.series.K.push_back(en.K);
        tr.series.P.push_back(en.P);
        tr.series.E.push_back(en.E);
        tr.series.E_eps.push_back(en.E);
        tr.series.tension_L1_running.push_back(0.0);
        const double drift = constraint_drift(s, sc.bc);
        tr.series.constraint_drift.push_back(drift);
        tr.series.dissipation_defect.push_back(0.0);
        tr.energy_drift = std::max(tr.energy_drift, std::abs(en.E - tr.series.E.front()));
        tr.sup_kinetic = std::max(tr.sup_kinetic, 2.0 * en.K);
        tr.max_orthogonality = std::max(tr.max_orthogonality, orthogonality_defect(s, sc.bc));
        if (drift > 1e-8) {
            throw ConstraintError("constraint drift " + std::to_string(drift) + " above budget at t = " + std::to_string(s.t),
                                  s.t);
        }
    };
    auto snapshot = [&](const ConstrainedState& s) {
        tr.snapshots.push_back(s);
        tr.sigma.push_back(nodal_tension(link_tension(s, sc.bc, sc.g), grid, sc.bc));
    };
    record(st);
    snapshot(st);
    for (std::size_t k = 1; k <= steps; ++k) {
        st = step_constrained(st, step, sc.bc, sc.g);
        if (k == steps) st.t = sc.horizon;
        record(st);
        if (k % sample_every == 0 || k == steps) snapshot(st);
    }
    return tr;
}

/// A step size satisfying the CFL restriction at t = 0 with a safety margin.
inline double suggested_dt_constrained(const Scenario& sc, std::size_t n_nodes, double safety = 0.25) {
    const Grid1D grid(n_nodes);
    const auto data = sample(sc, grid);
    const auto st = initial_constrained_state(data.alpha, data.beta, sc.bc);
    return safety * max_stable_dt(st, sc.bc, sc.g);
}

}  // namespace whipdyn
