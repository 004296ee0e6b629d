#pragma once

// Integrator for the eps-regularized whip
//   v_t = eps v_ss + (G(tau))_s + g,   tau_t = v_s + eps tau_ss,
//   tau(0) = 0, tau_s(1) = 0, v(1) = 0, v_s(0) = 0.
//
// Time stepping is a discrete-gradient scheme: Crank-Nicolson for v,
// backward Euler for the tau-diffusion, and the Gonzalez discrete gradient of
// the potential Psi (grad Psi = G) for the flux. The first-derivative operator
// is summation-by-parts with respect to the trapezoid weights, so the flux
// coupling cancels in the energy balance and E_eps decreases by exactly
// eps dt sum |v_{i+1} - v_i|^2 / h per step (up to the Newton tolerance).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "whipdyn/diagnostics.hpp"
#include "whipdyn/errors.hpp"
#include "whipdyn/grid.hpp"
#include "whipdyn/maps.hpp"
#include "whipdyn/scenario.hpp"

namespace whipdyn {

struct RegState {
    Field3 v;
    Field3 tau;
    Field3 eta;            // position, trapezoid-in-time integral of v
    double t = 0.0;
    double eps = 0.1;
    double history = 0.0;  // eps int_0^t int grad G(tau) tau_s . tau_s
};

inline Field3 kappa_of(const RegState& st) {
    Field3 k(st.tau.grid());
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = G_eps(st.tau[i], st.eps);
    return k;
}

inline double regularized_energy(const RegState& st, const Vec3& g) {
    return regularized_energy(st.v, st.tau, st.eta, g, st.eps, st.history);
}

/// Largest step accepted by step_regularized for this state:
/// 0.5 h / max(1, sqrt(max eigenvalue of grad G)).
inline double max_stable_dt(const RegState& st) {
    double lam = 0.0;
    for (const auto& tau : st.tau) {
        const Vec3 k = G_eps(tau, st.eps);
        const double q = st.eps + k.squaredNorm();
        lam = std::max({lam, 1.0 / (st.eps + 1.0 / std::sqrt(q)), 1.0 / (st.eps + st.eps / (q * std::sqrt(q)))});
    }
    return 0.5 * st.tau.grid().spacing() / std::max(1.0, std::sqrt(lam));
}

/// A step size that satisfies the restriction for every state (grad G <= 1/eps).
inline double stable_dt_regularized(double eps, const Grid1D& grid) {
    return 0.5 * grid.spacing() * std::min(1.0, std::sqrt(eps)) * (1.0 - 1e-12);
}

namespace detail {

using Mat6 = Eigen::Matrix<double, 6, 6>;

// Block tridiagonal solve, sub[i] couples x[i-1], sup[i] couples x[i+1].
inline std::vector<Vec6> solve_block_tridiagonal(std::vector<Mat6> sub, std::vector<Mat6> diag,
                                                 std::vector<Mat6> sup, std::vector<Vec6> rhs) {
    const std::size_t n = diag.size();
    std::vector<Mat6> cprime(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            diag[i] -= sub[i] * cprime[i - 1];
            rhs[i] -= sub[i] * rhs[i - 1];
        }
        Eigen::PartialPivLU<Mat6> lu(diag[i]);
        if (!(std::abs(lu.determinant()) > 0.0) || !std::isfinite(lu.determinant())) {
            throw SingularSystemError("regularized step: singular block at node " + std::to_string(i));
        }
        if (i + 1 < n) cprime[i] = lu.solve(sup[i]);
        rhs[i] = lu.solve(rhs[i]);
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= cprime[i] * rhs[i + 1];
    return rhs;
}

// Gonzalez discrete gradient of Psi between a and b. For short segments the
// defect Psi(b) - Psi(a) - G(mid).d is integrated by 5-point Gauss-Legendre to
// avoid cancellation.
inline Vec3 discrete_gradient(const Vec3& a, double psi_a, const Vec3& b, double eps) {
    const Vec3 mid = 0.5 * (a + b);
    const Vec3 gm = G_eps(mid, eps);
    const Vec3 d = b - a;
    const double d2 = d.squaredNorm();
    if (d2 == 0.0) return gm;
    double defect;
    if (d2 < 1e-8 * (1.0 + mid.squaredNorm())) {
        static constexpr double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                        0.9061798459386640};
        static constexpr double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                        0.4786286704993665, 0.2369268850561891};
        defect = 0.0;
        for (int q = 0; q < 5; ++q) {
            if (x[q] == 0.0) continue;
            defect += 0.5 * w[q] * (G_eps(mid + 0.5 * x[q] * d, eps) - gm).dot(d);
        }
    } else {
        defect = G_eps_potential(b, eps) - psi_a - gm.dot(d);
    }
    return gm + (defect / d2) * d;
}

// SBP first derivative: central inside, one-sided first order at the ends.
template <class F>
inline Vec3 sbp_derivative(const F& f, std::size_t i, std::size_t N, double h) {
    if (i == 0) return (f(1) - f(0)) / h;
    if (i == N) return (f(N) - f(N - 1)) / h;
    return (f(i + 1) - f(i - 1)) / (2.0 * h);
}

inline double sbp_coef(std::size_t i, std::size_t j, std::size_t N, double h) {
    if (i == 0) return j == 1 ? 1.0 / h : (j == 0 ? -1.0 / h : 0.0);
    if (i == N) return j == N ? 1.0 / h : (j == N - 1 ? -1.0 / h : 0.0);
    if (j == i + 1) return 0.5 / h;
    if (j + 1 == i) return -0.5 / h;
    return 0.0;
}

// Laplacian for v (ghost Neumann at 0, v_N = 0 separately) and for tau
// (tau_0 = 0 separately, ghost Neumann at N).
inline double lap_v_coef(std::size_t i, std::size_t j, double h2) {
    if (i == 0) return j == 0 ? -2.0 / h2 : (j == 1 ? 2.0 / h2 : 0.0);
    if (j == i) return -2.0 / h2;
    if (j == i + 1 || j + 1 == i) return 1.0 / h2;
    return 0.0;
}

inline double lap_tau_coef(std::size_t i, std::size_t j, std::size_t N, double h2) {
    if (i == N) return j == N ? -2.0 / h2 : (j == N - 1 ? 2.0 / h2 : 0.0);
    if (j == i) return -2.0 / h2;
    if (j == i + 1 || j + 1 == i) return 1.0 / h2;
    return 0.0;
}

inline void check_finite_state(const Field3& v, const Field3& tau, double t) {
    constexpr double kBlowUp = 1e12;
    if (!v.all_finite() || !tau.all_finite()) throw NumericError("regularized step: non-finite state at t = " + std::to_string(t));
    if (v.max_norm() > kBlowUp || tau.max_norm() > kBlowUp) {
        throw DivergenceError("regularized solution exceeded 1e12 at t = " + std::to_string(t), t);
    }
}

// Residual and (approximate) Jacobian of one step. With `steady` the time
// derivative terms are dropped and exact G replaces the discrete gradient.
struct RegSystem {
    const Field3& v0;
    const Field3& tau0;
    const std::vector<double>& psi0;
    double dt;
    double eps;
    Vec3 g;
    bool steady = false;

    std::size_t N() const { return v0.size() - 1; }

    void flux(const std::vector<Vec3>& tau, std::vector<Vec3>& gbar, std::vector<Mat3>& jac) const {
        const std::size_t n = tau.size();
        gbar.resize(n);
        jac.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (steady) {
                const Vec3 k = G_eps(tau[i], eps);
                gbar[i] = k;
                jac[i] = G_eps_jacobian_at(k, eps);
            } else {
                gbar[i] = discrete_gradient(tau0[i], psi0[i], tau[i], eps);
                jac[i] = 0.5 * G_eps_jacobian(0.5 * (tau0[i] + tau[i]), eps);
            }
        }
    }

    // x[i] = (v_i, tau_i)
    std::vector<Vec6> residual(const std::vector<Vec6>& x, std::vector<Vec3>& gbar, std::vector<Mat3>& jac) const {
        const std::size_t n = x.size();
        const std::size_t last = N();
        const double h = v0.grid().spacing();
        const double h2 = h * h;
        std::vector<Vec3> vb(n), tau(n);
        for (std::size_t i = 0; i < n; ++i) {
            tau[i] = x[i].tail<3>();
            vb[i] = steady ? Vec3(x[i].head<3>()) : Vec3(0.5 * (v0[i] + x[i].head<3>()));
        }
        flux(tau, gbar, jac);
        auto gb = [&](std::size_t j) { return gbar[j]; };
        auto vv = [&](std::size_t j) { return vb[j]; };
        std::vector<Vec6> r(n);
        for (std::size_t i = 0; i < n; ++i) {
            Vec3 rv, rt;
            if (i == last) {
                rv = x[i].head<3>();
            } else {
                Vec3 lap = Vec3::Zero();
                for (std::size_t j = (i == 0 ? 0 : i - 1); j <= i + 1; ++j) lap += lap_v_coef(i, j, h2) * vb[j];
                const Vec3 drive = eps * lap + sbp_derivative(gb, i, last, h) + g;
                rv = steady ? Vec3(-drive) : Vec3(x[i].head<3>() - v0[i] - dt * drive);
            }
            if (i == 0) {
                rt = x[i].tail<3>();
            } else {
                Vec3 lap = Vec3::Zero();
                for (std::size_t j = i - 1; j <= std::min(i + 1, last); ++j) lap += lap_tau_coef(i, j, last, h2) * tau[j];
                const Vec3 drive = sbp_derivative(vv, i, last, h) + eps * lap;
                rt = steady ? Vec3(-drive) : Vec3(x[i].tail<3>() - tau0[i] - dt * drive);
            }
            r[i] << rv, rt;
        }
        return r;
    }

    std::vector<Vec6> newton_update(const std::vector<Vec6>& r, const std::vector<Mat3>& jac) const {
        const std::size_t n = r.size();
        const std::size_t last = N();
        const double h = v0.grid().spacing();
        const double h2 = h * h;
        const double a = steady ? 1.0 : dt;        // scale of the drive terms
        const double half = steady ? 1.0 : 0.5;    // d vbar / d v
        const double id = steady ? 0.0 : 1.0;
        std::vector<Mat6> sub(n, Mat6::Zero()), dia(n, Mat6::Zero()), sup(n, Mat6::Zero());
        auto block = [&](std::size_t i, std::size_t j) -> Mat6& {
            return j == i ? dia[i] : (j < i ? sub[i] : sup[i]);
        };
        const Mat3 I = Mat3::Identity();
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t jlo = i == 0 ? 0 : i - 1;
            const std::size_t jhi = std::min(i + 1, last);
            for (std::size_t j = jlo; j <= jhi; ++j) {
                Mat6& B = block(i, j);
                if (i == last) {
                    if (j == i) B.topLeftCorner<3, 3>() = I;
                } else {
                    B.topLeftCorner<3, 3>() = (id * (i == j ? 1.0 : 0.0) - a * eps * half * lap_v_coef(i, j, h2)) * I;
                    B.topRightCorner<3, 3>() = -a * sbp_coef(i, j, last, h) * jac[j];
                }
                if (i == 0) {
                    if (j == i) B.bottomRightCorner<3, 3>() = I;
                } else {
                    B.bottomLeftCorner<3, 3>() = (-a * half * sbp_coef(i, j, last, h)) * I;
                    B.bottomRightCorner<3, 3>() =
                        (id * (i == j ? 1.0 : 0.0) - a * eps * lap_tau_coef(i, j, last, h2)) * I;
                }
            }
        }
        std::vector<Vec6> rhs(n);
        for (std::size_t i = 0; i < n; ++i) rhs[i] = -r[i];
        return solve_block_tridiagonal(std::move(sub), std::move(dia), std::move(sup), std::move(rhs));
    }
};

inline double max_abs(const std::vector<Vec6>& r) {
    double m = 0.0;
    for (const auto& x : r) m = std::max(m, x.cwiseAbs().maxCoeff());
    return m;
}

}  // namespace detail

struct RegStepOptions {
    double newton_tol = 1e-13;
    int max_newton = 60;
};

/// One step of size dt under gravity g. Boundary rows are exact. Throws
/// StepSizeError when dt exceeds max_stable_dt(state).
inline RegState step_regularized(const RegState& st, double dt, const Vec3& g, const RegStepOptions& opt = {}) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw StepSizeError("regularized step: dt must be positive", dt, 0.0);
    st.v.check_same(st.tau);
    st.v.check_same(st.eta);
    detail::check_finite_state(st.v, st.tau, st.t);
    const double dt_max = max_stable_dt(st);
    if (dt > dt_max * (1.0 + 1e-9)) {
        throw StepSizeError("regularized step: dt = " + std::to_string(dt) + " exceeds " + std::to_string(dt_max), dt,
                            dt_max);
    }
    const Grid1D& grid = st.v.grid();
    const std::size_t n = grid.size();
    const std::size_t N = grid.last();
    const double h = grid.spacing();
    std::vector<double> psi0(n);
    for (std::size_t i = 0; i < n; ++i) psi0[i] = G_eps_potential(st.tau[i], st.eps);

    detail::RegSystem sys{st.v, st.tau, psi0, dt, st.eps, g, false};
    std::vector<Vec6> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] << st.v[i], st.tau[i];
    x[N].head<3>().setZero();
    x[0].tail<3>().setZero();

    double scale = 1.0;
    for (const auto& xi : x) scale = std::max(scale, xi.cwiseAbs().maxCoeff());
    std::vector<Vec3> gbar;
    std::vector<Mat3> jac;
    auto r = sys.residual(x, gbar, jac);
    int it = 0;
    double r_prev = detail::max_abs(r);
    for (; it < opt.max_newton; ++it) {
        if (detail::max_abs(r) <= opt.newton_tol * scale) break;
        const auto dx = sys.newton_update(r, jac);
        for (std::size_t i = 0; i < n; ++i) x[i] += dx[i];
        r = sys.residual(x, gbar, jac);
        if (!std::isfinite(detail::max_abs(r))) throw NumericError("regularized step: Newton produced non-finite values");
        // converged to roundoff: tiny residual that no longer contracts
        const double rn = detail::max_abs(r);
        if (detail::max_abs(dx) <= 1e-15 * scale || (rn <= 1e-10 * scale && rn > 0.5 * r_prev)) break;
        r_prev = rn;
    }
    if (it == opt.max_newton) {
        throw NumericError("regularized step: Newton did not converge at t = " + std::to_string(st.t) +
                           " (residual " + std::to_string(detail::max_abs(r)) + ")");
    }

    RegState out{Field3(grid), Field3(grid), st.eta, st.t + dt, st.eps, st.history};
    for (std::size_t i = 0; i < n; ++i) {
        out.v[i] = x[i].head<3>();
        out.tau[i] = x[i].tail<3>();
    }
    out.v[N].setZero();
    out.tau[0].setZero();
    // history: eps dt sum (Gbar_{i+1} - Gbar_i) . (tau_{i+1} - tau_i) / h
    double hist = 0.0;
    for (std::size_t i = 0; i < N; ++i) hist += (gbar[i + 1] - gbar[i]).dot(out.tau[i + 1] - out.tau[i]);
    out.history += st.eps * dt * hist / h;
    for (std::size_t i = 0; i < n; ++i) out.eta[i] += 0.5 * dt * (st.v[i] + out.v[i]);
    detail::check_finite_state(out.v, out.tau, out.t);
    return out;
}

/// Initial state from scenario data: tau = alpha_s (tau(0) = 0), v = beta
/// (v(1) = 0), eta = alpha.
inline RegState initial_reg_state(const Field3& alpha, const Field3& beta, double eps) {
    if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("regularized solver needs eps in (0,1]");
    alpha.check_same(beta);
    RegState st{beta, derivative_s(alpha), alpha, 0.0, eps, 0.0};
    st.tau[0].setZero();
    st.v[st.v.grid().last()].setZero();
    return st;
}

struct RegTrajectory {
    std::vector<RegState> snapshots;  // strictly increasing times
    std::vector<Field3> kappa_history;
    std::vector<Field3> phi_history;  // int_0^t kappa, accumulated every step
    DiagnosticsSeries series;         // every step
    Vec3 g = Vec3::Zero();
    bool energy_monotone = true;
    double max_energy_increase = 0.0;  // max of E_eps(k+1) - E_eps(k) relative to 1 + |E_eps(k)|
    double sup_kinetic = 0.0;          // sup_t int |v|^2
    double tension_l1 = 0.0;           // int int |kappa|

    std::vector<double> times() const {
        std::vector<double> t;
        for (const auto& s : snapshots) t.push_back(s.t);
        return t;
    }
};

inline std::string reg_family_error(BoundaryFamily bc) {
    return "the regularized solver implements the whip family only (got " + to_string(bc) +
           "); use the constrained solver for this scenario";
}

/// Integrate from an arbitrary whip state to time `horizon` (same stepping
/// and recording as run_regularized).
inline RegTrajectory run_regularized_from(RegState st, const Vec3& g, double horizon, double dt,
                                          std::size_t sample_every = 1) {
    if (sample_every == 0) throw DomainError("sample_every must be >= 1");
    if (!(horizon >= 0.0)) throw DomainError("horizon must be >= 0");
    if (!(dt > 0.0)) throw StepSizeError("dt must be positive", dt, stable_dt_regularized(st.eps, st.v.grid()));
    const Grid1D grid = st.v.grid();
    const double eps = st.eps;
    RegTrajectory tr;
    tr.g = g;
    const std::size_t steps = horizon > 0.0 ? static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9)) : 0;
    const double step = steps > 0 ? horizon / static_cast<double>(steps) : 0.0;

    auto kappa_l1 = [&](const Field3& k) { return integrate_nodes(grid, [&](std::size_t i) { return k[i].norm(); }); };
    Field3 kappa = kappa_of(st);
    double l1_prev = kappa_l1(kappa);
    double e_prev = regularized_energy(st, g);
    double diss_prev = velocity_gradient_sq(st.v);

    auto record = [&](const RegState& s, double e_eps, double defect) {
        const Energies en = conserved_energies(s.eta, s.v, g);
        tr.series.times.push_back(s.t);
        tr.series.K.push_back(en.K);
        tr.series.P.push_back(en.P);
        tr.series.E.push_back(en.E);
        tr.series.E_eps.push_back(e_eps);
        tr.series.tension_L1_running.push_back(tr.tension_l1);
        double drift = 0.0;
        for (std::size_t i = 0; i + 1 < s.eta.size(); ++i) {
            drift = std::max(drift, std::abs((s.eta[i + 1] - s.eta[i]).norm() / grid.spacing() - 1.0));
        }
        tr.series.constraint_drift.push_back(drift);
        tr.series.dissipation_defect.push_back(defect);
        tr.sup_kinetic = std::max(tr.sup_kinetic, 2.0 * en.K);
    };
    Field3 phi(grid);
    record(st, e_prev, 0.0);
    tr.snapshots.push_back(st);
    tr.kappa_history.push_back(kappa);
    tr.phi_history.push_back(phi);

    for (std::size_t k = 1; k <= steps; ++k) {
        RegState next = step_regularized(st, step, g);
        if (k == steps) next.t = horizon;
        const Field3 kappa_next = kappa_of(next);
        for (std::size_t i = 0; i < phi.size(); ++i) phi[i] += 0.5 * step * (kappa[i] + kappa_next[i]);
        kappa = kappa_next;
        const double l1 = kappa_l1(kappa);
        tr.tension_l1 += 0.5 * step * (l1_prev + l1);
        l1_prev = l1;
        const double e = regularized_energy(next, g);
        const double increase = (e - e_prev) / (1.0 + std::abs(e_prev));
        tr.max_energy_increase = std::max(tr.max_energy_increase, increase);
        if (increase > 1e-8) tr.energy_monotone = false;
        const double defect = std::abs((e - e_prev) / step + eps * diss_prev);
        record(next, e, defect);
        e_prev = e;
        diss_prev = velocity_gradient_sq(next.v);
        st = std::move(next);
        if (k % sample_every == 0 || k == steps) {
            tr.snapshots.push_back(st);
            tr.kappa_history.push_back(kappa);
            tr.phi_history.push_back(phi);
        }
    }
    return tr;
}

/// Integrate a whip scenario to its horizon with uniform steps no larger than
/// dt; snapshots every sample_every steps plus the final state.
inline RegTrajectory run_regularized(const Scenario& sc, double eps, std::size_t n_nodes, double dt,
                                     std::size_t sample_every = 1) {
    if (sc.bc != BoundaryFamily::Whip) throw DomainError(reg_family_error(sc.bc));
    if (sample_every == 0) throw DomainError("sample_every must be >= 1");
    const Grid1D grid(n_nodes);
    validate(sc, grid);
    const auto data = sample(sc, grid);
    return run_regularized_from(initial_reg_state(data.alpha, data.beta, eps), sc.g, sc.horizon, dt, sample_every);
}

/// Discrete steady state of the regularized whip under gravity g:
/// eps L v + D G(tau) + g = 0, D v + eps L tau = 0 with the boundary rows.
/// Newton from v = 0, kappa = -g s.
inline RegState steady_state(double eps, const Grid1D& grid, const Vec3& g, const Field3* eta = nullptr) {
    if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("steady_state: eps must lie in (0,1]");
    const std::size_t n = grid.size();
    Field3 zero(grid);
    std::vector<double> psi0(n, 0.0);
    detail::RegSystem sys{zero, zero, psi0, 1.0, eps, g, true};
    std::vector<Vec6> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] << Vec3::Zero(), G_eps_inverse(Vec3(-g * grid.node(i)), eps);
    }
    std::vector<Vec3> gbar;
    std::vector<Mat3> jac;
    auto r = sys.residual(x, gbar, jac);
    double rn = detail::max_abs(r);
    const double tol = 1e-12 * (1.0 + g.norm());
    int it = 0;
    for (; it < 200 && rn > tol; ++it) {
        const auto dx = sys.newton_update(r, jac);
        double lambda = 1.0;
        for (int ls = 0; ls < 40; ++ls, lambda *= 0.5) {
            std::vector<Vec6> trial(x);
            for (std::size_t i = 0; i < n; ++i) trial[i] += lambda * dx[i];
            std::vector<Vec3> gb2;
            std::vector<Mat3> jac2;
            auto r2 = sys.residual(trial, gb2, jac2);
            const double rn2 = detail::max_abs(r2);
            if (std::isfinite(rn2) && (rn2 < rn || ls == 39)) {
                x = std::move(trial);
                r = std::move(r2);
                gbar = std::move(gb2);
                jac = std::move(jac2);
                rn = rn2;
                break;
            }
        }
    }
    if (rn > 1e-9 * (1.0 + g.norm())) throw NumericError("steady_state: Newton did not converge");
    RegState st{Field3(grid), Field3(grid), eta ? *eta : Field3(grid), 0.0, eps, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        st.v[i] = x[i].head<3>();
        st.tau[i] = x[i].tail<3>();
    }
    st.v[grid.last()].setZero();
    st.tau[0].setZero();
    return st;
}

/// eta(t_k) = alpha + trapezoid-in-time integral of the retained velocities.
inline std::vector<Field3> reconstruct_eta(const RegTrajectory& tr, const Field3& alpha) {
    if (tr.snapshots.empty()) throw SizeError("reconstruct_eta: empty velocity history");
    std::vector<Field3> out;
    Field3 eta = alpha;
    out.push_back(eta);
    for (std::size_t k = 1; k < tr.snapshots.size(); ++k) {
        const double dt = tr.snapshots[k].t - tr.snapshots[k - 1].t;
        for (std::size_t i = 0; i < eta.size(); ++i) {
            eta[i] += 0.5 * dt * (tr.snapshots[k - 1].v[i] + tr.snapshots[k].v[i]);
        }
        out.push_back(eta);
    }
    return out;
}

/// max_k || v(t_k) - (phi_s + g t_k + beta) ||_L2 with phi = int_0^t kappa,
/// taken from the per-step accumulator when present and otherwise by
/// trapezoid over the retained snapshots.
inline double velocity_potential_check(const RegTrajectory& tr, const Field3& beta, const Vec3& g) {
    if (tr.snapshots.empty()) return 0.0;
    const Grid1D& grid = beta.grid();
    const bool online = tr.phi_history.size() == tr.snapshots.size();
    Field3 phi(grid);
    double worst = 0.0;
    for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
        if (online) {
            phi = tr.phi_history[k];
        } else if (k > 0) {
            const double dt = tr.snapshots[k].t - tr.snapshots[k - 1].t;
            for (std::size_t i = 0; i < phi.size(); ++i) {
                phi[i] += 0.5 * dt * (tr.kappa_history[k - 1][i] + tr.kappa_history[k][i]);
            }
        }
        const Field3 phi_s = derivative_s(phi);
        const double t = tr.snapshots[k].t;
        const double r2 = integrate_nodes(grid, [&](std::size_t i) {
            return (tr.snapshots[k].v[i] - phi_s[i] - g * t - beta[i]).squaredNorm();
        });
        worst = std::max(worst, std::sqrt(r2));
    }
    return worst;
}

}  // namespace whipdyn
