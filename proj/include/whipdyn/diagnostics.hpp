#pragma once

// Scalar functionals along trajectories: conserved energies, the regularized
// energy, the space-time tension norm, data compatibility residuals and the
// kinetic-energy envelope.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "whipdyn/errors.hpp"
#include "whipdyn/grid.hpp"
#include "whipdyn/maps.hpp"

namespace whipdyn {

struct Energies {
    double K = 0.0;
    double P = 0.0;
    double E = 0.0;
};

/// K = 1/2 int |v|^2, P = -int g.eta (trapezoid), E = K + P.
inline Energies conserved_energies(const Field3& eta, const Field3& v, const Vec3& g) {
    eta.check_same(v);
    const Grid1D& grid = eta.grid();
    Energies e;
    e.K = 0.5 * integrate_nodes(grid, [&](std::size_t i) { return v[i].squaredNorm(); });
    e.P = -integrate_nodes(grid, [&](std::size_t i) { return g.dot(eta[i]); });
    e.E = e.K + e.P;
    return e;
}

/// int Psi(tau) with Psi the convex potential of G_eps,
/// = (eps/2) int |kappa|^2 + sqrt(eps) - eps int (eps + |kappa|^2)^{-1/2}.
inline double potential_energy_eps(const Field3& tau, double eps) {
    return integrate_nodes(tau.grid(), [&](std::size_t i) { return G_eps_potential(tau[i], eps); });
}

/// E_eps = 1/2 int|v|^2 - int g.eta + int Psi(tau) + history, where history
/// is the running value of eps int int grad G(tau) tau_s . tau_s.
inline double regularized_energy(const Field3& v, const Field3& tau, const Field3& eta, const Vec3& g, double eps,
                                 double history) {
    const Energies e = conserved_energies(eta, v, g);
    return e.E + potential_energy_eps(tau, eps) + history;
}

/// int |v_s|^2 with one-sided link differences, sum |v_{i+1} - v_i|^2 / h.
inline double velocity_gradient_sq(const Field3& v) {
    const double h = v.grid().spacing();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) acc += (v[i + 1] - v[i]).squaredNorm();
    return acc / h;
}

/// Space-time trapezoid of |kappa| over snapshots at the given times.
inline double tension_l1(const std::vector<double>& times, const std::vector<Field3>& kappa) {
    if (kappa.empty() || times.size() != kappa.size()) throw SizeError("tension_l1: needs >= 1 aligned snapshot");
    std::vector<double> slice(kappa.size());
    for (std::size_t k = 0; k < kappa.size(); ++k) {
        slice[k] = integrate_nodes(kappa[k].grid(), [&](std::size_t i) { return kappa[k][i].norm(); });
    }
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < slice.size(); ++k) acc += 0.5 * (times[k + 1] - times[k]) * (slice[k] + slice[k + 1]);
    return acc;
}

namespace detail {

// Fornberg weights for the first derivative at x0 from nodes x.
inline std::vector<double> fd_weights(double x0, const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::vector<double>> c(n, std::vector<double>(2, 0.0));
    double c1 = 1.0;
    double c4 = x[0] - x0;
    c[0][0] = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t mn = std::min<std::size_t>(i, 1);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - x0;
        for (std::size_t j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (std::size_t k = mn; k >= 1; --k) c[i][k] = c1 * (double(k) * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (std::size_t k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - double(k) * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = c[i][1];
    return w;
}

}  // namespace detail

/// Sixth-order first derivative (7-point stencils, shifted near the ends or
/// wrapped for periodic data). Needs at least 7 nodes.
inline Field3 derivative_s_high_order(const Field3& f, Stencil stencil) {
    const std::size_t n = f.size();
    if (n < 8) throw SizeError("derivative_s_high_order needs at least 8 nodes");
    const double h = f.grid().spacing();
    Field3 d(f.grid());
    if (stencil == Stencil::Periodic) {
        const auto w = detail::fd_weights(0.0, {-3, -2, -1, 0, 1, 2, 3});
        const std::size_t period = n - 1;
        for (std::size_t i = 0; i < period; ++i) {
            Vec3 acc = Vec3::Zero();
            for (int k = -3; k <= 3; ++k) acc += w[k + 3] * f[detail::wrap(static_cast<std::ptrdiff_t>(i) + k, period)];
            d[i] = acc / h;
        }
        d[n - 1] = d[0];
        return d;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t start = std::min(i < 3 ? 0 : i - 3, n - 7);
        std::vector<double> x(7);
        for (std::size_t k = 0; k < 7; ++k) x[k] = static_cast<double>(start + k);
        const auto w = detail::fd_weights(static_cast<double>(i), x);
        Vec3 acc = Vec3::Zero();
        for (std::size_t k = 0; k < 7; ++k) acc += w[k] * f[start + k];
        d[i] = acc / h;
    }
    return d;
}

struct CompatibilityResiduals {
    double r1 = 0.0;  // max | |alpha_s| - 1 |
    double r2 = 0.0;  // max |alpha_s . beta_s|
    std::size_t node_r1 = 0;
    std::size_t node_r2 = 0;
    std::vector<double> r1_nodal;
    std::vector<double> r2_nodal;
};

/// Residuals of the two necessary conditions on initial data, |alpha_s| = 1
/// and alpha_s . beta_s = 0, evaluated with sixth-order differences.
inline CompatibilityResiduals compatibility_residuals(const Field3& alpha, const Field3& beta,
                                                      Stencil stencil = Stencil::OneSided) {
    alpha.check_same(beta);
    const Field3 as = derivative_s_high_order(alpha, stencil);
    const Field3 bs = derivative_s_high_order(beta, stencil);
    CompatibilityResiduals r;
    r.r1_nodal.resize(alpha.size());
    r.r2_nodal.resize(alpha.size());
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        r.r1_nodal[i] = std::abs(as[i].norm() - 1.0);
        r.r2_nodal[i] = std::abs(as[i].dot(bs[i]));
        if (r.r1_nodal[i] > r.r1) {
            r.r1 = r.r1_nodal[i];
            r.node_r1 = i;
        }
        if (r.r2_nodal[i] > r.r2) {
            r.r2 = r.r2_nodal[i];
            r.node_r2 = i;
        }
    }
    return r;
}

/// Kinetic envelope for one fixed end: d/dt int|v|^2 = 2 int g.v gives
/// int|v|^2(t) <= e^t (2 K(0) + |g|^2 t).
inline double kinetic_envelope(double K0, const Vec3& g, double t) {
    return std::exp(t) * (2.0 * K0 + g.squaredNorm() * t);
}

/// Scalar series sampled along a trajectory; every array aligned with times.
struct DiagnosticsSeries {
    std::vector<double> times;
    std::vector<double> K, P, E;
    std::vector<double> E_eps;
    std::vector<double> tension_L1_running;
    std::vector<double> constraint_drift;
    std::vector<double> dissipation_defect;

    std::size_t size() const noexcept { return times.size(); }
    bool aligned() const noexcept {
        const std::size_t n = times.size();
        return K.size() == n && P.size() == n && E.size() == n && E_eps.size() == n &&
               tension_L1_running.size() == n && constraint_drift.size() == n && dissipation_defect.size() == n;
    }
    double drift() const {
        double d = 0.0;
        for (double e : E) d = std::max(d, std::abs(e - E.front()));
        return d;
    }
};

}  // namespace whipdyn
