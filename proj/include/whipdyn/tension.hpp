#pragma once

// Tension two-point boundary value problem
//   sigma_ss - |eta_ss|^2 sigma + |eta_st|^2 = 0
// with the closure of each boundary family, second-order ghost-node rows for
// Neumann ends, and the non-negativity check.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "whipdyn/errors.hpp"
#include "whipdyn/grid.hpp"

namespace whipdyn {

enum class BoundaryFamily { TwoFixed, TwoFree, Periodic, Whip };

inline std::string to_string(BoundaryFamily bc) {
    switch (bc) {
        case BoundaryFamily::TwoFixed: return "two_fixed";
        case BoundaryFamily::TwoFree: return "two_free";
        case BoundaryFamily::Periodic: return "periodic";
        case BoundaryFamily::Whip: return "whip";
    }
    return "unknown";
}

inline std::optional<BoundaryFamily> parse_boundary_family(const std::string& name) {
    if (name == "two_fixed") return BoundaryFamily::TwoFixed;
    if (name == "two_free") return BoundaryFamily::TwoFree;
    if (name == "periodic") return BoundaryFamily::Periodic;
    if (name == "whip") return BoundaryFamily::Whip;
    return std::nullopt;
}

inline Stencil stencil_for(BoundaryFamily bc) {
    return bc == BoundaryFamily::Periodic ? Stencil::Periodic : Stencil::OneSided;
}

struct TensionProblem {
    FieldScalar eta_ss_sq;  // |eta_ss|^2
    FieldScalar eta_st_sq;  // |eta_st|^2
    BoundaryFamily bc = BoundaryFamily::Whip;
    Vec3 g = Vec3::Zero();
    std::array<Vec3, 2> eta_s_ends{Vec3::Zero(), Vec3::Zero()};  // tangents at s = 0 and s = 1
};

namespace detail {

// Tridiagonal system scaled by h^2. For the periodic family only the n-1
// distinct nodes are unknowns.
struct TensionSystem {
    std::vector<double> lower, diag, upper, rhs;
    bool cyclic = false;
};

inline TensionSystem assemble_tension(const TensionProblem& p) {
    const Grid1D& grid = p.eta_ss_sq.grid();
    if (!(grid == p.eta_st_sq.grid())) throw SizeError("solve_tension: coefficient fields on different grids");
    const std::size_t n = grid.size();
    const std::size_t N = n - 1;
    const double h = grid.spacing();
    const double h2 = h * h;

    TensionSystem sys;
    const std::size_t m = p.bc == BoundaryFamily::Periodic ? N : n;
    sys.lower.assign(m, 0.0);
    sys.diag.assign(m, 0.0);
    sys.upper.assign(m, 0.0);
    sys.rhs.assign(m, 0.0);
    sys.cyclic = p.bc == BoundaryFamily::Periodic;

    for (std::size_t i = 0; i < m; ++i) {
        sys.lower[i] = 1.0;
        sys.upper[i] = 1.0;
        sys.diag[i] = -(2.0 + h2 * p.eta_ss_sq[i]);
        sys.rhs[i] = -h2 * p.eta_st_sq[i];
    }
    if (sys.cyclic) return sys;

    // Neumann data sigma_s = -g . eta_s at a fixed end
    const double q0 = -p.g.dot(p.eta_s_ends[0]);
    const double q1 = -p.g.dot(p.eta_s_ends[1]);

    auto dirichlet = [&](std::size_t i) {
        sys.lower[i] = 0.0;
        sys.upper[i] = 0.0;
        sys.diag[i] = 1.0;
        sys.rhs[i] = 0.0;
    };
    switch (p.bc) {
        case BoundaryFamily::TwoFree:
            dirichlet(0);
            dirichlet(N);
            break;
        case BoundaryFamily::Whip:
            dirichlet(0);
            sys.lower[N] = 2.0;
            sys.rhs[N] -= 2.0 * h * q1;
            break;
        case BoundaryFamily::TwoFixed:
            sys.upper[0] = 2.0;
            sys.rhs[0] += 2.0 * h * q0;
            sys.lower[N] = 2.0;
            sys.rhs[N] -= 2.0 * h * q1;
            break;
        case BoundaryFamily::Periodic: break;
    }
    return sys;
}

}  // namespace detail

/// max |A sigma - b|_inf / (|b|_inf + |A|_inf |sigma|_inf) for the assembled
/// (h^2-scaled) discrete problem.
inline double tension_residual(const TensionProblem& p, const FieldScalar& sigma) {
    const auto sys = detail::assemble_tension(p);
    std::vector<double> x(sigma.values().begin(), sigma.values().begin() + static_cast<std::ptrdiff_t>(sys.diag.size()));
    const auto ax = tridiagonal_multiply(sys.lower, sys.diag, sys.upper, x, sys.cyclic);
    double r = 0.0, b = 0.0, a = 0.0, xm = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i) {
        r = std::max(r, std::abs(ax[i] - sys.rhs[i]));
        b = std::max(b, std::abs(sys.rhs[i]));
        a = std::max(a, std::abs(sys.lower[i]) + std::abs(sys.diag[i]) + std::abs(sys.upper[i]));
        xm = std::max(xm, std::abs(x[i]));
    }
    const double scale = b + a * xm;
    return scale > 0.0 ? r / scale : r;
}

/// Discrete tension for the given curvature/stretch-rate data and boundary
/// family. A pure-Neumann or periodic problem on a straight string
/// (|eta_ss|^2 == 0) is singular; the constant null direction is reported.
inline FieldScalar solve_tension(const TensionProblem& p, const Grid1D& grid) {
    if (!(p.eta_ss_sq.grid() == grid) || !(p.eta_st_sq.grid() == grid)) {
        throw SizeError("solve_tension: coefficient fields do not match the grid");
    }
    const std::size_t n = grid.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!(p.eta_ss_sq[i] >= 0.0) || !(p.eta_st_sq[i] >= 0.0)) {
            throw DomainError("solve_tension: squared coefficient fields must be non-negative and finite");
        }
    }
    const bool neumann_only = p.bc == BoundaryFamily::TwoFixed || p.bc == BoundaryFamily::Periodic;
    if (neumann_only) {
        const double h2 = grid.spacing() * grid.spacing();
        const double amax = p.eta_ss_sq.max_norm();
        if (amax * h2 <= 1e-14) {
            throw SingularSystemError("solve_tension: straight string under " + to_string(p.bc) +
                                          " leaves the tension determined only up to a constant",
                                      std::vector<double>(n, 1.0 / std::sqrt(static_cast<double>(n))));
        }
    }
    const auto sys = detail::assemble_tension(p);
    std::vector<double> x;
    try {
        x = sys.cyclic ? solve_cyclic_tridiagonal(sys.lower, sys.diag, sys.upper, sys.rhs)
                       : solve_tridiagonal(sys.lower, sys.diag, sys.upper, sys.rhs);
    } catch (const SingularSystemError& e) {
        if (neumann_only) {
            throw SingularSystemError(std::string(e.what()) + " (nearly straight string)",
                                      std::vector<double>(n, 1.0 / std::sqrt(static_cast<double>(n))));
        }
        throw;
    }
    if (sys.cyclic) x.push_back(x.front());
    FieldScalar sigma(grid, std::move(x));
    if (!sigma.all_finite()) throw NumericError("solve_tension: non-finite tension");
    return sigma;
}

/// Tension at t = 0 from the initial position alpha and velocity beta.
inline FieldScalar initial_tension(const Field3& alpha, const Field3& beta, BoundaryFamily bc, const Vec3& g) {
    alpha.check_same(beta);
    const Grid1D& grid = alpha.grid();
    const Stencil st = stencil_for(bc);
    const Field3 a_s = derivative_s(alpha, st);
    const Field3 a_ss = second_derivative_s(alpha, st);
    const Field3 b_s = derivative_s(beta, st);
    TensionProblem p{FieldScalar(grid), FieldScalar(grid), bc, g, {a_s[0], a_s[grid.last()]}};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        p.eta_ss_sq[i] = a_ss[i].squaredNorm();
        p.eta_st_sq[i] = b_s[i].squaredNorm();
    }
    return solve_tension(p, grid);
}

struct NonnegativityReport {
    bool nonnegative = true;
    std::size_t argmin = 0;
    double min_value = 0.0;
    double s_at_min = 0.0;
};

inline double default_nonnegativity_tol(const FieldScalar& sigma) { return 1e-8 * (1.0 + sigma.max_norm()); }

/// True iff min sigma >= -tol.
inline NonnegativityReport check_nonnegativity(const FieldScalar& sigma, double tol) {
    NonnegativityReport r;
    const auto it = std::min_element(sigma.begin(), sigma.end());
    r.argmin = static_cast<std::size_t>(std::distance(sigma.begin(), it));
    r.min_value = *it;
    r.s_at_min = sigma.grid().node(r.argmin);
    r.nonnegative = r.min_value >= -tol;
    return r;
}

inline NonnegativityReport check_nonnegativity(const FieldScalar& sigma) {
    return check_nonnegativity(sigma, default_nonnegativity_tol(sigma));
}

}  // namespace whipdyn
