#pragma once

// Pointwise constitutive maps of the string model: the radial inverses
// h0^{-1}, h_eps^{-1}, the maps H0, H0*, H_eps, H_eps*, the discontinuity-free
// map M, the regularized flux inverse G_eps with its Jacobian and potential,
// and the fluxes A, B, D together with the recession function of B.

#include <cmath>
#include <limits>
#include <string>

#include "whipdyn/errors.hpp"
#include "whipdyn/grid.hpp"

namespace whipdyn {

/// Regularization parameter: 0 selects the limit maps, otherwise (0, 1].
class Eps {
public:
    explicit Eps(double value) : value_(value) {
        if (!(value == 0.0 || (value > 0.0 && value <= 1.0))) {
            throw DomainError("regularization parameter must be 0 or in (0,1], got " + std::to_string(value));
        }
    }
    double value() const noexcept { return value_; }
    bool is_limit() const noexcept { return value_ == 0.0; }

private:
    double value_;
};

/// gamma = (v, w) in R^6.
struct Gamma {
    Vec3 v = Vec3::Zero();
    Vec3 w = Vec3::Zero();

    Vec6 stacked() const {
        Vec6 x;
        x << v, w;
        return x;
    }
    static Gamma from(const Vec6& x) { return {x.head<3>(), x.tail<3>()}; }
};

inline Vec6 stack(const Vec3& a, const Vec3& b) {
    Vec6 x;
    x << a, b;
    return x;
}

namespace detail {

constexpr double kTinyNorm = 1e-300;

// chi/|chi| * magnitude, zero at the origin
inline Vec3 radial(const Vec3& chi, double magnitude) {
    const double r = chi.norm();
    if (r < kTinyNorm) return Vec3::Zero();
    return chi * (magnitude / r);
}

inline void require_eps(double eps, const char* who) {
    if (!(eps > 0.0 && eps <= 1.0)) {
        throw DomainError(std::string(who) + ": eps must lie in (0,1], got " + std::to_string(eps));
    }
}

// Safeguarded Newton for an increasing scalar function on [lo, hi] with
// f(lo) <= target <= f(hi).
template <class F, class DF>
double solve_increasing(F&& f, DF&& df, double target, double lo, double hi, double x0) {
    double x = x0;
    for (int it = 0; it < 200; ++it) {
        const double fx = f(x) - target;
        if (fx == 0.0) return x;
        if (fx < 0.0) lo = x;
        else hi = x;
        const double d = df(x);
        double next = (d > 0.0 && std::isfinite(d)) ? x - fx / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) {
            return next;
        }
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, hi)) return next;
        x = next;
    }
    throw NumericError("radial inverse did not converge for target " + std::to_string(target));
}

}  // namespace detail

inline double h0(double r) {
    if (r < 0.0) throw DomainError("h0: negative argument");
    return 1.0 + std::sqrt(r);
}

/// (r-1)^2 for r >= 1, continued by zero below.
inline double h0_inverse(double r) {
    if (!(r >= 0.0)) throw DomainError("h0_inverse: argument must be non-negative");
    return r >= 1.0 ? (r - 1.0) * (r - 1.0) : 0.0;
}

inline Vec3 H0(const Vec3& chi) { return detail::radial(chi, h0_inverse(chi.norm())); }
inline Vec3 H0_star(const Vec3& chi) { return detail::radial(chi, std::sqrt(h0_inverse(chi.norm()))); }

/// Discontinuity-removing map: 0 inside the unit ball, w - w/|w| outside.
inline Vec3 M(const Vec3& w) {
    const double r = w.norm();
    return r <= 1.0 ? Vec3::Zero() : detail::radial(w, r - 1.0);
}

/// r / sqrt(eps + r^2) + sqrt(r), strictly increasing on [0, inf).
inline double h_eps(double r, double eps) {
    detail::require_eps(eps, "h_eps");
    if (r < 0.0) throw DomainError("h_eps: negative argument");
    return r / std::sqrt(eps + r * r) + std::sqrt(r);
}

inline double h_eps_inverse(double r, double eps) {
    detail::require_eps(eps, "h_eps_inverse");
    if (!(r >= 0.0)) throw DomainError("h_eps_inverse: argument must be non-negative");
    if (r == 0.0) return 0.0;
    // unknown u = sqrt(result): F(u) = u + u^2 / sqrt(eps + u^4), F' >= 1
    auto F = [eps](double u) { return u + u * u / std::sqrt(eps + u * u * u * u); };
    auto dF = [eps](double u) {
        const double q = eps + u * u * u * u;
        return 1.0 + 2.0 * u * eps / (q * std::sqrt(q));
    };
    const double u0 = std::max(0.0, r - 1.0);
    const double u = detail::solve_increasing(F, dF, r, u0, r, u0);
    return u * u;
}

inline Vec3 H_eps(const Vec3& chi, double eps) { return detail::radial(chi, h_eps_inverse(chi.norm(), eps)); }
inline Vec3 H_eps_star(const Vec3& chi, double eps) {
    return detail::radial(chi, std::sqrt(h_eps_inverse(chi.norm(), eps)));
}

/// H_eps for eps > 0, H0 for the limit sentinel.
inline Vec3 H(const Vec3& chi, Eps eps) { return eps.is_limit() ? H0(chi) : H_eps(chi, eps.value()); }
inline Vec3 H_star(const Vec3& chi, Eps eps) {
    return eps.is_limit() ? H0_star(chi) : H_eps_star(chi, eps.value());
}

/// tau = eps*kappa + kappa/sqrt(eps + |kappa|^2), the map inverted by G_eps.
inline Vec3 G_eps_inverse(const Vec3& kappa, double eps) {
    detail::require_eps(eps, "G_eps_inverse");
    return kappa * (eps + 1.0 / std::sqrt(eps + kappa.squaredNorm()));
}

/// Radial magnitude |G_eps(tau)| for |tau| = t.
inline double G_eps_radius(double t, double eps) {
    detail::require_eps(eps, "G_eps");
    if (t == 0.0) return 0.0;
    auto f = [eps](double k) { return k * (eps + 1.0 / std::sqrt(eps + k * k)); };
    auto df = [eps](double k) {
        const double q = eps + k * k;
        return eps + eps / (q * std::sqrt(q));
    };
    // f(k) < eps*k + 1, so the root is at least (t-1)/eps; f(t/eps) > t
    const double lo = std::max(0.0, (t - 1.0) / eps);
    return detail::solve_increasing(f, df, t, lo, t / eps, lo);
}

/// The unique kappa with eps*kappa + kappa/sqrt(eps+|kappa|^2) = tau.
inline Vec3 G_eps(const Vec3& tau, double eps) {
    if (!tau.allFinite()) throw NumericError("G_eps: non-finite input");
    return detail::radial(tau, G_eps_radius(tau.norm(), eps));
}

/// Jacobian of G_eps at tau given kappa = G_eps(tau): eigenvalue
/// 1/(eps + q^{-1/2}) across kappa and 1/(eps + eps q^{-3/2}) along it,
/// q = eps + |kappa|^2.
inline Mat3 G_eps_jacobian_at(const Vec3& kappa, double eps) {
    const double q = eps + kappa.squaredNorm();
    const double lam_perp = 1.0 / (eps + 1.0 / std::sqrt(q));
    const double lam_par = 1.0 / (eps + eps / (q * std::sqrt(q)));
    const double k = kappa.norm();
    if (k < detail::kTinyNorm) return lam_par * Mat3::Identity();
    const Vec3 e = kappa / k;
    return lam_perp * Mat3::Identity() + (lam_par - lam_perp) * (e * e.transpose());
}

inline Mat3 G_eps_jacobian(const Vec3& tau, double eps) { return G_eps_jacobian_at(G_eps(tau, eps), eps); }

/// Convex potential Psi with grad Psi = G_eps and Psi(0) = 0:
/// Psi = eps|kappa|^2/2 - eps/sqrt(eps+|kappa|^2) + sqrt(eps).
/// Evaluated in Legendre form so that it is second-order insensitive to the
/// accuracy of kappa.
inline double G_eps_potential_at(const Vec3& tau, const Vec3& kappa, double eps) {
    const double k2 = kappa.squaredNorm();
    const double conj = 0.5 * eps * k2 + (std::sqrt(eps + k2) - std::sqrt(eps));
    return kappa.dot(tau) - conj;
}

inline double G_eps_potential(const Vec3& tau, double eps) { return G_eps_potential_at(tau, G_eps(tau, eps), eps); }

/// Fluxes of the merged weak form: A = (v, w - H*(w)), B = (H(w), v),
/// D = (0, H(w)).
struct FluxValues {
    Vec6 A;
    Vec6 B;
    Vec6 D;
};

inline FluxValues flux_maps(const Gamma& g, Eps eps) {
    const Vec3 h = H(g.w, eps);
    const Vec3 hs = H_star(g.w, eps);
    return {stack(g.v, g.w - hs), stack(h, g.v), stack(Vec3::Zero(), h)};
}

/// 2-homogeneous recession of B: (w|w|, 0).
inline Vec6 B_recession(const Gamma& g) { return stack(g.w * g.w.norm(), Vec3::Zero()); }

/// The transformed flux variable of the limit argument,
/// w = kappa/sqrt(eps+|kappa|^2) + kappa/sqrt(|kappa|), zero at kappa = 0.
inline Vec3 w_from_kappa(const Vec3& kappa, double eps) {
    const double k = kappa.norm();
    if (k < detail::kTinyNorm) return Vec3::Zero();
    return kappa * (1.0 / std::sqrt(eps + k * k) + 1.0 / std::sqrt(k));
}

}  // namespace whipdyn
