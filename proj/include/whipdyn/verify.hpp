#pragma once

// Self-checks grouped in suites (maps, tension, energy, ym) for the
// `verify` command. Each check is cheap and deterministic.

#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "whipdyn/diagnostics.hpp"
#include "whipdyn/maps.hpp"
#include "whipdyn/refdyn.hpp"
#include "whipdyn/regdyn.hpp"
#include "whipdyn/scenario.hpp"
#include "whipdyn/tension.hpp"
#include "whipdyn/youngmeasure.hpp"

namespace whipdyn {

struct CheckResult {
    std::string suite;
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

inline std::string fmt(double x) {
    std::ostringstream o;
    o.precision(4);
    o << x;
    return o.str();
}

// smooth random function on [0,1]: a few cosine modes with decaying amplitudes
inline std::function<double(double)> random_profile(std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> nd;
    std::vector<double> a(5);
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = scale * nd(rng) / (1.0 + static_cast<double>(k));
    return [a](double s) {
        double x = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) x += a[k] * std::cos(std::numbers::pi * static_cast<double>(k) * s);
        return x;
    };
}

}  // namespace detail

/// A random smooth inextensible state: unit tangent from random spherical
/// angles, velocity derivative v_s = omega(s) x eta_s (so eta_s . eta_st = 0).
/// Returns the tension problem for the given family and gravity.
inline TensionProblem random_tension_problem(std::mt19937_64& rng, BoundaryFamily bc, const Vec3& g, std::size_t n) {
    const Grid1D grid(n);
    const auto theta = detail::random_profile(rng, 1.0);
    const auto phi = detail::random_profile(rng, 1.5);
    const std::array<std::function<double(double)>, 3> omega{detail::random_profile(rng, 2.0),
                                                             detail::random_profile(rng, 2.0),
                                                             detail::random_profile(rng, 2.0)};
    Field3 t(grid);
    Field3 vs(grid);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = grid.node(i);
        const double th = 1.0 + theta(s), ph = phi(s);
        t[i] = Vec3(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
        vs[i] = Vec3(omega[0](s), omega[1](s), omega[2](s)).cross(t[i]);
    }
    const Field3 tss = derivative_s_high_order(t, Stencil::OneSided);
    TensionProblem p{FieldScalar(grid), FieldScalar(grid), bc, g, {t[0], t[n - 1]}};
    for (std::size_t i = 0; i < n; ++i) {
        p.eta_ss_sq[i] = tss[i].squaredNorm();
        p.eta_st_sq[i] = vs[i].squaredNorm();
    }
    return p;
}

/// Eigenvalues of the G_eps Jacobian in closed form: across and along kappa.
inline std::array<double, 2> G_eps_eigenvalues(const Vec3& tau, double eps) {
    const double q = eps + G_eps(tau, eps).squaredNorm();
    return {1.0 / (eps + 1.0 / std::sqrt(q)), (1.0 / eps) / (1.0 + std::pow(q, -1.5))};
}

inline double sup_map_gap(double eps, bool star) {
    double worst = 0.0;
    for (int k = 0; k <= 20000; ++k) {
        const double r = 100.0 * k / 20000.0;
        const Vec3 chi(r, 0.0, 0.0);
        const double d = star ? (H_eps_star(chi, eps) - H0_star(chi)).norm() : (H_eps(chi, eps) - H0(chi)).norm();
        worst = std::max(worst, d);
    }
    return worst;
}

inline std::vector<CheckResult> verify_maps() {
    std::vector<CheckResult> out;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(-3.0, 1.0);

    double inv_err = 0.0, eig_err = 0.0, bound_excess = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double eps = std::pow(10.0, std::clamp(ud(rng), -3.0, 0.0));
        const Vec3 kappa = Vec3(nd(rng), nd(rng), nd(rng)) * std::pow(10.0, ud(rng) + 1.0);
        const Vec3 tau = G_eps_inverse(kappa, eps);
        inv_err = std::max(inv_err, (G_eps(tau, eps) - kappa).norm() / (1.0 + kappa.norm()));
        // central-difference Jacobian against the closed-form spectrum
        Mat3 J;
        const double step = 1e-6 * (1.0 + tau.norm());
        for (int c = 0; c < 3; ++c) {
            const Vec3 e = step * Vec3::Unit(c);
            J.col(c) = (G_eps(tau + e, eps) - G_eps(tau - e, eps)) / (2.0 * step);
        }
        Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (J + J.transpose()));
        const auto lam = G_eps_eigenvalues(tau, eps);
        std::array<double, 3> want{lam[0], lam[0], lam[1]};
        std::sort(want.begin(), want.end());
        for (int c = 0; c < 3; ++c) eig_err = std::max(eig_err, std::abs(es.eigenvalues()[c] - want[c]) / want[c]);
        const double lo = 1.0 / (eps + 1.0 / std::sqrt(eps)), hi = 1.0 / eps;
        for (double l : lam) bound_excess = std::max({bound_excess, (lo - l) / lo, (l - hi) / hi});
    }
    out.push_back({"maps", "G_eps inverts G_eps^{-1} at 1000 random points", inv_err < 1e-10, "max rel err " + detail::fmt(inv_err)});
    out.push_back({"maps", "Jacobian spectrum matches closed form", eig_err < 1e-5, "max rel err " + detail::fmt(eig_err)});
    out.push_back({"maps", "Jacobian eigenvalues inside [1/(eps+eps^-1/2), 1/eps]", bound_excess <= 1e-6,
                   "max rel excess " + detail::fmt(std::max(0.0, bound_excess))});

    for (bool star : {false, true}) {
        const double a = sup_map_gap(1e-1, star), b = sup_map_gap(1e-2, star), c = sup_map_gap(1e-3, star);
        out.push_back({"maps", std::string(star ? "sup|H*_eps - H0*|" : "sup|H_eps - H0|") + " decreases along eps = 1e-1, 1e-2, 1e-3",
                       a > b && b > c, detail::fmt(a) + " > " + detail::fmt(b) + " > " + detail::fmt(c)});
    }
    return out;
}

inline std::vector<CheckResult> verify_tension() {
    std::vector<CheckResult> out;
    const Grid1D grid(201);
    for (const char* name : {"upright", "hanging"}) {
        const Scenario sc = preset(name);
        const auto d = sample(sc, grid);
        const FieldScalar sigma = initial_tension(d.alpha, d.beta, sc.bc, sc.g);
        const double sign = std::string(name) == "upright" ? -1.0 : 1.0;
        double err = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) err = std::max(err, std::abs(sigma[i] - sign * sc.g.norm() * grid.node(i)));
        out.push_back({"tension", std::string(name) + " tension is linear in s", err < 1e-10, "max err " + detail::fmt(err)});
    }
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    const std::array<std::pair<BoundaryFamily, Vec3>, 3> cases{
        std::pair{BoundaryFamily::TwoFree, kDefaultGravity}, std::pair{BoundaryFamily::Whip, Vec3::Zero()},
        std::pair{BoundaryFamily::TwoFixed, Vec3::Zero()}};
    for (int k = 0; k < 100; ++k) {
        const auto& [bc, g] = cases[k % 3];
        const auto p = random_tension_problem(rng, bc, g, 201);
        const FieldScalar sigma = solve_tension(p, grid);
        double mn = 0.0, mx = 0.0;
        for (std::size_t i = 0; i < sigma.size(); ++i) {
            mn = std::min(mn, sigma[i]);
            mx = std::max(mx, std::abs(sigma[i]));
        }
        worst = std::min(worst, mn / std::max(mx, 1e-300));
    }
    out.push_back({"tension", "100 random states under the positivity hypotheses give sigma >= 0", worst >= -1e-8,
                   "min sigma / max|sigma| = " + detail::fmt(worst)});
    const auto up = sample(preset("upright"), grid);
    const auto rep = check_nonnegativity(initial_tension(up.alpha, up.beta, BoundaryFamily::Whip, kDefaultGravity));
    out.push_back({"tension", "upright tension is negative", !rep.nonnegative, "min " + detail::fmt(rep.min_value)});
    return out;
}

inline std::vector<CheckResult> verify_energy() {
    std::vector<CheckResult> out;
    {
        Scenario sc = preset("hanging");
        sc.horizon = 1.0;
        const auto tr = run_constrained(sc, 101, suggested_dt_constrained(sc, 101));
        const double rel = tr.energy_drift / std::abs(tr.series.E.front());
        out.push_back({"energy", "hanging chain energy is conserved", rel <= 1e-10, "relative drift " + detail::fmt(rel)});
    }
    {
        Scenario sc = preset("pendulum");
        sc.horizon = 1.0;
        const auto tr = run_constrained(sc, 101, suggested_dt_constrained(sc, 101));
        const double rel = tr.energy_drift / std::abs(tr.series.E.front());
        out.push_back({"energy", "swinging chain energy drift <= 1e-4", rel <= 1e-4, "relative drift " + detail::fmt(rel)});
    }
    {
        Scenario sc = preset("upright");
        sc.horizon = 1.0;
        const double eps = 0.1;
        const auto tr = run_regularized(sc, eps, 101, stable_dt_regularized(eps, Grid1D(101)), 10);
        out.push_back({"energy", "regularized energy is nonincreasing", tr.energy_monotone,
                       "max relative increase " + detail::fmt(tr.max_energy_increase)});
    }
    return out;
}

inline std::vector<CheckResult> verify_ym() {
    std::vector<CheckResult> out;
    const double n = 64.0;
    const std::size_t ns = 4096, nt = 8;
    std::vector<YMSample> osc, conc;
    for (std::size_t k = 0; k < nt; ++k) {
        const double t = (static_cast<double>(k) + 0.5) / nt;
        for (std::size_t i = 0; i < ns; ++i) {
            const double s = (static_cast<double>(i) + 0.5) / ns;
            Vec6 g = Vec6::Zero();
            g[0] = std::sin(2.0 * std::numbers::pi * n * s) >= 0.0 ? 1.0 : -1.0;
            osc.push_back({t, s, 1.0 / (ns * nt), g});
        }
        const std::size_t fine = 16 * static_cast<std::size_t>(n * n);
        for (std::size_t i = 0; i < fine; ++i) {
            const double s = (static_cast<double>(i) + 0.5) / fine;
            Vec6 g = Vec6::Zero();
            g[0] = s < 1.0 / (n * n) ? n : 0.0;
            conc.push_back({t, s, 1.0 / (fine * nt), g});
        }
    }
    YMOptions opt;
    opt.cells_t = nt;
    const auto ym = build_empirical(osc, opt);
    double bin_err = 0.0;
    for (const auto& c : ym.cells)
        for (const auto& [key, bin] : c.nu) bin_err = std::max(bin_err, std::abs(bin.weight - 0.5));
    out.push_back({"ym", "oscillation family: two atoms of weight 1/2", bin_err <= 0.05 && ym.total_lambda() == 0.0,
                   "max |weight - 1/2| " + detail::fmt(bin_err)});
    const auto yc = build_empirical(conc, opt);
    out.push_back({"ym", "concentration family: lambda = 1", std::abs(yc.total_lambda() - 1.0) <= 0.05,
                   "lambda " + detail::fmt(yc.total_lambda())});

    const Scenario sc = preset("hanging");
    const Grid1D grid(201);
    const auto d = sample(sc, grid);
    const Field3 as = derivative_s(d.alpha);
    std::vector<double> times;
    std::vector<std::vector<Vec6>> gamma;
    for (int k = 0; k <= 100; ++k) {
        times.push_back(k / 100.0);
        std::vector<Vec6> row(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i)
            row[i] = stack(Vec3::Zero(), as[i] * (1.0 + std::sqrt(sc.g.norm() * grid.node(i))));
        gamma.push_back(std::move(row));
    }
    double worst = 0.0;
    for (const auto& tf : make_test_family(1.0, 12))
        worst = std::max(worst, std::abs(weak_residual(times, grid, gamma, d.alpha, d.beta, sc.g, tf)));
    out.push_back({"ym", "hanging chain satisfies the weak form", worst < 1e-3, "max residual " + detail::fmt(worst)});
    return out;
}

inline std::vector<std::string> verify_suites() { return {"maps", "tension", "energy", "ym", "all"}; }

inline std::vector<CheckResult> run_verify(const std::string& suite) {
    std::vector<CheckResult> out;
    auto add = [&](std::vector<CheckResult> r) { out.insert(out.end(), r.begin(), r.end()); };
    if (suite == "maps" || suite == "all") add(verify_maps());
    if (suite == "tension" || suite == "all") add(verify_tension());
    if (suite == "energy" || suite == "all") add(verify_energy());
    if (suite == "ym" || suite == "all") add(verify_ym());
    if (out.empty()) throw DomainError("unknown verify suite '" + suite + "' (maps, tension, energy, ym, all)");
    return out;
}

}  // namespace whipdyn
