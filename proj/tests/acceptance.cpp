// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails. `acceptance 3 5` runs only criteria 3 and 5.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "whipdyn/whipdyn.hpp"

using namespace whipdyn;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_s;
    std::function<Outcome()> run;
};

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

double l2(const Field3& a, const Field3& b) {
    return std::sqrt(integrate_nodes(a.grid(), [&](std::size_t i) { return (a[i] - b[i]).squaredNorm(); }));
}

// 1: the tension of a straight vertical chain at rest is linear in s
Outcome stationary_tension() {
    const Grid1D grid(201);
    double worst = 0.0, scale = 0.0;
    for (const char* name : {"upright", "hanging"}) {
        const Scenario sc = preset(name);
        const auto d = sample(sc, grid);
        const FieldScalar sigma = initial_tension(d.alpha, d.beta, sc.bc, sc.g);
        const double sign = std::string(name) == "upright" ? -1.0 : 1.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            worst = std::max(worst, std::abs(sigma[i] - sign * sc.g.norm() * grid.node(i)));
        scale = std::max(scale, sigma.max_norm());
    }
    // roundoff of the tridiagonal solve, relative to max|sigma|
    return {worst <= 1e-12 * scale, "max |sigma - (+-|g| s)| = " + num(worst) + " (max|sigma| " + num(scale) + ")"};
}

// 2: nonnegative tension under the hypotheses, negative tension without them
Outcome maximum_principle() {
    const Grid1D grid(201);
    std::mt19937_64 rng(99);
    double worst = 0.0, resid = 0.0;
    const std::array<std::pair<BoundaryFamily, Vec3>, 3> cases{
        std::pair{BoundaryFamily::TwoFree, kDefaultGravity}, std::pair{BoundaryFamily::Whip, Vec3::Zero()},
        std::pair{BoundaryFamily::TwoFixed, Vec3::Zero()}};
    for (int k = 0; k < 100; ++k) {
        const auto& [bc, g] = cases[k % 3];
        const auto p = random_tension_problem(rng, bc, g, grid.size());
        const FieldScalar sigma = solve_tension(p, grid);
        resid = std::max(resid, tension_residual(p, sigma));
        double mn = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) mn = std::min(mn, sigma[i]);
        worst = std::min(worst, mn / std::max(sigma.max_norm(), 1e-300));
    }
    const auto up = sample(preset("upright"), grid);
    const FieldScalar s_up = initial_tension(up.alpha, up.beta, BoundaryFamily::Whip, kDefaultGravity);
    double up_min = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) up_min = std::min(up_min, s_up[i]);
    return {worst >= -1e-8 && resid < 1e-10 && up_min < 0.0,
            "battery min sigma/max|sigma| = " + num(worst) + ", solve residual " + num(resid) + "; upright min sigma = " +
                num(up_min)};
}

// 3: constrained energy drift and its second-order decay, one smooth scenario per family
Outcome energy_conservation() {
    const std::size_t n = 201;
    bool pass = true;
    std::ostringstream d;
    for (const char* name : {"pendulum", "skipping_rope", "tumbling_arc", "tumbling_ring"}) {
        const Scenario sc = preset(name);
        const auto a = run_constrained(sc, n, suggested_dt_constrained(sc, n), 1);
        const double e0 = std::abs(a.series.E.front());
        const double rel_end = std::abs(a.series.E.back() - a.series.E.front()) / e0;
        const double rel_max = a.energy_drift / e0;
        // order check from half the smallest stability limit met along the run;
        // much smaller steps sink into the roundoff floor of the velocity update
        double dt_min = std::numeric_limits<double>::infinity();
        for (const auto& st : a.snapshots) dt_min = std::min(dt_min, max_stable_dt(st, sc.bc, sc.g));
        const double base = 0.5 * dt_min;
        const double ratio = run_constrained(sc, n, base, 100000).energy_drift /
                             run_constrained(sc, n, base / 2.0, 100000).energy_drift;
        pass = pass && rel_end <= 1e-4 && rel_max <= 1e-4 && ratio >= 3.0;
        d << to_string(sc.bc) << ": |E(T)-E(0)|/|E(0)| " << num(rel_end) << " (max over t " << num(rel_max)
          << "), halving x" << num(ratio) << "; ";
    }
    return {pass, d.str()};
}

// 4: E_eps nonincreasing; the dissipation identity defect halves with dt
Outcome regularized_dissipation() {
    bool mono = true;
    double worst_step = 0.0;
    for (const char* name : {"upright", "folded", "smooth", "hanging", "pendulum"}) {
        Scenario sc = preset(name);
        sc.horizon = 1.0;
        for (double eps : {0.1, 0.01}) {
            const auto tr = run_regularized(sc, eps, 51, stable_dt_regularized(eps, Grid1D(51)), 100000);
            for (std::size_t k = 1; k < tr.series.size(); ++k)
                worst_step = std::max(worst_step, tr.series.E_eps[k] - tr.series.E_eps[k - 1]);
        }
    }
    mono = worst_step <= 1e-8;
    Scenario sc = preset("smooth");
    sc.horizon = 0.25;
    const double eps = 0.1;
    auto defect = [&](double dt) {
        const auto tr = run_regularized(sc, eps, 51, dt, 100000);
        double m = 0.0;
        for (double x : tr.series.dissipation_defect) m = std::max(m, x);
        return m;
    };
    const double dt = stable_dt_regularized(eps, Grid1D(51));
    const double ratio = defect(dt) / defect(dt / 2.0);
    return {mono && ratio >= 1.4 && ratio <= 2.6,
            "max step increase of E_eps " + num(worst_step) + "; defect ratio under dt-halving " + num(ratio)};
}

// 5: kinetic and tension bounds do not blow up as eps decreases
Outcome uniform_bounds() {
    bool pass = true;
    std::ostringstream d;
    for (const char* name : {"upright", "folded"}) {
        SweepOptions o;
        o.eps_list = {0.1, 0.03, 0.01, 0.003};
        o.nodes = 101;
        o.test_pairs = 1;
        const auto rep = sweep_epsilon(preset(name), o);
        const double rk = spread_ratio(rep, &SweepRow::sup_kinetic);
        const double rt = spread_ratio(rep, &SweepRow::tension_l1);
        pass = pass && rep.all_ok() && rk <= 3.0 && rt <= 3.0;
        d << name << " (T=" << rep.horizon << "): sup int|v|^2 spread " << num(rk) << ", int int|kappa| spread " << num(rt);
        for (const auto& r : rep.rows)
            if (!r.ok) d << " [eps " << r.eps << " failed: " << r.failure << "]";
        d << "; ";
    }
    return {pass, d.str()};
}

// 6: regularized maps converge to the limit maps; G_eps Jacobian spectrum bracket
Outcome map_convergence() {
    auto gap = [](double eps, bool star) {
        double worst = 0.0;
        for (int k = 0; k <= 20000; ++k) {
            const Vec3 chi(0.0, 100.0 * k / 20000.0, 0.0);
            const Vec3 dlt = star ? Vec3(H_eps_star(chi, eps) - H0_star(chi)) : Vec3(H_eps(chi, eps) - H0(chi));
            worst = std::max(worst, dlt.norm());
        }
        return worst;
    };
    bool dec = true;
    std::ostringstream d;
    for (bool star : {false, true}) {
        const double a = gap(1e-1, star), b = gap(1e-2, star), c = gap(1e-3, star);
        dec = dec && a > b && b > c;
        d << (star ? "sup|H*_eps-H0*| " : "sup|H_eps-H0| ") << num(a) << " > " << num(b) << " > " << num(c) << "; ";
    }
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(-3.0, 0.0);
    double excess = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double eps = std::pow(10.0, ud(rng));
        const Vec3 tau = Vec3(nd(rng), nd(rng), nd(rng)) * std::pow(10.0, 2.0 * ud(rng) + 3.0);
        Mat3 J;
        const double h = 1e-5 * (1.0 + tau.norm());
        for (int c = 0; c < 3; ++c) {
            const Vec3 e = h * Vec3::Unit(c);
            J.col(c) = (G_eps(tau + e, eps) - G_eps(tau - e, eps)) / (2.0 * h);
        }
        Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (J + J.transpose()));
        const double lo = 1.0 / (eps + 1.0 / std::sqrt(eps)), hi = 1.0 / eps;
        for (int c = 0; c < 3; ++c) {
            const double l = es.eigenvalues()[c];
            excess = std::max({excess, (lo - l) / lo, (l - hi) / hi});
        }
    }
    d << "max relative excess outside [1/(eps+eps^-1/2), 1/eps] " << num(std::max(0.0, excess));
    return {dec && excess <= 1e-6, d.str()};
}

// 7: oscillating and concentrating families recover their Young measures
Outcome young_measure_families() {
    auto field = [](std::size_t n, const std::function<Vec6(double)>& f) {
        const Grid1D grid(n);
        std::vector<double> times;
        std::vector<std::vector<Vec6>> vals;
        for (int k = 0; k <= 10; ++k) {
            times.push_back(k / 10.0);
            std::vector<Vec6> row(n);
            for (std::size_t i = 0; i < n; ++i) row[i] = f(grid.node(i));
            vals.push_back(std::move(row));
        }
        return samples_from_snapshots(times, grid, vals);
    };
    YMOptions o;
    bool osc_ok = true;
    double worst_w = 0.0;
    for (int m : {64, 128, 256}) {
        const auto ym = build_empirical(field(64 * m + 1, [m](double s) {
                                            Vec6 x = Vec6::Zero();
                                            x[0] = std::sin(2.0 * std::numbers::pi * m * s + 0.1) >= 0.0 ? 1.0 : -1.0;
                                            return x;
                                        }),
                                        o);
        osc_ok = osc_ok && ym.total_lambda() == 0.0;
        for (const auto& c : ym.cells) {
            osc_ok = osc_ok && c.defined && c.nu.size() == 2;
            for (const auto& [key, bin] : c.nu) {
                worst_w = std::max(worst_w, std::abs(bin.weight - 0.5));
                osc_ok = osc_ok && std::abs(std::abs(bin.barycenter[0]) - 1.0) < 1e-12;
            }
        }
    }
    osc_ok = osc_ok && worst_w <= 0.05;

    const std::size_t n = 2001;
    const double h = 1.0 / static_cast<double>(n - 1);
    const double c = std::sqrt(1.0 / (3.0 * h));
    const auto ym = build_empirical(field(n, [&](double s) {
                                        Vec6 x = Vec6::Zero();
                                        if (std::abs(s - 0.6) < 1.5 * h) x[4] = c;
                                        return x;
                                    }),
                                    o);
    bool conc_ok = std::abs(ym.total_lambda() - 1.0) <= 0.05;
    for (const auto& cell : ym.cells) {
        conc_ok = conc_ok && cell.defined && cell.nu.size() == 1 && cell.nu.begin()->second.barycenter.norm() == 0.0;
        if (cell.lambda > 0.0)
            conc_ok = conc_ok && cell.nu_inf.size() == 1 &&
                      cell.nu_inf.begin()->second.direction.dot(Vec6::Unit(4)) > 1.0 - 1e-9;
    }
    return {osc_ok && conc_ok, "oscillation max |weight - 1/2| " + num(worst_w) + "; concentration lambda " +
                                   num(ym.total_lambda()) + (conc_ok ? ", nu = delta_0, nu_inf point mass" : ", shape wrong")};
}

// 8: weak residual of the regularized runs decreases along eps; exact hanging solution
Outcome weak_residual_trend() {
    SweepOptions o;
    o.eps_list = {0.1, 0.03, 0.01, 0.003};
    o.nodes = 101;
    o.horizon = 1.0;
    o.test_pairs = 12;
    const auto rep = sweep_epsilon(preset("upright"), o);
    std::ostringstream d;
    d << "upright max residual:";
    for (const auto& r : rep.rows) d << " " << num(r.max_residual);
    const bool trend = rep.all_ok() && residual_monotone(rep, 0.1);

    // hanging at rest: v = 0, tension |g| s along e_z, w = e_z (1 + sqrt(|g| s))
    const Grid1D grid(201);
    const Scenario sc = preset("hanging");
    const auto data = sample(sc, grid);
    std::vector<double> times;
    std::vector<std::vector<Vec6>> gamma;
    for (int k = 0; k <= 100; ++k) {
        times.push_back(k / 100.0);
        std::vector<Vec6> row(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i)
            row[i] = stack(Vec3::Zero(), Vec3(0, 0, 1) * (1.0 + std::sqrt(sc.g.norm() * grid.node(i))));
        gamma.push_back(std::move(row));
    }
    double hang = 0.0;
    for (const auto& p : make_test_family(1.0, 12))
        hang = std::max(hang, std::abs(weak_residual(times, grid, gamma, data.alpha, data.beta, sc.g, p)));
    d << "; hanging exact residual " << num(hang);
    return {trend && hang < 1e-3, d.str()};
}

// 9: the upright regularized chain relaxes to hanging down
Outcome downward_relaxation() {
    const double eps = 0.1;
    const std::size_t n = 101;
    const Grid1D grid(n);
    Scenario sc = preset("upright");
    sc.horizon = 5.0;
    const auto tr = run_regularized(sc, eps, n, stable_dt_regularized(eps, grid), 100000);
    const RegState& end = tr.snapshots.back();
    const Field3 kappa = kappa_of(end);
    const Field3 target = Field3::sample(grid, [&](double s) { return Vec3(-sc.g * s); });
    const double dv = std::sqrt(integrate_nodes(grid, [&](std::size_t i) { return end.v[i].squaredNorm(); }));
    const double dk = l2(kappa, target);
    const double dist = std::hypot(dv, dk);
    // distance from the end state to the discrete regularized steady state
    const RegState ss = steady_state(eps, grid, sc.g);
    const double dss = std::hypot(l2(end.v, ss.v), l2(kappa, kappa_of(ss)));
    return {dist <= 1e-2, "L2 distance to (0, -g s) " + num(dist) + " (v " + num(dv) + ", kappa " + num(dk) +
                              "); distance to the eps-steady state " + num(dss)};
}

// 10: perturbed constrained run vs regularized run at small eps
Outcome cross_solver() {
    Scenario sc = tilted(preset("upright"), 1e-3);
    sc.horizon = 1.0;
    // the falling chain builds up tension far above its initial value, so the
    // constrained step is fixed well below the stability limit met later on
    auto ref_dt = [](std::size_t n) { return 0.002 / static_cast<double>(n - 1); };
    auto ref_eta = [&](std::size_t n) {
        const auto tr = run_constrained(sc, n, ref_dt(n), 100000);
        return tr.snapshots.back().eta;
    };
    auto reg_eta = [&](double eps, std::size_t n) {
        const auto tr = run_regularized(sc, eps, n, stable_dt_regularized(eps, Grid1D(n)), 100000);
        return tr.snapshots.back().eta;
    };
    const Field3 ref101 = ref_eta(101), ref51 = ref_eta(51);
    const double d_fine = l2(reg_eta(1e-3, 101), ref101);
    const double d_coarse_eps = l2(reg_eta(1e-2, 101), ref101);
    const double d_coarse_h = l2(reg_eta(1e-3, 51), ref51);
    // sensitivity of the constrained run itself to the size of the perturbation
    Scenario sc2 = tilted(preset("upright"), 2e-3);
    sc2.horizon = 1.0;
    const auto tr2 = run_constrained(sc2, 101, ref_dt(101), 100000);
    const double sens = l2(tr2.snapshots.back().eta, ref101);
    const bool pass = d_fine <= 0.1 && d_fine < d_coarse_eps && d_fine < d_coarse_h;
    return {pass, "L2(eta) at t=1: eps=1e-3,n=101 " + num(d_fine) + "; eps=1e-2,n=101 " + num(d_coarse_eps) +
                      "; eps=1e-3,n=51 " + num(d_coarse_h) + "; constrained tilt 1e-3 vs 2e-3 " + num(sens)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "stationary tension", 1.0, stationary_tension},
        {2, "maximum principle battery", 10.0, maximum_principle},
        {3, "energy conservation", 60.0, energy_conservation},
        {4, "regularized dissipation", 60.0, regularized_dissipation},
        {5, "uniform bounds", 300.0, uniform_bounds},
        {6, "map convergence", 10.0, map_convergence},
        {7, "young measure families", 30.0, young_measure_families},
        {8, "weak residual trend", 300.0, weak_residual_trend},
        {9, "downward relaxation", 60.0, downward_relaxation},
        {10, "cross-solver agreement", 300.0, cross_solver},
    };
    std::set<int> only;
    for (int k = 1; k < argc; ++k) only.insert(std::atoi(argv[k]));

    int failed = 0;
    for (const auto& c : all) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome r;
        try {
            r = c.run();
        } catch (const std::exception& e) {
            r = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.budget_s;
        const bool pass = r.pass && in_time;
        if (!pass) ++failed;
        std::printf("%s %2d %s: %s [%.2fs of %.0fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(), r.detail.c_str(),
                    secs, c.budget_s, in_time ? "" : ", over budget");
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
