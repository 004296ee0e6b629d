#pragma once

// Epsilon sweeps: one regularized run per eps (concurrently, one result slot
// per run), w-fields, per-run measures and weak residuals, and the
// eps-uniformity report.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "whipdyn/errors.hpp"
#include "whipdyn/regdyn.hpp"
#include "whipdyn/scenario.hpp"
#include "whipdyn/youngmeasure.hpp"

namespace whipdyn {

/// Worker count: WHIPDYN_THREADS if set to a positive integer, otherwise the
/// hardware concurrency; never more than the number of jobs.
inline std::size_t sweep_threads(std::size_t jobs) {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("WHIPDYN_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) n = static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::min(n, jobs));
}

/// eps values must be strictly decreasing and lie in (0, 1].
inline std::vector<Violation> eps_list_violations(const std::vector<double>& eps) {
    std::vector<Violation> out;
    if (eps.empty()) out.push_back({"eps list must not be empty", -1, 0.0});
    for (std::size_t k = 0; k < eps.size(); ++k) {
        const auto idx = static_cast<std::ptrdiff_t>(k);
        if (!(eps[k] > 0.0 && eps[k] <= 1.0)) out.push_back({"eps must lie in (0,1]", idx, eps[k]});
        for (std::size_t j = 0; j < k; ++j)
            if (eps[j] == eps[k]) out.push_back({"duplicate eps", idx, eps[k]});
        if (k > 0 && eps[k] > eps[k - 1])
            out.push_back({"eps list must be strictly decreasing", idx, eps[k]});
    }
    return out;
}

struct SweepOptions {
    std::vector<double> eps_list;
    std::size_t nodes = 101;
    double dt = 0.0;                // 0 picks the stable step for each eps
    std::optional<double> horizon;  // overrides the scenario horizon
    std::size_t snapshots = 100;    // retained snapshots per run (approximately)
    std::size_t test_pairs = 12;
    YMOptions measure;              // T is taken from the horizon
};

struct SweepRow {
    double eps = 0.0;
    bool ok = false;
    std::string failure;
    double dt = 0.0;
    std::size_t steps = 0;
    bool energy_monotone = false;
    double max_energy_increase = 0.0;
    double sup_kinetic = 0.0;      // sup_t int |v|^2
    double tension_l1 = 0.0;       // int int |kappa|
    double w_l2 = 0.0;             // ||w||_{L2(Omega)}
    double admissibility = 0.0;    // int <nu, |xi|^2> + lambda of this run's measure
    double potential_residual = 0.0;
    std::vector<double> residuals;  // one per test pair
    double max_residual = 0.0;
};

struct SweepReport {
    std::string scenario;
    double horizon = 0.0;
    std::size_t nodes = 0;
    std::vector<std::string> pair_ids;
    std::vector<SweepRow> rows;
    std::optional<EmpiricalYoungMeasure> measure;  // mixture over successful runs

    bool all_ok() const {
        return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.ok; });
    }
};

/// max/min over successful rows of a positive column (1 with fewer than two rows).
inline double spread_ratio(const SweepReport& rep, double SweepRow::*col) {
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (const auto& r : rep.rows) {
        if (!r.ok) continue;
        const double x = r.*col;
        lo = any ? std::min(lo, x) : x;
        hi = any ? std::max(hi, x) : x;
        any = true;
    }
    return any && lo > 0.0 ? hi / lo : 1.0;
}

/// max residual never grows by more than `slack` from one eps to the next.
inline bool residual_monotone(const SweepReport& rep, double slack = 0.1) {
    for (std::size_t k = 1; k < rep.rows.size(); ++k) {
        if (!rep.rows[k].ok || !rep.rows[k - 1].ok) return false;
        if (rep.rows[k].max_residual > (1.0 + slack) * rep.rows[k - 1].max_residual) return false;
    }
    return true;
}

/// Per-run hook, called on the worker thread that produced the run.
using SweepRunHook = std::function<void(std::size_t index, double eps, const RegTrajectory&)>;

inline SweepReport sweep_epsilon(const Scenario& scenario, const SweepOptions& opt, const SweepRunHook& hook = {}) {
    if (auto v = eps_list_violations(opt.eps_list); !v.empty()) throw ValidationError(std::move(v));
    if (scenario.bc != BoundaryFamily::Whip) throw DomainError(reg_family_error(scenario.bc));
    Scenario sc = scenario;
    if (opt.horizon) sc.horizon = *opt.horizon;
    if (!(sc.horizon > 0.0)) throw DomainError("sweep needs a positive horizon");
    const Grid1D grid(opt.nodes);
    validate(sc, grid);
    const SampledScenario data = sample(sc, grid);
    const auto family = make_test_family(sc.horizon, opt.test_pairs);
    YMOptions ymo = opt.measure;
    ymo.T = sc.horizon;

    SweepReport rep;
    rep.scenario = sc.name;
    rep.horizon = sc.horizon;
    rep.nodes = opt.nodes;
    for (const auto& p : family) rep.pair_ids.push_back(p.id);
    rep.rows.resize(opt.eps_list.size());
    std::vector<std::vector<YMSample>> samples(opt.eps_list.size());

    auto run_one = [&](std::size_t k) {
        SweepRow& row = rep.rows[k];
        row.eps = opt.eps_list[k];
        try {
            row.dt = opt.dt > 0.0 ? opt.dt : stable_dt_regularized(row.eps, grid);
            row.steps = static_cast<std::size_t>(std::ceil(sc.horizon / row.dt - 1e-9));
            const std::size_t every = std::max<std::size_t>(1, row.steps / std::max<std::size_t>(1, opt.snapshots));
            const RegTrajectory tr = run_regularized(sc, row.eps, opt.nodes, row.dt, every);
            row.energy_monotone = tr.energy_monotone;
            row.max_energy_increase = tr.max_energy_increase;
            row.sup_kinetic = tr.sup_kinetic;
            row.tension_l1 = tr.tension_l1;
            row.potential_residual = velocity_potential_check(tr, data.beta, sc.g);
            samples[k] = gamma_samples(tr);
            double w2 = 0.0;
            for (const auto& x : samples[k]) w2 += x.weight * x.gamma.tail<3>().squaredNorm();
            row.w_l2 = std::sqrt(w2);
            row.admissibility = admissibility_mass(build_empirical(samples[k], ymo));
            for (const auto& tf : family) {
                row.residuals.push_back(weak_residual(tr, data.alpha, data.beta, sc.g, tf));
                row.max_residual = std::max(row.max_residual, std::abs(row.residuals.back()));
            }
            if (hook) hook(k, row.eps, tr);
            row.ok = true;
        } catch (const std::exception& e) {
            row.ok = false;
            row.failure = e.what();
            samples[k].clear();
        }
    };

    const std::size_t jobs = opt.eps_list.size();
    const std::size_t nthreads = sweep_threads(jobs);
    if (nthreads == 1) {
        for (std::size_t k = 0; k < jobs; ++k) run_one(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nthreads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < jobs; k = next++) run_one(k);
            });
        }
        for (auto& th : pool) th.join();
    }

    std::vector<std::vector<YMSample>> good;
    for (std::size_t k = 0; k < jobs; ++k)
        if (rep.rows[k].ok) good.push_back(std::move(samples[k]));
    if (!good.empty()) rep.measure = build_empirical(good, ymo);
    return rep;
}

}  // namespace whipdyn
