// Command-line driver: simulate, tension, sweep, ym-extract, verify.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "whipdyn/whipdyn.hpp"

namespace fs = std::filesystem;
using namespace whipdyn;

namespace {

std::string eps_dir_name(double eps) { return "eps_" + format_double(eps); }

nlohmann::json run_metadata(const Scenario& sc, const std::string& solver, std::size_t nodes, double dt,
                            std::size_t steps) {
    nlohmann::json j;
    j["scenario"] = sc.name;
    j["solver"] = solver;
    j["bc"] = to_string(sc.bc);
    j["nodes"] = nodes;
    j["dt"] = dt;
    j["steps"] = steps;
    j["horizon"] = sc.horizon;
    j["g"] = std::vector<double>{sc.g[0], sc.g[1], sc.g[2]};
    return j;
}

void write_reg_run(const fs::path& dir, const Scenario& sc, double eps, std::size_t nodes, double dt,
                   const RegTrajectory& tr) {
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "trajectory.csv", std::ios::binary);
        write_reg_csv(tr, out);
    }
    write_json(dir / "diagnostics.json", diagnostics_json(tr.series));
    auto meta = run_metadata(sc, "reg", nodes, dt, tr.series.size() - 1);
    meta["eps"] = eps;
    meta["energy_monotone"] = tr.energy_monotone;
    meta["max_energy_increase"] = tr.max_energy_increase;
    meta["sup_kinetic"] = tr.sup_kinetic;
    meta["tension_L1"] = tr.tension_l1;
    write_json(dir / "run.json", meta);
    write_text(dir / "scenario.ini", format_scenario(sc));
}

std::size_t default_sample_every(double horizon, double dt) {
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    return std::max<std::size_t>(1, steps / 200);
}

int cmd_simulate(const std::string& scenario, const std::string& solver, std::optional<double> eps_opt,
                 std::size_t nodes, double dt, std::optional<double> horizon, std::size_t every, const fs::path& out) {
    Scenario sc = resolve_scenario(scenario);
    if (horizon) sc.horizon = *horizon;
    const Grid1D grid(nodes);
    if (solver == "reg") {
        const double eps = eps_opt ? *eps_opt : sc.eps.value_or(0.01);
        if (dt <= 0.0) dt = stable_dt_regularized(eps, grid);
        if (every == 0) every = default_sample_every(sc.horizon, dt);
        const RegTrajectory tr = run_regularized(sc, eps, nodes, dt, every);
        write_reg_run(out, sc, eps, nodes, dt, tr);
        std::cout << "regularized run: " << tr.series.size() - 1 << " steps, " << tr.snapshots.size()
                  << " snapshots, E_eps monotone: " << (tr.energy_monotone ? "yes" : "no") << " -> " << out.string()
                  << "\n";
        return 0;
    }
    if (dt <= 0.0) dt = suggested_dt_constrained(sc, nodes);
    if (every == 0) every = default_sample_every(sc.horizon, dt);
    const ConstrainedTrajectory tr = run_constrained(sc, nodes, dt, every);
    fs::create_directories(out);
    {
        std::ofstream f(out / "trajectory.csv", std::ios::binary);
        write_ref_csv(tr, f);
    }
    write_json(out / "diagnostics.json", diagnostics_json(tr.series));
    auto meta = run_metadata(sc, "ref", nodes, dt, tr.series.size() - 1);
    meta["energy_drift"] = tr.energy_drift;
    meta["sup_kinetic"] = tr.sup_kinetic;
    meta["warnings"] = nlohmann::json::array();
    for (const auto& w : tr.warnings) meta["warnings"].push_back({{"condition", w.condition}, {"node", w.node}, {"value", w.value}});
    write_json(out / "run.json", meta);
    write_text(out / "scenario.ini", format_scenario(sc));
    for (const auto& w : tr.warnings)
        std::cerr << "warning: " << w.condition << " at node " << w.node << " (value " << w.value << ")\n";
    std::cout << "constrained run: " << tr.series.size() - 1 << " steps, energy drift " << tr.energy_drift << " -> "
              << out.string() << "\n";
    return 0;
}

int cmd_tension(const std::string& scenario, std::size_t nodes, const std::string& out) {
    const Scenario sc = resolve_scenario(scenario);
    const Grid1D grid(nodes);
    const auto d = sample(sc, grid);
    const FieldScalar sigma = initial_tension(d.alpha, d.beta, sc.bc, sc.g);
    if (out == "-") {
        write_tension_csv(sigma, std::cout);
    } else {
        const fs::path p(out);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        std::ofstream f(p, std::ios::binary);
        if (!f) throw Error("cannot write " + out);
        write_tension_csv(sigma, f);
    }
    const auto rep = check_nonnegativity(sigma);
    if (!rep.nonnegative) std::cerr << "note: tension is negative at s = " << rep.s_at_min << " (" << rep.min_value << ")\n";
    return 0;
}

int cmd_sweep(const std::string& scenario, const std::vector<double>& eps_list, std::size_t nodes, double dt,
              std::optional<double> horizon, const fs::path& out) {
    const Scenario sc = resolve_scenario(scenario);
    SweepOptions opt;
    opt.eps_list = eps_list;
    opt.nodes = nodes;
    opt.dt = dt;
    opt.horizon = horizon;
    Scenario run_sc = sc;
    if (horizon) run_sc.horizon = *horizon;
    fs::create_directories(out);
    const SweepReport rep = sweep_epsilon(sc, opt, [&](std::size_t, double eps, const RegTrajectory& tr) {
        const double step = tr.series.size() > 1 ? tr.series.times[1] - tr.series.times[0] : 0.0;
        write_reg_run(out / eps_dir_name(eps), run_sc, eps, nodes, step, tr);
    });

    {
        std::ofstream f(out / "report.csv", std::ios::binary);
        f << "epsilon,status,dt,steps,energy_monotone,max_energy_increase,sup_kinetic,tension_L1,w_L2,admissibility,"
             "potential_residual,max_residual,failure\n";
        for (const auto& r : rep.rows) {
            f << format_double(r.eps) << "," << (r.ok ? "ok" : "failed") << "," << format_double(r.dt) << "," << r.steps
              << "," << (r.energy_monotone ? 1 : 0) << "," << format_double(r.max_energy_increase) << ","
              << format_double(r.sup_kinetic) << "," << format_double(r.tension_l1) << "," << format_double(r.w_l2)
              << "," << format_double(r.admissibility) << "," << format_double(r.potential_residual) << ","
              << format_double(r.max_residual) << ",\"" << r.failure << "\"\n";
        }
    }
    {
        std::ofstream f(out / "residuals.csv", std::ios::binary);
        f << "pair,epsilon,residual\n";
        for (const auto& r : rep.rows)
            for (std::size_t k = 0; k < r.residuals.size(); ++k)
                f << rep.pair_ids[k] << "," << format_double(r.eps) << "," << format_double(r.residuals[k]) << "\n";
    }
    nlohmann::json summary;
    summary["scenario"] = rep.scenario;
    summary["horizon"] = rep.horizon;
    summary["nodes"] = rep.nodes;
    summary["runs"] = rep.rows.size();
    summary["failed"] = static_cast<std::size_t>(std::count_if(rep.rows.begin(), rep.rows.end(), [](const SweepRow& r) { return !r.ok; }));
    if (rep.rows.size() > 1) {
        summary["tension_L1_ratio"] = spread_ratio(rep, &SweepRow::tension_l1);
        summary["sup_kinetic_ratio"] = spread_ratio(rep, &SweepRow::sup_kinetic);
        summary["admissibility_ratio"] = spread_ratio(rep, &SweepRow::admissibility);
        summary["residual_monotone"] = residual_monotone(rep);
    }
    write_json(out / "summary.json", summary);
    if (rep.measure) write_json(out / "measure.json", measure_json(*rep.measure));

    for (const auto& r : rep.rows) {
        std::cout << "eps " << r.eps << ": " << (r.ok ? "ok" : "FAILED (" + r.failure + ")");
        if (r.ok) std::cout << "  tension_L1 " << r.tension_l1 << "  sup|v|^2 " << r.sup_kinetic << "  max residual " << r.max_residual;
        std::cout << "\n";
    }
    return rep.all_ok() ? 0 : 1;
}

int cmd_ym_extract(const fs::path& runs, std::size_t bins, const std::string& radius_policy, std::size_t cells_t,
                   std::size_t cells_s, const std::string& out) {
    if (!fs::is_directory(runs)) throw Error("not a directory: " + runs.string());
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(runs))
        if (e.is_directory() && fs::exists(e.path() / "run.json") && fs::exists(e.path() / "trajectory.csv")) dirs.push_back(e.path());
    if (fs::exists(runs / "run.json") && fs::exists(runs / "trajectory.csv")) dirs.push_back(runs);
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw Error("no regularized runs under " + runs.string());

    YMOptions opt;
    opt.bins = bins;
    opt.cells_t = cells_t;
    opt.cells_s = cells_s;
    if (radius_policy != "auto") {
        try {
            opt.radius = std::stod(radius_policy);
        } catch (const std::exception&) {
            throw Error("--radius-policy must be 'auto' or a positive number");
        }
        if (!(opt.radius > 0.0)) throw Error("--radius-policy must be 'auto' or a positive number");
    }
    std::vector<std::vector<YMSample>> fields;
    double T = 0.0;
    for (const auto& d : dirs) {
        std::ifstream f(d / "run.json");
        const auto meta = nlohmann::json::parse(f);
        if (meta.value("solver", "") != "reg" || !meta.contains("eps")) continue;
        const GammaRun run = read_reg_csv(d / "trajectory.csv", meta["eps"].get<double>());
        const Grid1D grid(run.nodes.size());
        T = std::max(T, run.times.back());
        fields.push_back(samples_from_snapshots(run.times, grid, run.gamma));
    }
    if (fields.empty()) throw Error("no regularized runs under " + runs.string());
    opt.T = T > 0.0 ? T : 1.0;
    const auto ym = build_empirical(fields, opt);
    const auto j = measure_json(ym);
    if (out == "-") std::cout << j.dump(2) << "\n";
    else write_json(out, j);
    std::cerr << fields.size() << " runs, radius " << ym.radius << ", lambda " << ym.total_lambda() << "\n";
    return 0;
}

int cmd_verify(const std::string& suite) {
    const auto results = run_verify(suite);
    int failed = 0;
    for (const auto& r : results) {
        std::cout << (r.passed ? "ok    " : "FAIL  ") << r.suite << ": " << r.name << " (" << r.detail << ")\n";
        failed += r.passed ? 0 : 1;
    }
    std::cout << results.size() - failed << "/" << results.size() << " checks passed\n";
    return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"whipdyn: dynamics of an inextensible whip"};
    app.require_subcommand(1);

    std::string scenario = "upright", solver = "reg", out;
    std::optional<double> eps, horizon;
    std::size_t nodes = 101, every = 0;
    double dt = 0.0;

    auto* sim = app.add_subcommand("simulate", "integrate one scenario");
    sim->add_option("--scenario", scenario, "preset name or config path")->required();
    sim->add_option("--solver", solver, "reg (regularized) or ref (constrained)")->check(CLI::IsMember({"reg", "ref"}));
    sim->add_option("--eps", eps, "regularization (reg solver)");
    sim->add_option("--nodes", nodes, "grid nodes")->check(CLI::Range(3, 100000));
    sim->add_option("--dt", dt, "time step (default: stable step)");
    sim->add_option("--horizon", horizon, "final time (default: scenario horizon)");
    sim->add_option("--sample-every", every, "retain every k-th step (default: about 200 snapshots)");
    sim->add_option("--out", out, "output directory")->required();

    std::string tension_out = "-";
    auto* ten = app.add_subcommand("tension", "initial tension of a scenario");
    ten->add_option("--scenario", scenario, "preset name or config path")->required();
    ten->add_option("--nodes", nodes, "grid nodes")->check(CLI::Range(3, 100000));
    ten->add_option("--out", tension_out, "CSV path or - for stdout");

    std::vector<double> eps_list;
    auto* sw = app.add_subcommand("sweep", "regularized runs over a decreasing eps list");
    sw->add_option("--scenario", scenario, "preset name or config path");
    sw->add_option("--eps-list", eps_list, "strictly decreasing eps values")->delimiter(',')->required();
    sw->add_option("--nodes", nodes, "grid nodes")->check(CLI::Range(3, 100000));
    sw->add_option("--dt", dt, "time step (default: stable step per eps)");
    sw->add_option("--horizon", horizon, "final time (default: scenario horizon)");
    sw->add_option("--out", out, "output directory")->required();

    std::string runs, radius_policy = "auto", ym_out = "-";
    std::size_t bins = 16, cells_t = 4, cells_s = 8;
    auto* ym = app.add_subcommand("ym-extract", "empirical Young measure from regularized runs");
    ym->add_option("--runs", runs, "sweep directory or single run directory")->required();
    ym->add_option("--bins", bins, "bins per axis")->check(CLI::Range(1, 1000));
    ym->add_option("--radius-policy", radius_policy, "auto or a radius");
    ym->add_option("--cells-t", cells_t, "cells in t")->check(CLI::Range(1, 10000));
    ym->add_option("--cells-s", cells_s, "cells in s")->check(CLI::Range(1, 10000));
    ym->add_option("--out", ym_out, "JSON path or - for stdout");

    std::string suite = "all";
    auto* ver = app.add_subcommand("verify", "run self-checks");
    ver->add_option("--suite", suite, "maps, tension, energy, ym or all")->check(CLI::IsMember(verify_suites()));

    CLI11_PARSE(app, argc, argv);
    try {
        if (*sim) return cmd_simulate(scenario, solver, eps, nodes, dt, horizon, every, out);
        if (*ten) return cmd_tension(scenario, nodes, tension_out);
        if (*sw) return cmd_sweep(scenario, eps_list, nodes, dt, horizon, out);
        if (*ym) return cmd_ym_extract(runs, bins, radius_policy, cells_t, cells_s, ym_out);
        if (*ver) return cmd_verify(suite);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
