#pragma once

// Scenario configs (INI sections [scenario], [alpha], [beta]) with a
// canonical writer, and the CSV / JSON emitters for trajectories,
// diagnostics and measures.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include "whipdyn/diagnostics.hpp"
#include "whipdyn/errors.hpp"
#include "whipdyn/refdyn.hpp"
#include "whipdyn/regdyn.hpp"
#include "whipdyn/scenario.hpp"
#include "whipdyn/youngmeasure.hpp"

namespace whipdyn {

/// Shortest decimal that reads back to the same double (signed zero prints as 0).
inline std::string format_double(double x) {
    if (x == 0.0) x = 0.0;
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline std::string format_vec(const Vec3& v) {
    return format_double(v[0]) + " " + format_double(v[1]) + " " + format_double(v[2]);
}

namespace detail {

inline std::size_t find_line(const std::string& text, const std::string& needle) {
    std::istringstream in(text);
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        const auto first = line.find_first_not_of(" \t");
        if (first != std::string::npos && line.compare(first, needle.size(), needle) == 0) return n;
    }
    return 0;
}

}  // namespace detail

/// Config text. Keys of [scenario]: name, bc, horizon, g (required), eps
/// (optional). [alpha] and [beta] carry `kind` plus generator parameters;
/// a parameter with three numbers is a vector, with one a scalar; `table`
/// holds tabulated nodal values "x y z; x y z; ...".
inline Scenario parse_scenario(const std::string& text, const std::string& origin = "<config>") {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    {
        std::istringstream in(text);
        try {
            pt::read_ini(in, tree);
        } catch (const pt::ini_parser_error& e) {
            throw ParseError(origin + ":" + std::to_string(e.line()) + ": " + e.message(), "", e.line());
        }
    }
    auto fail = [&](const std::string& msg, const std::string& key, const std::string& section) -> ParseError {
        std::size_t line = detail::find_line(text, key + " ");
        if (line == 0) line = detail::find_line(text, key + "=");
        if (line == 0) line = detail::find_line(text, "[" + section + "]");
        return ParseError(origin + ":" + std::to_string(line) + ": " + msg, key, line);
    };
    auto numbers = [&](const std::string& section, const std::string& key, const std::string& raw) {
        std::vector<double> out;
        std::istringstream in(raw);
        std::string tok;
        while (in >> tok) {
            double x = 0.0;
            auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
            if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
                throw fail("key '" + key + "': '" + tok + "' is not a number", key, section);
            out.push_back(x);
        }
        return out;
    };
    auto vec3 = [&](const std::string& section, const std::string& key, const std::string& raw) {
        const auto v = numbers(section, key, raw);
        if (v.size() != 3) throw fail("key '" + key + "' needs three numbers", key, section);
        return Vec3(v[0], v[1], v[2]);
    };
    auto scalar = [&](const std::string& section, const std::string& key, const std::string& raw) {
        const auto v = numbers(section, key, raw);
        if (v.size() != 1) throw fail("key '" + key + "' needs one number", key, section);
        return v[0];
    };

    {
        // read_ini drops empty sections, so headers are checked on the raw text
        std::istringstream lines(text);
        std::string ln;
        while (std::getline(lines, ln)) {
            const auto a = ln.find_first_not_of(" \t");
            if (a == std::string::npos || ln[a] != '[') continue;
            const auto b = ln.find(']', a);
            const std::string name = ln.substr(a + 1, b == std::string::npos ? std::string::npos : b - a - 1);
            if (name != "scenario" && name != "alpha" && name != "beta")
                throw fail("unknown section [" + name + "]", name, name);
        }
    }
    for (const auto& [section, body] : tree) {
        if (section != "scenario" && section != "alpha" && section != "beta")
            throw fail("unknown section [" + section + "]", section, section);
        if (body.empty() && !body.data().empty()) throw fail("key '" + section + "' outside a section", section, section);
    }
    const auto sc_node = tree.get_child_optional("scenario");
    if (!sc_node) throw ParseError(origin + ": missing section [scenario]", "scenario", 0);

    Scenario sc;
    for (const auto& [key, val] : *sc_node) {
        const std::string raw = val.data();
        if (key == "name") sc.name = raw;
        else if (key == "bc") {
            auto bc = parse_boundary_family(raw);
            if (!bc) throw fail("key 'bc': unknown boundary family '" + raw + "'", key, "scenario");
            sc.bc = *bc;
        } else if (key == "horizon") sc.horizon = scalar("scenario", key, raw);
        else if (key == "g") sc.g = vec3("scenario", key, raw);
        else if (key == "eps") sc.eps = scalar("scenario", key, raw);
        else throw fail("unknown key '" + key + "' in [scenario]", key, "scenario");
    }
    if (!sc_node->get_child_optional("g")) throw fail("missing required key 'g' in [scenario]", "g", "scenario");
    if (!sc_node->get_child_optional("horizon")) throw fail("missing required key 'horizon' in [scenario]", "horizon", "scenario");

    auto curve = [&](const std::string& section, const std::string& fallback_kind) {
        CurveSpec c;
        c.kind = fallback_kind;
        const auto node = tree.get_child_optional(section);
        if (!node) {
            if (section == "alpha") throw ParseError(origin + ": missing section [alpha]", "alpha", 0);
            return c;
        }
        for (const auto& [key, val] : *node) {
            const std::string raw = val.data();
            if (key == "kind") {
                c.kind = raw;
            } else if (key == "table") {
                std::istringstream rows(raw);
                std::string row;
                while (std::getline(rows, row, ';')) {
                    if (row.find_first_not_of(" \t") == std::string::npos) continue;
                    c.table.push_back(vec3(section, key, row));
                }
            } else {
                const auto v = numbers(section, key, raw);
                if (v.size() == 3) c.vectors[key] = Vec3(v[0], v[1], v[2]);
                else if (v.size() == 1) c.scalars[key] = v[0];
                else throw fail("key '" + key + "' needs one or three numbers", key, section);
            }
        }
        return c;
    };
    sc.alpha = curve("alpha", "line");
    sc.beta = curve("beta", "zero");
    return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read config " + path.string(), "", 0);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path.string());
}

/// Canonical text: fixed section order, sorted keys, shortest round-trip numbers.
inline std::string format_scenario(const Scenario& sc) {
    std::ostringstream out;
    out << "[scenario]\n";
    out << "name = " << sc.name << "\n";
    out << "bc = " << to_string(sc.bc) << "\n";
    out << "horizon = " << format_double(sc.horizon) << "\n";
    out << "g = " << format_vec(sc.g) << "\n";
    if (sc.eps) out << "eps = " << format_double(*sc.eps) << "\n";
    auto curve = [&](const char* section, const CurveSpec& c) {
        out << "\n[" << section << "]\n";
        out << "kind = " << c.kind << "\n";
        std::map<std::string, std::string> keys;
        for (const auto& [k, v] : c.scalars) keys[k] = format_double(v);
        for (const auto& [k, v] : c.vectors) keys[k] = format_vec(v);
        for (const auto& [k, v] : keys) out << k << " = " << v << "\n";
        if (!c.table.empty()) {
            out << "table = ";
            for (std::size_t i = 0; i < c.table.size(); ++i) out << (i ? "; " : "") << format_vec(c.table[i]);
            out << "\n";
        }
    };
    curve("alpha", sc.alpha);
    curve("beta", sc.beta);
    return out.str();
}

inline void save_scenario(const Scenario& sc, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << format_scenario(sc);
}

/// A preset name or a path to a config file.
inline Scenario resolve_scenario(const std::string& name_or_path) {
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return preset(name_or_path);
    if (std::filesystem::exists(name_or_path)) return load_scenario(name_or_path);
    throw UnknownPresetError(name_or_path, names);
}

/// Replace generator data by nodal tables sampled on the grid.
inline Scenario tabulate(const Scenario& sc, const Grid1D& grid) {
    const SampledScenario d = sample(sc, grid);
    Scenario out = sc;
    out.alpha = CurveSpec{"tabulated", {}, {}, {d.alpha.begin(), d.alpha.end()}};
    out.beta = CurveSpec{"tabulated", {}, {}, {d.beta.begin(), d.beta.end()}};
    return out;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

inline void csv_row(std::ostream& out, std::initializer_list<double> xs) {
    bool first = true;
    for (double x : xs) {
        out << (first ? "" : ",") << format_double(x);
        first = false;
    }
    out << "\n";
}

}  // namespace detail

inline void write_reg_csv(const RegTrajectory& tr, std::ostream& out) {
    out << "t,s,v_x,v_y,v_z,tau_x,tau_y,tau_z,kappa_x,kappa_y,kappa_z\n";
    for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
        const auto& st = tr.snapshots[k];
        const auto& kap = tr.kappa_history[k];
        for (std::size_t i = 0; i < st.v.size(); ++i) {
            const Vec3 &v = st.v[i], &ta = st.tau[i], &ka = kap[i];
            detail::csv_row(out, {st.t, st.v.grid().node(i), v[0], v[1], v[2], ta[0], ta[1], ta[2], ka[0], ka[1], ka[2]});
        }
    }
}

inline void write_ref_csv(const ConstrainedTrajectory& tr, std::ostream& out) {
    out << "t,s,eta_x,eta_y,eta_z,v_x,v_y,v_z,sigma\n";
    for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
        const auto& st = tr.snapshots[k];
        for (std::size_t i = 0; i < st.eta.size(); ++i) {
            const Vec3 &e = st.eta[i], &v = st.v[i];
            detail::csv_row(out, {st.t, st.eta.grid().node(i), e[0], e[1], e[2], v[0], v[1], v[2], tr.sigma[k][i]});
        }
    }
}

inline void write_tension_csv(const FieldScalar& sigma, std::ostream& out) {
    out << "s,sigma\n";
    for (std::size_t i = 0; i < sigma.size(); ++i) detail::csv_row(out, {sigma.grid().node(i), sigma[i]});
}

/// {times, K, P, E, E_eps, tension_L1, drift}; tension_L1 is the final
/// space-time value and drift the per-sample constraint drift.
inline nlohmann::json diagnostics_json(const DiagnosticsSeries& s) {
    nlohmann::json j;
    j["times"] = s.times;
    j["K"] = s.K;
    j["P"] = s.P;
    j["E"] = s.E;
    j["E_eps"] = s.E_eps;
    j["tension_L1"] = s.tension_L1_running.empty() ? 0.0 : s.tension_L1_running.back();
    j["drift"] = s.constraint_drift;
    return j;
}

inline std::string bin_key_string(const BinKey& k) {
    std::string s;
    for (std::size_t i = 0; i < k.size(); ++i) s += (i ? "," : "") + std::to_string(k[i]);
    return s;
}

/// {"radius", "bins", "cells": {"it,is": {nu: {bin: {weight, barycenter}},
/// lambda, nu_inf: {region: {weight, direction}}}}}; undefined cells omitted.
inline nlohmann::json measure_json(const EmpiricalYoungMeasure& ym) {
    nlohmann::json j;
    j["radius"] = ym.radius;
    j["bins"] = ym.options.bins;
    j["horizon"] = ym.options.T;
    j["cells_t"] = ym.options.cells_t;
    j["cells_s"] = ym.options.cells_s;
    j["sphere_cells"] = ym.options.sphere_cells;
    j["cells"] = nlohmann::json::object();
    for (std::size_t it = 0; it < ym.options.cells_t; ++it) {
        for (std::size_t is = 0; is < ym.options.cells_s; ++is) {
            const YMCell& c = ym.cell(it, is);
            if (!c.defined) continue;
            nlohmann::json cj;
            cj["nu"] = nlohmann::json::object();
            for (const auto& [key, bin] : c.nu) {
                cj["nu"][bin_key_string(key)] = {{"weight", bin.weight},
                                                 {"barycenter", std::vector<double>(bin.barycenter.begin(), bin.barycenter.end())}};
            }
            cj["lambda"] = c.lambda;
            cj["nu_inf"] = nlohmann::json::object();
            for (const auto& [region, d] : c.nu_inf) {
                cj["nu_inf"][std::to_string(region)] = {{"weight", d.weight},
                                                        {"direction", std::vector<double>(d.direction.begin(), d.direction.end())}};
            }
            j["cells"][std::to_string(it) + "," + std::to_string(is)] = std::move(cj);
        }
    }
    return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    auto out = detail::open_out(path);
    out << text;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

/// Reads a regularized-run CSV back into snapshots of gamma = (v, w) with
/// w = kappa/sqrt(eps + |kappa|^2) + kappa/sqrt|kappa|.
struct GammaRun {
    std::vector<double> times;
    std::vector<double> nodes;
    std::vector<std::vector<Vec6>> gamma;
};

inline GammaRun read_reg_csv(const std::filesystem::path& path, double eps) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read " + path.string(), "", 0);
    std::string line;
    std::getline(in, line);
    if (line.rfind("t,s,v_x", 0) != 0) throw ParseError(path.string() + ":1: not a regularized trajectory", "header", 1);
    GammaRun run;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> x;
        std::istringstream row(line);
        std::string tok;
        while (std::getline(row, tok, ',')) {
            double val = 0.0;
            auto res = std::from_chars(tok.data(), tok.data() + tok.size(), val);
            if (res.ec != std::errc()) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad number", "", lineno);
            x.push_back(val);
        }
        if (x.size() != 11) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 11 columns", "", lineno);
        if (run.times.empty() || x[0] != run.times.back()) {
            if (!run.times.empty() && !(x[0] > run.times.back()))
                throw ParseError(path.string() + ":" + std::to_string(lineno) + ": times not increasing", "t", lineno);
            run.times.push_back(x[0]);
            run.gamma.emplace_back();
        }
        if (run.times.size() == 1) run.nodes.push_back(x[1]);
        run.gamma.back().push_back(stack(Vec3(x[2], x[3], x[4]), w_from_kappa(Vec3(x[8], x[9], x[10]), eps)));
    }
    for (const auto& g : run.gamma)
        if (g.size() != run.nodes.size()) throw ParseError(path.string() + ": ragged snapshots", "", 0);
    return run;
}

}  // namespace whipdyn
