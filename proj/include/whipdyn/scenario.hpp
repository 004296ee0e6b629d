#pragma once

// Scenario data: initial position alpha, initial velocity beta, gravity,
// boundary family, horizon. Curves are named generators with parameters (or
// tabulated nodal values) so that configs stay small and validation is exact.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "whipdyn/errors.hpp"
#include "whipdyn/grid.hpp"
#include "whipdyn/tension.hpp"

namespace whipdyn {

inline const Vec3 kDefaultGravity{0.0, 0.0, -9.8};

class UnknownPresetError : public Error {
public:
    UnknownPresetError(const std::string& name, std::vector<std::string> known)
        : Error(message(name, known)), known_(std::move(known)) {}
    const std::vector<std::string>& known() const noexcept { return known_; }

private:
    static std::string message(const std::string& name, const std::vector<std::string>& known) {
        std::string m = "unknown preset '" + name + "'; known presets:";
        for (const auto& k : known) m += " " + k;
        return m;
    }
    std::vector<std::string> known_;
};

/// A curve (alpha) or velocity profile (beta) given by a named generator.
///
/// alpha generators
///   line      alpha(s) = point + (s - anchor) * direction
///   folded    alpha(s) = point + direction * (1/2 - |s - 1/2|)
///   arc       circular arc of curvature `curvature` in the plane (e1, e2)
///             around `center`, centred at arclength `s_mid`, unit speed
///   smooth    alpha(s) = -(2/pi) cos(pi s / 2) * direction
///   tabulated nodal values (must match the grid size)
/// beta generators
///   zero, rotation (velocity + omega x (alpha - center)),
///   spin (speed * axis x (alpha - center)/|alpha - center|),
///   cosine (cos(pi s / 2) * amplitude), tabulated
struct CurveSpec {
    std::string kind = "zero";
    std::map<std::string, Vec3> vectors;
    std::map<std::string, double> scalars;
    std::vector<Vec3> table;

    Vec3 vec(const std::string& key, const Vec3& fallback = Vec3::Zero()) const {
        auto it = vectors.find(key);
        return it == vectors.end() ? fallback : it->second;
    }
    double num(const std::string& key, double fallback = 0.0) const {
        auto it = scalars.find(key);
        return it == scalars.end() ? fallback : it->second;
    }
};

struct Scenario {
    std::string name = "custom";
    CurveSpec alpha;
    CurveSpec beta;
    Vec3 g = kDefaultGravity;
    BoundaryFamily bc = BoundaryFamily::Whip;
    double horizon = 1.0;
    std::optional<double> eps;  // regularization used when none is given on the command line
};

namespace detail {

inline void require_table(const CurveSpec& c, const Grid1D& grid, const char* which) {
    if (c.table.size() != grid.size()) {
        throw SizeError(std::string(which) + ": tabulated data has " + std::to_string(c.table.size()) +
                        " nodes, grid has " + std::to_string(grid.size()));
    }
}

}  // namespace detail

inline Field3 sample_alpha(const CurveSpec& c, const Grid1D& grid) {
    if (c.kind == "line") {
        const Vec3 p = c.vec("point");
        const Vec3 d = c.vec("direction", Vec3(0, 0, 1));
        const double anchor = c.num("anchor", 1.0);
        return Field3::sample(grid, [&](double s) -> Vec3 { return p + (s - anchor) * d; });
    }
    if (c.kind == "folded") {
        const Vec3 p = c.vec("point");
        const Vec3 d = c.vec("direction", Vec3(0, 0, -1));
        return Field3::sample(grid, [&](double s) -> Vec3 { return p + d * (0.5 - std::abs(s - 0.5)); });
    }
    if (c.kind == "arc") {
        const double k = c.num("curvature", 2.0 * std::numbers::pi);
        const Vec3 center = c.vec("center");
        const Vec3 e1 = c.vec("e1", Vec3(1, 0, 0));
        const Vec3 e2 = c.vec("e2", Vec3(0, 1, 0));
        const double s_mid = c.num("s_mid", 0.0);
        if (!(k > 0.0)) throw DomainError("arc: curvature must be positive");
        const double R = 1.0 / k;
        return Field3::sample(grid, [&](double s) -> Vec3 {
            const double th = k * (s - s_mid);
            return center + R * (std::sin(th) * e1 - std::cos(th) * e2);
        });
    }
    if (c.kind == "smooth") {
        const Vec3 d = c.vec("direction", Vec3(0, 0, 1));
        return Field3::sample(grid, [&](double s) -> Vec3 {
            return -(2.0 / std::numbers::pi) * std::cos(0.5 * std::numbers::pi * s) * d;
        });
    }
    if (c.kind == "tabulated") {
        detail::require_table(c, grid, "alpha");
        return Field3(grid, c.table);
    }
    throw DomainError("unknown alpha generator '" + c.kind + "'");
}

inline Field3 sample_beta(const CurveSpec& c, const Field3& alpha) {
    const Grid1D& grid = alpha.grid();
    Field3 beta(grid);
    if (c.kind == "zero") return beta;
    if (c.kind == "rotation") {
        const Vec3 v0 = c.vec("velocity");
        const Vec3 omega = c.vec("omega");
        const Vec3 center = c.vec("center");
        for (std::size_t i = 0; i < grid.size(); ++i) beta[i] = v0 + omega.cross(alpha[i] - center);
        return beta;
    }
    if (c.kind == "spin") {
        const Vec3 axis = c.vec("axis", Vec3(0, 0, 1));
        const Vec3 center = c.vec("center");
        const double speed = c.num("speed", 1.0);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const Vec3 r = alpha[i] - center;
            const double rn = r.norm();
            beta[i] = rn > 0.0 ? Vec3(speed * axis.cross(r) / rn) : Vec3::Zero();
        }
        return beta;
    }
    if (c.kind == "cosine") {
        const Vec3 amp = c.vec("amplitude");
        for (std::size_t i = 0; i < grid.size(); ++i) {
            beta[i] = std::cos(0.5 * std::numbers::pi * grid.node(i)) * amp;
        }
        return beta;
    }
    if (c.kind == "tabulated") {
        detail::require_table(c, grid, "beta");
        return Field3(grid, c.table);
    }
    throw DomainError("unknown beta generator '" + c.kind + "'");
}

struct SampledScenario {
    Field3 alpha;
    Field3 beta;
};

inline SampledScenario sample(const Scenario& sc, const Grid1D& grid) {
    Field3 a = sample_alpha(sc.alpha, grid);
    Field3 b = sample_beta(sc.beta, a);
    return {std::move(a), std::move(b)};
}

/// Invariants every scenario must satisfy on a grid: |alpha_s| <= 1 on each
/// link (Lipschitz-1 data), alpha(1) = 0 for the whip, closure for the ring,
/// finite data and a positive horizon.
inline std::vector<Violation> scenario_violations(const Scenario& sc, const Grid1D& grid) {
    std::vector<Violation> out;
    if (!(sc.horizon >= 0.0) || !std::isfinite(sc.horizon)) out.push_back({"horizon must be finite and >= 0", -1, sc.horizon});
    if (!sc.g.allFinite()) out.push_back({"gravity must be finite", -1, 0.0});
    if (sc.eps && !(*sc.eps > 0.0 && *sc.eps <= 1.0)) out.push_back({"eps must lie in (0,1]", -1, *sc.eps});
    SampledScenario d = [&] {
        try {
            return sample(sc, grid);
        } catch (const Error& e) {
            out.push_back({e.what(), -1, 0.0});
            return SampledScenario{Field3(grid), Field3(grid)};
        }
    }();
    if (!out.empty() && out.back().node == -1 && !d.alpha.all_finite()) return out;
    const double h = grid.spacing();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!d.alpha[i].allFinite()) out.push_back({"alpha not finite", static_cast<std::ptrdiff_t>(i), 0.0});
        if (!d.beta[i].allFinite()) out.push_back({"beta not finite", static_cast<std::ptrdiff_t>(i), 0.0});
    }
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double slope = (d.alpha[i + 1] - d.alpha[i]).norm() / h;
        if (slope > 1.0 + 1e-9) out.push_back({"|alpha_s| <= 1", static_cast<std::ptrdiff_t>(i), slope});
    }
    if (sc.bc == BoundaryFamily::Whip && d.alpha[grid.last()].norm() > 1e-12) {
        out.push_back({"alpha(1) = 0 for the whip family", static_cast<std::ptrdiff_t>(grid.last()),
                       d.alpha[grid.last()].norm()});
    }
    if (sc.bc == BoundaryFamily::Periodic) {
        const double gap = (d.alpha[grid.last()] - d.alpha[0]).norm();
        if (gap > 1e-9) out.push_back({"alpha(0) = alpha(1) for the periodic family", 0, gap});
        const double vgap = (d.beta[grid.last()] - d.beta[0]).norm();
        if (vgap > 1e-9) out.push_back({"beta(0) = beta(1) for the periodic family", 0, vgap});
    }
    return out;
}

inline void validate(const Scenario& sc, const Grid1D& grid) {
    auto v = scenario_violations(sc, grid);
    if (!v.empty()) throw ValidationError(std::move(v));
}

inline std::vector<std::string> preset_names() {
    return {"upright", "hanging", "folded", "ring", "smooth", "pendulum", "skipping_rope", "tumbling_arc",
            "tumbling_ring"};
}

/// Closed-form scenarios. The first four are the classical examples (upright
/// unstable chain, hanging chain, chain folded with both ends together,
/// spinning ring); the rest are smooth compatible data for each boundary
/// family.
inline Scenario preset(const std::string& name, const Vec3& g = kDefaultGravity) {
    const double gn = g.norm();
    const Vec3 down = gn > 0.0 ? Vec3(g / gn) : Vec3(0, 0, -1);
    Scenario sc;
    sc.name = name;
    sc.g = g;
    if (name == "upright" || name == "hanging") {
        sc.alpha.kind = "line";
        sc.alpha.vectors["point"] = Vec3::Zero();
        sc.alpha.vectors["direction"] = name == "upright" ? down : Vec3(-down);
        sc.alpha.scalars["anchor"] = 1.0;
        sc.beta.kind = "zero";
        sc.bc = BoundaryFamily::Whip;
        sc.horizon = name == "upright" ? 5.0 : 10.0;
        return sc;
    }
    if (name == "folded") {
        sc.alpha.kind = "folded";
        sc.alpha.vectors["point"] = Vec3::Zero();
        sc.alpha.vectors["direction"] = down;
        sc.beta.kind = "zero";
        sc.bc = BoundaryFamily::Whip;
        sc.horizon = 2.0;
        return sc;
    }
    if (name == "ring") {
        sc.g = Vec3::Zero();
        sc.alpha.kind = "arc";
        sc.alpha.scalars["curvature"] = 2.0 * std::numbers::pi;
        sc.alpha.scalars["s_mid"] = 0.0;
        sc.beta.kind = "spin";
        sc.beta.vectors["axis"] = Vec3(0, 0, 1);
        sc.beta.scalars["speed"] = 1.0;
        sc.bc = BoundaryFamily::Periodic;
        sc.horizon = 1.0;
        return sc;
    }
    if (name == "smooth") {
        // alpha_s(0) = 0, alpha_ss(1) = 0, beta_s(0) = 0, beta(1) = 0
        sc.alpha.kind = "smooth";
        sc.alpha.vectors["direction"] = Vec3(1, 0, 0);
        sc.beta.kind = "cosine";
        sc.beta.vectors["amplitude"] = Vec3(0, 0.5, 0);
        sc.bc = BoundaryFamily::Whip;
        sc.horizon = 1.0;
        return sc;
    }
    if (name == "pendulum") {
        // straight chain tilted 60 degrees from the vertical, swinging about the fixed end
        const Vec3 side = std::abs(down.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
        const Vec3 e = (side - side.dot(down) * down).normalized();
        const double th = std::numbers::pi / 3.0;
        const Vec3 dir = -(std::cos(th) * down + std::sin(th) * e);
        sc.alpha.kind = "line";
        sc.alpha.vectors["point"] = Vec3::Zero();
        sc.alpha.vectors["direction"] = dir;
        sc.alpha.scalars["anchor"] = 1.0;
        sc.beta.kind = "rotation";
        sc.beta.vectors["omega"] = 1.5 * down.cross(e).normalized() + 0.8 * down;
        sc.bc = BoundaryFamily::Whip;
        sc.horizon = 1.0;
        return sc;
    }
    if (name == "skipping_rope") {
        // arc with chord < 1 between fixed ends, spun about the chord
        const double k = 3.0;
        const Vec3 e1(1, 0, 0);
        const Vec3 e2(0, 0, 1);
        sc.alpha.kind = "arc";
        sc.alpha.scalars["curvature"] = k;
        sc.alpha.scalars["s_mid"] = 0.5;
        sc.alpha.vectors["e1"] = e1;
        sc.alpha.vectors["e2"] = e2;
        sc.alpha.vectors["center"] = Vec3(0, 0, 1);
        sc.beta.kind = "rotation";
        sc.beta.vectors["omega"] = 2.0 * e1;
        sc.beta.vectors["center"] = Vec3(0, 0, 1.0 - std::cos(0.5 * k) / k);  // on the chord line
        sc.bc = BoundaryFamily::TwoFixed;
        sc.horizon = 1.0;
        return sc;
    }
    if (name == "tumbling_arc") {
        sc.alpha.kind = "arc";
        sc.alpha.scalars["curvature"] = 2.5;
        sc.alpha.scalars["s_mid"] = 0.5;
        sc.alpha.vectors["e1"] = Vec3(1, 0, 0);
        sc.alpha.vectors["e2"] = Vec3(0, 1, 0);
        sc.alpha.vectors["center"] = Vec3(0, 0, 2);
        sc.beta.kind = "rotation";
        sc.beta.vectors["omega"] = Vec3(0.7, 0.4, 2.0);
        sc.beta.vectors["center"] = Vec3(0, 0, 2);
        sc.beta.vectors["velocity"] = Vec3(0.3, 0, 1.0);
        sc.bc = BoundaryFamily::TwoFree;
        sc.horizon = 1.0;
        return sc;
    }
    if (name == "tumbling_ring") {
        sc.alpha.kind = "arc";
        sc.alpha.scalars["curvature"] = 2.0 * std::numbers::pi;
        sc.alpha.vectors["center"] = Vec3(0, 0, 1);
        sc.beta.kind = "rotation";
        sc.beta.vectors["omega"] = Vec3(8.0, 2.0, 3.0);
        sc.beta.vectors["center"] = Vec3(0, 0, 1);
        sc.beta.vectors["velocity"] = Vec3(0.5, 0, 0);
        sc.bc = BoundaryFamily::Periodic;
        sc.horizon = 1.0;
        return sc;
    }
    throw UnknownPresetError(name, preset_names());
}

/// Rotate the straight direction of a line scenario by `angle` radians in the
/// plane spanned by the direction and a horizontal axis.
inline Scenario tilted(Scenario sc, double angle) {
    if (sc.alpha.kind != "line") throw DomainError("tilted: only line scenarios can be tilted");
    const Vec3 d = sc.alpha.vec("direction");
    const Vec3 side = std::abs(d.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
    const Vec3 e = (side - side.dot(d) * d).normalized();
    sc.alpha.vectors["direction"] = std::cos(angle) * d + std::sin(angle) * e;
    sc.name += "_tilted";
    return sc;
}

}  // namespace whipdyn
