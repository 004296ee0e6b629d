#pragma once

// Empirical generalized Young measures (nu, lambda, nu_inf) on the space-time
// box [0,T] x [0,1], pairings with integrands of quadratic growth, and the
// residual of the merged weak formulation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "whipdyn/errors.hpp"
#include "whipdyn/grid.hpp"
#include "whipdyn/maps.hpp"
#include "whipdyn/regdyn.hpp"
#include "whipdyn/sphere_partition.hpp"

namespace whipdyn {

struct YMSample {
    double t = 0.0;
    double s = 0.0;
    double weight = 0.0;  // quadrature weight in (t, s)
    Vec6 gamma = Vec6::Zero();
};

/// Space-time samples of a field given on snapshots: trapezoid weights in t
/// and s (a single snapshot gets unit time weight).
inline std::vector<YMSample> samples_from_snapshots(const std::vector<double>& times, const Grid1D& grid,
                                                    const std::vector<std::vector<Vec6>>& values) {
    if (times.empty() || values.size() != times.size()) throw SizeError("samples_from_snapshots: misaligned input");
    std::vector<YMSample> out;
    out.reserve(times.size() * grid.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (values[k].size() != grid.size()) throw SizeError("samples_from_snapshots: snapshot size mismatch");
        double wt = 1.0;
        if (times.size() > 1) {
            wt = 0.0;
            if (k > 0) wt += 0.5 * (times[k] - times[k - 1]);
            if (k + 1 < times.size()) wt += 0.5 * (times[k + 1] - times[k]);
        }
        for (std::size_t i = 0; i < grid.size(); ++i) out.push_back({times[k], grid.node(i), wt * grid.weight(i), values[k][i]});
    }
    return out;
}

/// gamma = (v, w) with w = kappa/sqrt(eps+|kappa|^2) + kappa/sqrt|kappa|.
inline std::vector<std::vector<Vec6>> gamma_fields(const RegTrajectory& tr) {
    std::vector<std::vector<Vec6>> out;
    for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
        const auto& st = tr.snapshots[k];
        std::vector<Vec6> g(st.v.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = stack(st.v[i], w_from_kappa(tr.kappa_history[k][i], st.eps));
        out.push_back(std::move(g));
    }
    return out;
}

inline std::vector<YMSample> gamma_samples(const RegTrajectory& tr) {
    if (tr.snapshots.empty()) throw SizeError("gamma_samples: empty trajectory");
    return samples_from_snapshots(tr.times(), tr.snapshots.front().v.grid(), gamma_fields(tr));
}

struct ValueBin {
    double weight = 0.0;
    Vec6 barycenter = Vec6::Zero();
};

struct DirectionBin {
    double weight = 0.0;
    Vec6 direction = Vec6::Zero();
};

using BinKey = std::array<int, 6>;

struct YMCell {
    double t0 = 0.0, t1 = 0.0, s0 = 0.0, s1 = 0.0;
    bool defined = false;
    double sample_mass = 0.0;
    std::map<BinKey, ValueBin> nu;
    double lambda = 0.0;
    std::map<std::size_t, DirectionBin> nu_inf;

    double area() const { return (t1 - t0) * (s1 - s0); }
};

struct YMOptions {
    double T = 1.0;
    std::size_t cells_t = 4;
    std::size_t cells_s = 8;
    std::size_t bins = 16;          // per axis over [-R, R]
    double radius = 0.0;            // 0 selects 5 x (99th percentile of |gamma|)
    std::size_t sphere_cells = 60;  // regions of S^5 for nu_inf
};

struct EmpiricalYoungMeasure {
    YMOptions options;
    double radius = 0.0;
    std::vector<YMCell> cells;  // index it * cells_s + is

    const YMCell& cell(std::size_t it, std::size_t is) const { return cells.at(it * options.cells_s + is); }
    double total_lambda() const {
        double l = 0.0;
        for (const auto& c : cells) l += c.lambda;
        return l;
    }
};

namespace detail {

inline double weighted_quantile(std::vector<std::pair<double, double>> vw, double q) {
    if (vw.empty()) return 0.0;
    std::sort(vw.begin(), vw.end());
    double total = 0.0;
    for (const auto& p : vw) total += p.second;
    double acc = 0.0;
    for (const auto& p : vw) {
        acc += p.second;
        if (acc >= q * total) return p.first;
    }
    return vw.back().first;
}

inline std::size_t cell_index(double x, double lo, double hi, std::size_t n) {
    const double u = (x - lo) / (hi - lo);
    if (!(u > 0.0)) return 0;
    return std::min(n - 1, static_cast<std::size_t>(u * static_cast<double>(n)));
}

}  // namespace detail

/// Histogram surrogate of the generalized Young measure generated by one or
/// more sampled fields (a list is treated as an equal-weight mixture).
inline EmpiricalYoungMeasure build_empirical(const std::vector<std::vector<YMSample>>& fields, const YMOptions& opt) {
    if (fields.empty()) throw SizeError("build_empirical: needs at least one field");
    if (opt.cells_t == 0 || opt.cells_s == 0 || opt.bins == 0) throw DomainError("build_empirical: empty partition");
    if (!(opt.T > 0.0)) throw DomainError("build_empirical: T must be positive");
    if (opt.radius < 0.0) throw DomainError("build_empirical: radius must be positive");

    EmpiricalYoungMeasure ym;
    ym.options = opt;
    double R = opt.radius;
    if (R == 0.0) {
        std::vector<std::pair<double, double>> vw;
        for (const auto& f : fields)
            for (const auto& x : f) vw.emplace_back(x.gamma.norm(), x.weight);
        const double q99 = detail::weighted_quantile(std::move(vw), 0.99);
        R = q99 > 0.0 ? 5.0 * q99 : 1.0;
    }
    ym.radius = R;
    const SpherePartition sphere(5, opt.sphere_cells);

    ym.cells.resize(opt.cells_t * opt.cells_s);
    for (std::size_t it = 0; it < opt.cells_t; ++it) {
        for (std::size_t is = 0; is < opt.cells_s; ++is) {
            auto& c = ym.cells[it * opt.cells_s + is];
            c.t0 = opt.T * static_cast<double>(it) / static_cast<double>(opt.cells_t);
            c.t1 = opt.T * static_cast<double>(it + 1) / static_cast<double>(opt.cells_t);
            c.s0 = static_cast<double>(is) / static_cast<double>(opt.cells_s);
            c.s1 = static_cast<double>(is + 1) / static_cast<double>(opt.cells_s);
        }
    }
    const double mix = 1.0 / static_cast<double>(fields.size());
    const double B = static_cast<double>(opt.bins);
    std::vector<double> retained(ym.cells.size(), 0.0);
    for (const auto& f : fields) {
        for (const auto& x : f) {
            if (!x.gamma.allFinite()) throw NumericError("build_empirical: non-finite sample");
            const std::size_t it = detail::cell_index(x.t, 0.0, opt.T, opt.cells_t);
            const std::size_t is = detail::cell_index(x.s, 0.0, 1.0, opt.cells_s);
            const std::size_t ci = it * opt.cells_s + is;
            auto& c = ym.cells[ci];
            const double w = mix * x.weight;
            c.sample_mass += w;
            const double r = x.gamma.norm();
            if (r <= R) {
                BinKey key;
                for (int k = 0; k < 6; ++k) {
                    const double u = (x.gamma[k] + R) / (2.0 * R) * B;
                    key[k] = static_cast<int>(std::clamp(std::floor(u), 0.0, B - 1.0));
                }
                auto& bin = c.nu[key];
                bin.weight += w;
                bin.barycenter += w * x.gamma;
                retained[ci] += w;
            } else {
                const double m = w * r * r;
                c.lambda += m;
                auto& d = c.nu_inf[sphere.locate(x.gamma)];
                d.weight += m;
                d.direction += m * x.gamma / r;
            }
        }
    }
    for (std::size_t ci = 0; ci < ym.cells.size(); ++ci) {
        auto& c = ym.cells[ci];
        c.defined = c.sample_mass > 0.0;
        if (!c.defined) continue;
        if (retained[ci] > 0.0) {
            for (auto& [key, bin] : c.nu) {
                bin.barycenter /= bin.weight;
                bin.weight /= retained[ci];
            }
        } else {
            // every sample concentrated: the oscillation part is a point mass at 0
            BinKey key;
            key.fill(static_cast<int>(opt.bins / 2));
            c.nu[key] = {1.0, Vec6::Zero()};
        }
        for (auto& [k, d] : c.nu_inf) {
            d.direction.normalize();
            d.weight /= c.lambda;
        }
    }
    return ym;
}

inline EmpiricalYoungMeasure build_empirical(const std::vector<YMSample>& field, const YMOptions& opt) {
    return build_empirical(std::vector<std::vector<YMSample>>{field}, opt);
}

using Integrand = std::function<double(const Vec6&)>;

/// Rejects integrands whose quadratic recession is absent or inconsistent
/// with the supplied f_inf: f(s z)/s^2 at s = 1e2, 1e3 must agree within 1%.
inline void check_recession(const Integrand& f, const Integrand& f_inf) {
    std::vector<Vec6> dirs;
    for (int k = 0; k < 6; ++k) {
        dirs.push_back(Vec6::Unit(k));
        dirs.push_back(-Vec6::Unit(k));
    }
    Vec6 d1, d2;
    d1 << 1, 1, 1, 1, 1, 1;
    d2 << 1, -2, 0.5, 0, 3, -1;
    dirs.push_back(d1.normalized());
    dirs.push_back(d2.normalized());
    for (const auto& z : dirs) {
        const double a = f(1e2 * z) / 1e4;
        const double b = f(1e3 * z) / 1e6;
        const double c = f_inf(z);
        if (!std::isfinite(a) || !std::isfinite(b) || std::abs(a - b) > 0.01 * std::max(1.0, std::abs(b)) ||
            std::abs(b - c) > 0.01 * std::max(1.0, std::abs(c))) {
            throw InvalidIntegrandError("integrand has no consistent quadratic recession (f(100z)/1e4 = " +
                                        std::to_string(a) + ", f(1000z)/1e6 = " + std::to_string(b) +
                                        ", f_inf(z) = " + std::to_string(c) + ")");
        }
    }
}

/// int <nu, f> + int <nu_inf, f_inf> lambda, summed over defined cells.
inline double pair_with(const Integrand& f, const Integrand& f_inf, const EmpiricalYoungMeasure& ym) {
    check_recession(f, f_inf);
    double acc = 0.0;
    for (const auto& c : ym.cells) {
        if (!c.defined) continue;
        double nu = 0.0;
        for (const auto& [key, bin] : c.nu) nu += bin.weight * f(bin.barycenter);
        double inf = 0.0;
        for (const auto& [k, d] : c.nu_inf) inf += d.weight * f_inf(d.direction);
        acc += c.area() * nu + c.lambda * inf;
    }
    return acc;
}

/// int <nu, |xi|^2> + lambda(closure of Omega).
inline double admissibility_mass(const EmpiricalYoungMeasure& ym) {
    return pair_with([](const Vec6& x) { return x.squaredNorm(); }, [](const Vec6&) { return 1.0; }, ym);
}

/// A test pair (phi, psi) with analytic derivatives.
struct TestFunctionPair {
    std::string id;
    std::function<Vec3(double, double)> phi, phi_t, phi_s;
    std::function<Vec3(double, double)> psi, psi_t, psi_s;

    Vec6 value(double t, double s) const { return stack(phi(t, s), psi(t, s)); }
    Vec6 d_t(double t, double s) const { return stack(phi_t(t, s), psi_t(t, s)); }
    Vec6 d_s(double t, double s) const { return stack(phi_s(t, s), psi_s(t, s)); }
};

/// Boundary conditions of the test space sampled on a 33-point mesh:
/// phi(s=1) = 0, phi_s(s=0) = 0, psi(s=0) = 0, psi_s(s=1) = 0, both zero at t = T.
inline std::vector<Violation> test_pair_violations(const TestFunctionPair& tf, double T, double tol = 1e-10) {
    std::vector<Violation> out;
    auto check = [&](const char* what, double v) {
        if (!(v <= tol)) out.push_back({std::string(what) + " (pair " + tf.id + ")", -1, v});
    };
    double m[6] = {0, 0, 0, 0, 0, 0};
    for (int k = 0; k <= 32; ++k) {
        const double t = T * k / 32.0;
        const double s = k / 32.0;
        m[0] = std::max(m[0], tf.phi(t, 1.0).norm());
        m[1] = std::max(m[1], tf.phi_s(t, 0.0).norm());
        m[2] = std::max(m[2], tf.phi(T, s).norm());
        m[3] = std::max(m[3], tf.psi(t, 0.0).norm());
        m[4] = std::max(m[4], tf.psi_s(t, 1.0).norm());
        m[5] = std::max(m[5], tf.psi(T, s).norm());
    }
    check("phi(s=1) = 0", m[0]);
    check("phi_s(s=0) = 0", m[1]);
    check("phi(t=T) = 0", m[2]);
    check("psi(s=0) = 0", m[3]);
    check("psi_s(s=1) = 0", m[4]);
    check("psi(t=T) = 0", m[5]);
    return out;
}

/// L2(Omega) Gram matrix of the pairs, int phi_a.phi_b + psi_a.psi_b.
inline Eigen::MatrixXd test_family_gram(const std::vector<TestFunctionPair>& family, double T) {
    static constexpr double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                    0.9061798459386640};
    static constexpr double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                    0.4786286704993665, 0.2369268850561891};
    constexpr int panels = 8;
    const auto n = static_cast<Eigen::Index>(family.size());
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    std::vector<Vec6> vals(family.size());
    for (int a = 0; a < panels; ++a) {
        for (int b = 0; b < panels; ++b) {
            for (int p = 0; p < 5; ++p) {
                for (int q = 0; q < 5; ++q) {
                    const double t = T * (a + 0.5 + 0.5 * x[p]) / panels;
                    const double s = (b + 0.5 + 0.5 * x[q]) / panels;
                    const double wq = 0.25 * w[p] * w[q] * (T / panels) / panels;
                    for (std::size_t k = 0; k < family.size(); ++k) vals[k] = family[k].value(t, s);
                    for (Eigen::Index i = 0; i < n; ++i)
                        for (Eigen::Index j = 0; j < n; ++j) gram(i, j) += wq * vals[i].dot(vals[j]);
                }
            }
        }
    }
    return gram;
}

/// Numerical rank of the Gram matrix (eigenvalues above 1e-10 of the largest).
inline std::size_t test_family_rank(const std::vector<TestFunctionPair>& family, double T) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(test_family_gram(family, T));
    const auto& ev = es.eigenvalues();
    const double top = ev.maxCoeff();
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) rank += ev[i] > 1e-10 * top ? 1 : 0;
    return rank;
}

/// Deterministic family: time factor (T - t) or t (T - t), spatial modes
/// cos((2m+1) pi s / 2) for phi and sin((2m+1) pi s / 2) for psi, along each
/// coordinate axis. The first 12 members use m in {0, 1}.
inline std::vector<TestFunctionPair> make_test_family(double T, std::size_t count) {
    if (count == 0) throw DomainError("make_test_family: count must be >= 1");
    if (!(T > 0.0)) throw DomainError("make_test_family: T must be positive");
    std::vector<TestFunctionPair> out;
    for (int m = 0; out.size() < count; ++m) {
        for (int tk = 0; tk < 2 && out.size() < count; ++tk) {
            for (int axis = 0; axis < 3 && out.size() < count; ++axis) {
                const double k = (2 * m + 1) * std::numbers::pi / 2.0;
                const Vec3 e = Vec3::Unit(axis);
                auto ft = [T, tk](double t) { return tk == 0 ? T - t : t * (T - t); };
                auto ft_t = [T, tk](double t) { return tk == 0 ? -1.0 : T - 2.0 * t; };
                TestFunctionPair p;
                p.id = "m" + std::to_string(m) + (tk == 0 ? "_lin" : "_quad") + "_" + "xyz"[axis];
                p.phi = [=](double t, double s) -> Vec3 { return ft(t) * std::cos(k * s) * e; };
                p.phi_t = [=](double t, double s) -> Vec3 { return ft_t(t) * std::cos(k * s) * e; };
                p.phi_s = [=](double t, double s) -> Vec3 { return -k * ft(t) * std::sin(k * s) * e; };
                p.psi = [=](double t, double s) -> Vec3 { return ft(t) * std::sin(k * s) * e; };
                p.psi_t = [=](double t, double s) -> Vec3 { return ft_t(t) * std::sin(k * s) * e; };
                p.psi_s = [=](double t, double s) -> Vec3 { return k * ft(t) * std::cos(k * s) * e; };
                out.push_back(std::move(p));
            }
        }
    }
    if (test_family_rank(out, T) != out.size()) throw NumericError("make_test_family: pairs are linearly dependent");
    return out;
}

/// Xi_0 = -int beta . phi(0) + int alpha . psi_s(0) - int int g . phi, the
/// space integrals by trapezoid on the data grid and the space-time one by
/// Gauss-Legendre.
inline double xi0(const Field3& alpha, const Field3& beta, const Vec3& g, const TestFunctionPair& tf, double T) {
    alpha.check_same(beta);
    const Grid1D& grid = alpha.grid();
    double acc = integrate_nodes(grid, [&](std::size_t i) {
        const double s = grid.node(i);
        return -beta[i].dot(tf.phi(0.0, s)) + alpha[i].dot(tf.psi_s(0.0, s));
    });
    static constexpr double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                    0.9061798459386640};
    static constexpr double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                    0.4786286704993665, 0.2369268850561891};
    constexpr int panels = 16;
    for (int a = 0; a < panels; ++a) {
        for (int b = 0; b < panels; ++b) {
            for (int p = 0; p < 5; ++p) {
                for (int q = 0; q < 5; ++q) {
                    const double t = T * (a + 0.5 + 0.5 * x[p]) / panels;
                    const double s = (b + 0.5 + 0.5 * x[q]) / panels;
                    acc -= 0.25 * w[p] * w[q] * (T / panels) * (1.0 / panels) * g.dot(tf.phi(t, s));
                }
            }
        }
    }
    return acc;
}

/// Weak residual of a single field gamma given on snapshots (limit maps for
/// eps = 0, otherwise the eps-maps):
/// int A(gamma) . Phi_t - int B(gamma) . Phi_s - Xi_0.
inline double weak_residual(const std::vector<double>& times, const Grid1D& grid,
                            const std::vector<std::vector<Vec6>>& gamma, const Field3& alpha, const Field3& beta,
                            const Vec3& g, const TestFunctionPair& tf, Eps maps = Eps(0.0)) {
    if (times.size() < 2) throw SizeError("weak_residual: needs at least two snapshots");
    const double T = times.back();
    if (auto v = test_pair_violations(tf, T); !v.empty()) throw ValidationError(std::move(v));
    const auto samples = samples_from_snapshots(times, grid, gamma);
    double acc = 0.0;
    for (const auto& x : samples) {
        const FluxValues fl = flux_maps(Gamma::from(x.gamma), maps);
        acc += x.weight * (fl.A.dot(tf.d_t(x.t, x.s)) - fl.B.dot(tf.d_s(x.t, x.s)));
    }
    return acc - xi0(alpha, beta, g, tf, T);
}

/// Weak residual of a regularized trajectory, gamma = (v, w).
inline double weak_residual(const RegTrajectory& tr, const Field3& alpha, const Field3& beta, const Vec3& g,
                            const TestFunctionPair& tf) {
    return weak_residual(tr.times(), tr.snapshots.front().v.grid(), gamma_fields(tr), alpha, beta, g, tf);
}

/// Weak residual of an empirical measure: cell averages of <nu, A>, <nu, B>
/// against Gauss-integrated test derivatives, plus the concentration term
/// lambda <nu_inf, B_inf> . Phi_s at the cell centre.
inline double weak_residual(const EmpiricalYoungMeasure& ym, const Field3& alpha, const Field3& beta, const Vec3& g,
                            const TestFunctionPair& tf) {
    const double T = ym.options.T;
    if (auto v = test_pair_violations(tf, T); !v.empty()) throw ValidationError(std::move(v));
    static constexpr double x[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
    static constexpr double w[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    const Eps limit(0.0);
    double acc = 0.0;
    for (const auto& c : ym.cells) {
        if (!c.defined) continue;
        Vec6 nuA = Vec6::Zero(), nuB = Vec6::Zero();
        for (const auto& [key, bin] : c.nu) {
            const FluxValues fl = flux_maps(Gamma::from(bin.barycenter), limit);
            nuA += bin.weight * fl.A;
            nuB += bin.weight * fl.B;
        }
        Vec6 dt = Vec6::Zero(), ds = Vec6::Zero();
        for (int p = 0; p < 3; ++p) {
            for (int q = 0; q < 3; ++q) {
                const double t = 0.5 * (c.t0 + c.t1) + 0.5 * (c.t1 - c.t0) * x[p];
                const double s = 0.5 * (c.s0 + c.s1) + 0.5 * (c.s1 - c.s0) * x[q];
                const double wq = 0.25 * w[p] * w[q] * c.area();
                dt += wq * tf.d_t(t, s);
                ds += wq * tf.d_s(t, s);
            }
        }
        acc += nuA.dot(dt) - nuB.dot(ds);
        if (c.lambda > 0.0) {
            Vec6 binf = Vec6::Zero();
            for (const auto& [k, d] : c.nu_inf) binf += d.weight * B_recession(Gamma::from(d.direction));
            acc -= c.lambda * binf.dot(tf.d_s(0.5 * (c.t0 + c.t1), 0.5 * (c.s0 + c.s1)));
        }
    }
    return acc - xi0(alpha, beta, g, tf, T);
}

}  // namespace whipdyn
