#pragma once

// Uniform grid on [0,1], nodal fields, discrete s-calculus and the
// tridiagonal solvers shared by the tension problem and the steppers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "whipdyn/errors.hpp"

namespace whipdyn {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;

inline double norm_of(double x) { return std::abs(x); }
inline double norm_of(const Vec3& x) { return x.norm(); }

template <class T>
T zero_value() {
    if constexpr (std::is_arithmetic_v<T>) {
        return T(0);
    } else {
        return T::Zero();
    }
}

inline bool is_finite(double x) { return std::isfinite(x); }
inline bool is_finite(const Vec3& x) { return x.allFinite(); }

/// Uniform nodes s_i = i*h on [0,1], h = 1/(n-1), n >= 3.
class Grid1D {
public:
    explicit Grid1D(std::size_t n_nodes) : n_(n_nodes) {
        if (n_nodes < 3) {
            throw SizeError("Grid1D needs at least 3 nodes, got " + std::to_string(n_nodes));
        }
        h_ = 1.0 / static_cast<double>(n_ - 1);
    }

    std::size_t size() const noexcept { return n_; }
    double spacing() const noexcept { return h_; }
    /// Index of the last node (number of intervals).
    std::size_t last() const noexcept { return n_ - 1; }

    double node(std::size_t i) const noexcept {
        // exact endpoints, no accumulated rounding at s = 1
        return i == n_ - 1 ? 1.0 : static_cast<double>(i) * h_;
    }

    std::vector<double> nodes() const {
        std::vector<double> s(n_);
        for (std::size_t i = 0; i < n_; ++i) s[i] = node(i);
        return s;
    }

    /// Trapezoidal quadrature weight of node i.
    double weight(std::size_t i) const noexcept {
        return (i == 0 || i == n_ - 1) ? 0.5 * h_ : h_;
    }

    bool operator==(const Grid1D& other) const noexcept { return n_ == other.n_; }

private:
    std::size_t n_;
    double h_;
};

/// Nodal values on a Grid1D.
template <class T>
class Field {
public:
    using value_type = T;

    explicit Field(const Grid1D& grid) : grid_(grid), values_(grid.size(), zero_value<T>()) {}
    Field(const Grid1D& grid, std::vector<T> values) : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size()) {
            throw SizeError("field has " + std::to_string(values_.size()) + " values for a grid of " +
                            std::to_string(grid_.size()) + " nodes");
        }
    }

    template <class Fn>
    static Field sample(const Grid1D& grid, Fn&& fn) {
        Field f(grid);
        for (std::size_t i = 0; i < grid.size(); ++i) f[i] = fn(grid.node(i));
        return f;
    }

    const Grid1D& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }

    T& operator[](std::size_t i) { return values_[i]; }
    const T& operator[](std::size_t i) const { return values_[i]; }

    std::span<T> values() noexcept { return values_; }
    std::span<const T> values() const noexcept { return values_; }

    auto begin() noexcept { return values_.begin(); }
    auto end() noexcept { return values_.end(); }
    auto begin() const noexcept { return values_.begin(); }
    auto end() const noexcept { return values_.end(); }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](const T& x) { return is_finite(x); });
    }

    double max_norm() const {
        double m = 0.0;
        for (const auto& x : values_) m = std::max(m, norm_of(x));
        return m;
    }

    Field& operator+=(const Field& o) {
        check_same(o);
        for (std::size_t i = 0; i < size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    Field& operator-=(const Field& o) {
        check_same(o);
        for (std::size_t i = 0; i < size(); ++i) values_[i] -= o.values_[i];
        return *this;
    }
    Field& operator*=(double a) {
        for (auto& x : values_) x *= a;
        return *this;
    }

    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(double a, Field f) { return f *= a; }

    void check_same(const Field& o) const {
        if (!(grid_ == o.grid_)) throw SizeError("fields live on different grids");
    }

private:
    Grid1D grid_;
    std::vector<T> values_;
};

using Field3 = Field<Vec3>;
using FieldScalar = Field<double>;

/// How stencils close at s = 0 and s = 1.
enum class Stencil {
    OneSided,  // second-order one-sided differences at both ends
    Periodic,  // node n-1 is identified with node 0
};

namespace detail {

inline void require_nodes(std::size_t n, std::size_t need, const char* what) {
    if (n < need) {
        throw SizeError(std::string(what) + " needs at least " + std::to_string(need) + " nodes");
    }
}

// index of the periodic neighbour, distinct nodes are 0..n-2
inline std::size_t wrap(std::ptrdiff_t i, std::size_t period) {
    const auto p = static_cast<std::ptrdiff_t>(period);
    return static_cast<std::size_t>(((i % p) + p) % p);
}

}  // namespace detail

/// First s-derivative. Central in the interior; one-sided second order or
/// periodic wrap at the ends.
template <class T>
Field<T> derivative_s(const Field<T>& f, Stencil stencil = Stencil::OneSided) {
    const std::size_t n = f.size();
    detail::require_nodes(n, 3, "derivative_s");
    const double h = f.grid().spacing();
    Field<T> d(f.grid());
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    if (stencil == Stencil::Periodic) {
        const std::size_t period = n - 1;
        d[0] = (f[1] - f[detail::wrap(-1, period)]) / (2.0 * h);
        d[n - 1] = d[0];
    } else {
        d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
        d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    }
    return d;
}

/// Second s-derivative with the same closure conventions as derivative_s.
template <class T>
Field<T> second_derivative_s(const Field<T>& f, Stencil stencil = Stencil::OneSided) {
    const std::size_t n = f.size();
    detail::require_nodes(n, 3, "second_derivative_s");
    const double h2 = f.grid().spacing() * f.grid().spacing();
    Field<T> d(f.grid());
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
    if (stencil == Stencil::Periodic) {
        const std::size_t period = n - 1;
        d[0] = (f[1] - 2.0 * f[0] + f[detail::wrap(-1, period)]) / h2;
        d[n - 1] = d[0];
    } else if (n >= 4) {
        d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
        d[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
    } else {
        d[0] = d[1];
        d[n - 1] = d[1];
    }
    return d;
}

/// Trapezoidal rule over [0,1].
template <class T>
T integrate_s(const Field<T>& f) {
    detail::require_nodes(f.size(), 2, "integrate_s");
    T acc = zero_value<T>();
    for (std::size_t i = 0; i < f.size(); ++i) acc += f.grid().weight(i) * f[i];
    return acc;
}

/// Trapezoidal rule for a field given by a function of the node index.
template <class Fn>
double integrate_nodes(const Grid1D& grid, Fn&& fn) {
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) acc += grid.weight(i) * fn(i);
    return acc;
}

/// Thomas elimination for A x = b with A tridiagonal.
/// lower[i] multiplies x[i-1] (lower[0] ignored), upper[i] multiplies x[i+1]
/// (upper[n-1] ignored). Throws SingularSystemError on a vanishing pivot.
template <class T>
std::vector<T> solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                 std::span<const double> upper, std::span<const T> rhs) {
    const std::size_t n = diag.size();
    if (n == 0 || lower.size() != n || upper.size() != n || rhs.size() != n) {
        throw SizeError("solve_tridiagonal: inconsistent band/rhs lengths");
    }
    std::vector<double> c(n, 0.0);
    std::vector<T> x(rhs.begin(), rhs.end());
    auto row_scale = [&](std::size_t i) {
        return std::abs(diag[i]) + (i > 0 ? std::abs(lower[i]) : 0.0) + (i + 1 < n ? std::abs(upper[i]) : 0.0);
    };
    double pivot = diag[0];
    if (std::abs(pivot) <= 1e-14 * row_scale(0)) {
        throw SingularSystemError("solve_tridiagonal: zero pivot at row 0");
    }
    c[0] = (n > 1 ? upper[0] : 0.0) / pivot;
    x[0] = x[0] / pivot;
    for (std::size_t i = 1; i < n; ++i) {
        pivot = diag[i] - lower[i] * c[i - 1];
        if (std::abs(pivot) <= 1e-14 * row_scale(i)) {
            throw SingularSystemError("solve_tridiagonal: zero pivot at row " + std::to_string(i));
        }
        c[i] = (i + 1 < n ? upper[i] : 0.0) / pivot;
        x[i] = (x[i] - lower[i] * x[i - 1]) / pivot;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] = x[i] - c[i] * x[i + 1];
    return x;
}

template <class T>
std::vector<T> solve_tridiagonal(const std::vector<double>& lower, const std::vector<double>& diag,
                                 const std::vector<double>& upper, const std::vector<T>& rhs) {
    return solve_tridiagonal<T>(std::span<const double>(lower), std::span<const double>(diag),
                                std::span<const double>(upper), std::span<const T>(rhs));
}

/// Periodic tridiagonal system: lower[0] multiplies x[n-1] and upper[n-1]
/// multiplies x[0]. Sherman-Morrison correction of a Thomas solve.
template <class T>
std::vector<T> solve_cyclic_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                        std::span<const double> upper, std::span<const T> rhs) {
    const std::size_t n = diag.size();
    if (n < 3 || lower.size() != n || upper.size() != n || rhs.size() != n) {
        throw SizeError("solve_cyclic_tridiagonal: needs n >= 3 and consistent lengths");
    }
    const double alpha = upper[n - 1];  // A(n-1, 0)
    const double beta = lower[0];       // A(0, n-1)
    double gamma = -diag[0];
    if (gamma == 0.0) gamma = -1.0;
    std::vector<double> bb(diag.begin(), diag.end());
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - alpha * beta / gamma;

    std::vector<double> lo(lower.begin(), lower.end());
    std::vector<double> up(upper.begin(), upper.end());
    std::vector<T> x = solve_tridiagonal<T>(lo, bb, up, std::vector<T>(rhs.begin(), rhs.end()));
    std::vector<double> u(n, 0.0);
    u[0] = gamma;
    u[n - 1] = alpha;
    std::vector<double> z = solve_tridiagonal<double>(lo, bb, up, u);

    const double denom = 1.0 + z[0] + beta * z[n - 1] / gamma;
    if (std::abs(denom) <= 1e-14 * (1.0 + std::abs(z[0]) + std::abs(beta * z[n - 1] / gamma))) {
        throw SingularSystemError("solve_cyclic_tridiagonal: singular periodic system");
    }
    const T fact = (x[0] + (beta / gamma) * x[n - 1]) / denom;
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] - z[i] * fact;
    return x;
}

template <class T>
std::vector<T> solve_cyclic_tridiagonal(const std::vector<double>& lower, const std::vector<double>& diag,
                                        const std::vector<double>& upper, const std::vector<T>& rhs) {
    return solve_cyclic_tridiagonal<T>(std::span<const double>(lower), std::span<const double>(diag),
                                       std::span<const double>(upper), std::span<const T>(rhs));
}

/// y = A x for the (optionally cyclic) tridiagonal A.
template <class T>
std::vector<T> tridiagonal_multiply(const std::vector<double>& lower, const std::vector<double>& diag,
                                    const std::vector<double>& upper, const std::vector<T>& x,
                                    bool cyclic = false) {
    const std::size_t n = diag.size();
    std::vector<T> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        T acc = diag[i] * x[i];
        if (i > 0) acc += lower[i] * x[i - 1];
        else if (cyclic) acc += lower[0] * x[n - 1];
        if (i + 1 < n) acc += upper[i] * x[i + 1];
        else if (cyclic) acc += upper[n - 1] * x[0];
        y[i] = acc;
    }
    return y;
}

}  // namespace whipdyn
