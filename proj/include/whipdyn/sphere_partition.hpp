#pragma once

// Recursive zonal equal-area partition of the unit sphere S^d in R^{d+1}
// (Leopardi's construction): two polar caps plus collars, each collar split
// by an equal-area partition of S^{d-1}. Every region has area |S^d| / N.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "whipdyn/errors.hpp"

namespace whipdyn {

namespace detail {

// int_0^theta sin^k(t) dt
inline double sin_power_integral(int k, double theta) {
    if (k == 0) return theta;
    if (k == 1) return 1.0 - std::cos(theta);
    return (-std::pow(std::sin(theta), k - 1) * std::cos(theta) + (k - 1) * sin_power_integral(k - 2, theta)) / k;
}

inline double sphere_area(int d) {
    // |S^d| = 2 pi^{(d+1)/2} / Gamma((d+1)/2)
    return 2.0 * std::pow(std::numbers::pi, 0.5 * (d + 1)) / std::tgamma(0.5 * (d + 1));
}

inline double cap_area(int d, double theta) {
    if (d == 1) return 2.0 * theta;
    return sphere_area(d - 1) * sin_power_integral(d - 1, theta);
}

inline double cap_colatitude(int d, double area) {
    const double total = sphere_area(d);
    if (area <= 0.0) return 0.0;
    if (area >= total) return std::numbers::pi;
    double lo = 0.0, hi = std::numbers::pi;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (cap_area(d, mid) < area ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct ZonalNode {
    int dim = 1;
    std::size_t count = 1;
    std::size_t offset = 0;            // index of the first region below this node
    std::vector<double> bounds;        // colatitude boundaries, size zones+1
    std::vector<std::size_t> per_zone; // regions per zone
    std::vector<std::unique_ptr<ZonalNode>> children;  // partition of S^{dim-1} for each collar
};

inline std::unique_ptr<ZonalNode> build_zonal(int d, std::size_t N, std::size_t offset) {
    auto node = std::make_unique<ZonalNode>();
    node->dim = d;
    node->count = N;
    node->offset = offset;
    if (N == 1 || d == 1) return node;
    const double area = sphere_area(d) / static_cast<double>(N);
    const double polar = cap_colatitude(d, area);
    const double ideal_angle = std::pow(area, 1.0 / d);
    const std::size_t collars =
        N == 2 ? 0 : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround((std::numbers::pi - 2.0 * polar) / ideal_angle)));
    std::vector<std::size_t> counts{1};
    if (collars > 0) {
        const double fitting = (std::numbers::pi - 2.0 * polar) / static_cast<double>(collars);
        double carry = 0.0;
        for (std::size_t c = 1; c <= collars; ++c) {
            const double a0 = cap_area(d, polar + (c - 1) * fitting);
            const double a1 = cap_area(d, polar + c * fitting);
            const double ideal = (a1 - a0) / area;
            const auto k = static_cast<std::size_t>(std::max(1L, std::lround(ideal + carry)));
            carry += ideal - static_cast<double>(k);
            counts.push_back(k);
        }
    }
    counts.push_back(1);
    // the last cap takes whatever is left so the counts add up to N
    std::size_t used = 0;
    for (std::size_t i = 0; i + 1 < counts.size(); ++i) used += counts[i];
    if (used >= N) throw NumericError("sphere partition: inconsistent collar counts");
    counts.back() = N - used;
    if (counts.back() != 1) {
        counts[counts.size() - 2] += counts.back() - 1;
        counts.back() = 1;
    }
    node->per_zone = counts;
    node->bounds.push_back(0.0);
    std::size_t cum = 0;
    for (std::size_t z = 0; z < counts.size(); ++z) {
        cum += counts[z];
        node->bounds.push_back(z + 1 == counts.size() ? std::numbers::pi : cap_colatitude(d, area * static_cast<double>(cum)));
    }
    std::size_t off = offset;
    for (std::size_t z = 0; z < counts.size(); ++z) {
        const bool cap = z == 0 || z + 1 == counts.size();
        node->children.push_back(cap ? nullptr : build_zonal(d - 1, counts[z], off));
        off += counts[z];
    }
    return node;
}

}  // namespace detail

/// Equal-area partition of S^d into N regions with point location.
class SpherePartition {
public:
    SpherePartition(int d, std::size_t regions) : d_(d), n_(regions) {
        if (d < 1) throw DomainError("SpherePartition: dimension must be >= 1");
        if (regions < 1) throw DomainError("SpherePartition: needs at least one region");
        root_ = detail::build_zonal(d, regions, 0);
    }

    int dimension() const noexcept { return d_; }
    std::size_t size() const noexcept { return n_; }

    /// Region index of a nonzero point of R^{d+1} (normalized internally).
    std::size_t locate(const Eigen::VectorXd& x) const {
        if (x.size() != d_ + 1) throw SizeError("SpherePartition::locate: wrong ambient dimension");
        const double r = x.norm();
        if (!(r > 0.0)) throw DomainError("SpherePartition::locate: zero vector");
        return locate_in(*root_, x / r);
    }

private:
    static std::size_t locate_in(const detail::ZonalNode& node, const Eigen::VectorXd& u) {
        if (node.count == 1) return node.offset;
        const int d = node.dim;
        if (d == 1) {
            double phi = std::atan2(u[1], u[0]);
            if (phi < 0.0) phi += 2.0 * std::numbers::pi;
            auto k = static_cast<std::size_t>(phi / (2.0 * std::numbers::pi) * static_cast<double>(node.count));
            return node.offset + std::min(k, node.count - 1);
        }
        // colatitude measured from the last axis
        const double theta = std::acos(std::clamp(u[d], -1.0, 1.0));
        std::size_t z = 0;
        while (z + 1 < node.per_zone.size() && theta >= node.bounds[z + 1]) ++z;
        if (!node.children[z]) {
            std::size_t off = node.offset;
            for (std::size_t k = 0; k < z; ++k) off += node.per_zone[k];
            return off;
        }
        Eigen::VectorXd rest = u.head(d);
        const double rn = rest.norm();
        if (rn > 0.0) rest /= rn;
        else rest = Eigen::VectorXd::Unit(d, 0);
        return locate_in(*node.children[z], rest);
    }

    int d_;
    std::size_t n_;
    std::unique_ptr<detail::ZonalNode> root_;
};

}  // namespace whipdyn
