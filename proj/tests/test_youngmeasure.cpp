#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "whipdyn/youngmeasure.hpp"

using namespace whipdyn;

namespace {

// Snapshots at uniform times in [0, T] of a field f(t, s) on n nodes.
std::vector<YMSample> sampled(std::size_t nt, std::size_t n, double T, const std::function<Vec6(double, double)>& f) {
    const Grid1D grid(n);
    std::vector<double> times;
    std::vector<std::vector<Vec6>> vals;
    for (std::size_t k = 0; k < nt; ++k) {
        const double t = T * static_cast<double>(k) / static_cast<double>(nt - 1);
        times.push_back(t);
        std::vector<Vec6> row(n);
        for (std::size_t i = 0; i < n; ++i) row[i] = f(t, grid.node(i));
        vals.push_back(std::move(row));
    }
    return samples_from_snapshots(times, grid, vals);
}

double square(const Vec6& x) { return x.squaredNorm(); }
double one(const Vec6&) { return 1.0; }

}  // namespace

TEST(YoungMeasure, ConstantFieldIsPointMass) {
    Vec6 c;
    c << 0.3, -0.2, 0.1, 0.5, 0.0, -0.4;
    YMOptions o;
    const auto ym = build_empirical(sampled(9, 65, 1.0, [&](double, double) { return c; }), o);
    EXPECT_EQ(ym.total_lambda(), 0.0);
    for (const auto& cell : ym.cells) {
        ASSERT_TRUE(cell.defined);
        ASSERT_EQ(cell.nu.size(), 1u);
        EXPECT_NEAR(cell.nu.begin()->second.weight, 1.0, 1e-12);
        EXPECT_LT((cell.nu.begin()->second.barycenter - c).norm(), 1e-12);
    }
    EXPECT_NEAR(pair_with(square, one, ym), c.squaredNorm(), 1e-12);
}

class Oscillation : public ::testing::TestWithParam<int> {};

TEST_P(Oscillation, SplitsIntoTwoAtoms) {
    const int m = GetParam();
    // square wave of +-1 in the first component with m periods on [0, 1]
    auto f = [m](double, double s) {
        Vec6 x = Vec6::Zero();
        x[0] = std::sin(2.0 * std::numbers::pi * m * s + 0.1) >= 0.0 ? 1.0 : -1.0;
        return x;
    };
    YMOptions o;
    const auto ym = build_empirical(sampled(9, 64 * static_cast<std::size_t>(m) + 1, 1.0, f), o);
    EXPECT_EQ(ym.total_lambda(), 0.0);
    for (const auto& cell : ym.cells) {
        ASSERT_TRUE(cell.defined);
        ASSERT_EQ(cell.nu.size(), 2u);
        for (const auto& [key, bin] : cell.nu) {
            EXPECT_NEAR(bin.weight, 0.5, 0.05);
            EXPECT_NEAR(std::abs(bin.barycenter[0]), 1.0, 1e-12);
        }
    }
    const double x2 = pair_with([](const Vec6& x) { return x[0] * x[0]; }, [](const Vec6& z) { return z[0] * z[0]; }, ym);
    EXPECT_NEAR(x2, 1.0, 0.05);
    // the first moment averages out
    double mean = 0.0;
    for (const auto& [key, bin] : ym.cell(0, 0).nu) mean += bin.weight * bin.barycenter[0];
    EXPECT_LT(std::abs(mean), 0.1);
}

INSTANTIATE_TEST_SUITE_P(Frequencies, Oscillation, ::testing::Values(64, 128, 256));

TEST(YoungMeasure, ConcentrationGoesToLambda) {
    const std::size_t n = 1001;
    const double h = 1.0 / static_cast<double>(n - 1);
    // spike of height c on three interior nodes: int int |gamma|^2 = 3 h c^2 = 1
    const double c = std::sqrt(1.0 / (3.0 * h));
    auto f = [&](double, double s) {
        Vec6 x = Vec6::Zero();
        if (std::abs(s - 0.3) < 1.5 * h) x[2] = c;
        return x;
    };
    YMOptions o;
    const auto ym = build_empirical(sampled(11, n, 1.0, f), o);
    EXPECT_NEAR(ym.total_lambda(), 1.0, 0.05);
    for (const auto& cell : ym.cells) {
        ASSERT_TRUE(cell.defined);
        ASSERT_EQ(cell.nu.size(), 1u);
        EXPECT_EQ(cell.nu.begin()->second.barycenter.norm(), 0.0);
        EXPECT_NEAR(cell.nu.begin()->second.weight, 1.0, 1e-12);
        if (cell.lambda > 0.0) {
            ASSERT_EQ(cell.nu_inf.size(), 1u);
            const auto& d = cell.nu_inf.begin()->second;
            EXPECT_NEAR(d.weight, 1.0, 1e-12);
            EXPECT_GT(d.direction.dot(Vec6::Unit(2)), 1.0 - 1e-12);
        }
    }
    EXPECT_NEAR(pair_with(square, one, ym), 1.0, 0.05);
    EXPECT_NEAR(admissibility_mass(ym), 1.0, 0.05);
}

TEST(YoungMeasure, PairingWithConstantGivesVolume) {
    YMOptions o;
    o.T = 2.0;
    const auto ym = build_empirical(sampled(9, 33, 2.0, [](double t, double s) {
                                        Vec6 x = Vec6::Zero();
                                        x[4] = t - s;
                                        return x;
                                    }),
                                    o);
    EXPECT_NEAR(pair_with(one, [](const Vec6&) { return 0.0; }, ym), 2.0, 1e-12);
}

TEST(YoungMeasure, InvalidRecessionRejected) {
    YMOptions o;
    const auto ym = build_empirical(sampled(3, 9, 1.0, [](double, double) { return Vec6::Zero(); }), o);
    auto cube = [](const Vec6& x) { return std::pow(x.norm(), 3); };
    EXPECT_THROW(pair_with(cube, one, ym), InvalidIntegrandError);
    EXPECT_THROW(pair_with(square, [](const Vec6&) { return 2.0; }, ym), InvalidIntegrandError);
    EXPECT_NO_THROW(pair_with([](const Vec6& x) { return x.squaredNorm() + x[0]; }, one, ym));
}

TEST(YoungMeasure, EmptyCellsAreUndefined) {
    const Grid1D grid(17);
    const std::vector<double> times{0.0, 0.1, 0.2};
    const std::vector<std::vector<Vec6>> vals(3, std::vector<Vec6>(17, Vec6::Ones()));
    YMOptions o;
    o.cells_t = 4;
    const auto ym = build_empirical(samples_from_snapshots(times, grid, vals), o);
    for (std::size_t is = 0; is < o.cells_s; ++is) {
        EXPECT_TRUE(ym.cell(0, is).defined);
        for (std::size_t it = 1; it < 4; ++it) EXPECT_FALSE(ym.cell(it, is).defined);
    }
}

TEST(YoungMeasure, RadiusPolicy) {
    YMOptions o;
    const auto zero = build_empirical(sampled(3, 9, 1.0, [](double, double) { return Vec6::Zero(); }), o);
    EXPECT_EQ(zero.radius, 1.0);
    const auto ones = build_empirical(sampled(3, 9, 1.0, [](double, double) { return Vec6::Unit(1); }), o);
    EXPECT_NEAR(ones.radius, 5.0, 1e-12);
    o.radius = 2.5;
    EXPECT_EQ(build_empirical(sampled(3, 9, 1.0, [](double, double) { return Vec6::Unit(1); }), o).radius, 2.5);
    o.radius = -1.0;
    EXPECT_THROW(build_empirical(sampled(3, 9, 1.0, [](double, double) { return Vec6::Unit(1); }), o), DomainError);
}

TEST(YoungMeasure, TestFamilySatisfiesBoundaryConditions) {
    const double T = 1.7;
    const auto fam = make_test_family(T, 12);
    ASSERT_EQ(fam.size(), 12u);
    for (const auto& p : fam) {
        EXPECT_TRUE(test_pair_violations(p, T).empty()) << p.id;
        // oracle: the boundary values by direct evaluation
        for (double x : {0.0, 0.25, 0.5, 1.0}) {
            EXPECT_LT(p.phi(x * T, 1.0).norm(), 1e-12);
            EXPECT_LT(p.psi(x * T, 0.0).norm(), 1e-12);
            EXPECT_LT(p.phi(T, x).norm() + p.psi(T, x).norm(), 1e-12);
        }
        // derivatives agree with central differences
        const double t = 0.4, s = 0.3, d = 1e-6;
        EXPECT_LT((p.d_t(t, s) - (p.value(t + d, s) - p.value(t - d, s)) / (2 * d)).norm(), 1e-6);
        EXPECT_LT((p.d_s(t, s) - (p.value(t, s + d) - p.value(t, s - d)) / (2 * d)).norm(), 1e-6);
    }
    EXPECT_EQ(test_family_rank(fam, T), 12u);
    const auto single = make_test_family(T, 1);
    ASSERT_EQ(single.size(), 1u);
    EXPECT_GT(single.front().value(0.0, 0.5).norm(), 0.1);
    EXPECT_THROW(make_test_family(T, 0), DomainError);
}

TEST(YoungMeasure, ZeroFieldsGiveZeroResidual) {
    const Grid1D grid(41);
    const Field3 z(grid);
    std::vector<double> times;
    for (int k = 0; k <= 20; ++k) times.push_back(k / 20.0);
    const std::vector<std::vector<Vec6>> gamma(times.size(), std::vector<Vec6>(41, Vec6::Zero()));
    for (const auto& p : make_test_family(1.0, 12))
        EXPECT_NEAR(weak_residual(times, grid, gamma, z, z, Vec3::Zero(), p), 0.0, 1e-14) << p.id;
}

TEST(YoungMeasure, HangingChainSatisfiesWeakForm) {
    const Vec3 g = kDefaultGravity;
    const Scenario sc = preset("hanging");
    const Grid1D grid(201);
    const auto d = sample(sc, grid);
    // static solution: v = 0, tension 9.8 s along alpha_s = e_z, w = e_z (1 + sqrt(9.8 s))
    std::vector<double> times;
    std::vector<std::vector<Vec6>> gamma;
    for (int k = 0; k <= 100; ++k) {
        times.push_back(k / 100.0);
        std::vector<Vec6> row(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i)
            row[i] = stack(Vec3::Zero(), Vec3(0, 0, 1) * (1.0 + std::sqrt(9.8 * grid.node(i))));
        gamma.push_back(std::move(row));
    }
    for (const auto& p : make_test_family(1.0, 12))
        EXPECT_LT(std::abs(weak_residual(times, grid, gamma, d.alpha, d.beta, g, p)), 1e-3) << p.id;
    // the wrong orientation is clearly rejected
    for (auto& row : gamma)
        for (auto& x : row) x.tail<3>() *= -1.0;
    double worst = 0.0;
    for (const auto& p : make_test_family(1.0, 12))
        worst = std::max(worst, std::abs(weak_residual(times, grid, gamma, d.alpha, d.beta, g, p)));
    EXPECT_GT(worst, 0.5);
}

TEST(YoungMeasure, SpherePartitionHasEqualAreas) {
    // Monte Carlo oracle: uniform directions on S^5 land evenly in the regions
    const SpherePartition sp(5, 60);
    std::vector<int> hits(60, 0);
    std::mt19937 rng(7);
    std::normal_distribution<double> n01;
    const int draws = 120000;
    for (int k = 0; k < draws; ++k) {
        Eigen::VectorXd x(6);
        for (int j = 0; j < 6; ++j) x[j] = n01(rng);
        ++hits.at(sp.locate(x / x.norm()));
    }
    for (int h : hits) EXPECT_NEAR(h, draws / 60.0, 0.1 * draws / 60.0);
}
