#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "whipdyn/scenario.hpp"
#include "whipdyn/tension.hpp"
#include "whipdyn/verify.hpp"

using namespace whipdyn;

namespace {

FieldScalar tension_of(const std::string& name, std::size_t n) {
    const Scenario sc = preset(name);
    const auto d = sample(sc, Grid1D(n));
    return initial_tension(d.alpha, d.beta, sc.bc, sc.g);
}

}  // namespace

TEST(Tension, BoundaryFamilyNames) {
    for (auto bc : {BoundaryFamily::TwoFixed, BoundaryFamily::TwoFree, BoundaryFamily::Periodic, BoundaryFamily::Whip})
        EXPECT_EQ(parse_boundary_family(to_string(bc)), bc);
    EXPECT_FALSE(parse_boundary_family("nonsense").has_value());
}

TEST(Tension, UprightIsMinusGs) {
    const auto sigma = tension_of("upright", 201);
    for (std::size_t i = 0; i < sigma.size(); ++i) EXPECT_NEAR(sigma[i], -9.8 * sigma.grid().node(i), 1e-10);
}

TEST(Tension, HangingIsPlusGs) {
    const auto sigma = tension_of("hanging", 201);
    for (std::size_t i = 0; i < sigma.size(); ++i) EXPECT_NEAR(sigma[i], 9.8 * sigma.grid().node(i), 1e-10);
}

TEST(Tension, ZeroDataTwoFreeIsZero) {
    const Grid1D g(21);
    const TensionProblem p{FieldScalar(g), FieldScalar(g), BoundaryFamily::TwoFree, Vec3::Zero(), {}};
    EXPECT_EQ(solve_tension(p, g).max_norm(), 0.0);
}

TEST(Tension, StraightLinePerpendicularToGravityIsTensionFree) {
    Scenario sc = preset("hanging");
    sc.alpha.vectors["direction"] = Vec3(1, 0, 0);
    const auto d = sample(sc, Grid1D(51));
    EXPECT_LT(initial_tension(d.alpha, d.beta, sc.bc, sc.g).max_norm(), 1e-12);
}

TEST(Tension, SpinningRingHasCentripetalTension) {
    // a ring of unit linear density spinning at unit speed carries tension v^2 = 1
    const auto sigma = tension_of("ring", 201);
    for (std::size_t i = 0; i < sigma.size(); ++i) EXPECT_NEAR(sigma[i], 1.0, 1e-3);
}

TEST(Tension, ManufacturedSolutionConvergesQuadratically) {
    // sigma* = sin(pi s / 2), |eta_ss|^2 = 1, g = 0, whip: sigma(0) = 0, sigma_s(1) = 0
    const double pi = std::numbers::pi;
    auto error = [&](std::size_t n) {
        const Grid1D g(n);
        TensionProblem p{FieldScalar(g), FieldScalar(g), BoundaryFamily::Whip, Vec3::Zero(), {Vec3(1, 0, 0), Vec3(1, 0, 0)}};
        for (std::size_t i = 0; i < n; ++i) {
            p.eta_ss_sq[i] = 1.0;
            p.eta_st_sq[i] = (pi * pi / 4.0 + 1.0) * std::sin(pi * g.node(i) / 2.0);
        }
        const auto sigma = solve_tension(p, g);
        EXPECT_LT(tension_residual(p, sigma), 1e-9);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(sigma[i] - std::sin(pi * g.node(i) / 2.0)));
        return err;
    };
    EXPECT_GE(error(101) / error(201), 3.5);
}

TEST(Tension, StraightStringWithTwoFixedEndsIsSingular) {
    const Grid1D g(11);
    const TensionProblem p{FieldScalar(g), FieldScalar(g), BoundaryFamily::TwoFixed, Vec3::Zero(), {}};
    try {
        solve_tension(p, g);
        FAIL() << "expected a singular system";
    } catch (const SingularSystemError& e) {
        ASSERT_EQ(e.null_direction().size(), 11u);
        EXPECT_NEAR(e.null_direction()[0], e.null_direction()[10], 1e-15);
    }
}

TEST(Tension, NegativeCoefficientsRejected) {
    const Grid1D g(11);
    TensionProblem p{FieldScalar(g), FieldScalar(g), BoundaryFamily::Whip, Vec3::Zero(), {}};
    p.eta_ss_sq[3] = -1.0;
    EXPECT_THROW(solve_tension(p, g), DomainError);
}

TEST(Tension, NonnegativityCheck) {
    const Grid1D g(11);
    const auto up = FieldScalar::sample(g, [](double s) { return 9.8 * s; });
    EXPECT_TRUE(check_nonnegativity(up, 1e-10).nonnegative);
    const auto down = FieldScalar::sample(g, [](double s) { return -9.8 * s; });
    const auto rep = check_nonnegativity(down, 1e-10);
    EXPECT_FALSE(rep.nonnegative);
    EXPECT_EQ(rep.argmin, 10u);
    EXPECT_EQ(rep.s_at_min, 1.0);
    EXPECT_TRUE(check_nonnegativity(FieldScalar(g)).nonnegative);
}

TEST(Tension, MaximumPrincipleBattery) {
    std::mt19937_64 rng(99);
    const Grid1D grid(201);
    const std::array<std::pair<BoundaryFamily, Vec3>, 3> cases{
        std::pair{BoundaryFamily::TwoFree, kDefaultGravity}, std::pair{BoundaryFamily::Whip, Vec3::Zero()},
        std::pair{BoundaryFamily::TwoFixed, Vec3::Zero()}};
    for (int k = 0; k < 100; ++k) {
        const auto& [bc, g] = cases[k % 3];
        const auto p = random_tension_problem(rng, bc, g, 201);
        const auto sigma = solve_tension(p, grid);
        double mn = 0.0;
        for (double x : sigma) mn = std::min(mn, x);
        EXPECT_GE(mn, -1e-8 * sigma.max_norm()) << "state " << k << " (" << to_string(bc) << ")";
        EXPECT_GT(sigma.max_norm(), 0.0);
    }
}
