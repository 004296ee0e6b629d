#include <cstdlib>

#include <gtest/gtest.h>

#include "whipdyn/sweep.hpp"

using namespace whipdyn;

namespace {

SweepOptions quick(std::vector<double> eps) {
    SweepOptions o;
    o.eps_list = std::move(eps);
    o.nodes = 41;
    o.horizon = 0.2;
    o.snapshots = 20;
    o.test_pairs = 6;
    return o;
}

}  // namespace

TEST(Sweep, EpsListValidation) {
    EXPECT_TRUE(eps_list_violations({0.1, 0.03, 0.01}).empty());
    EXPECT_FALSE(eps_list_violations({}).empty());
    EXPECT_FALSE(eps_list_violations({0.1, 0.1}).empty());
    EXPECT_FALSE(eps_list_violations({0.01, 0.1}).empty());
    EXPECT_FALSE(eps_list_violations({0.0}).empty());
    EXPECT_FALSE(eps_list_violations({1.5}).empty());
    EXPECT_THROW(sweep_epsilon(preset("upright"), quick({0.1, 0.1})), ValidationError);
    EXPECT_THROW(sweep_epsilon(preset("ring"), quick({0.1})), DomainError);
}

TEST(Sweep, ThreadCountFollowsEnvironment) {
    ::setenv("WHIPDYN_THREADS", "3", 1);
    EXPECT_EQ(sweep_threads(10), 3u);
    EXPECT_EQ(sweep_threads(2), 2u);
    ::setenv("WHIPDYN_THREADS", "garbage", 1);
    EXPECT_GE(sweep_threads(10), 1u);
    ::unsetenv("WHIPDYN_THREADS");
}

TEST(Sweep, SingleEpsGivesOneRow) {
    const auto rep = sweep_epsilon(preset("upright"), quick({0.1}));
    ASSERT_EQ(rep.rows.size(), 1u);
    EXPECT_TRUE(rep.all_ok());
    EXPECT_EQ(rep.pair_ids.size(), 6u);
    EXPECT_EQ(rep.rows[0].residuals.size(), 6u);
    EXPECT_TRUE(rep.rows[0].energy_monotone);
    EXPECT_EQ(spread_ratio(rep, &SweepRow::tension_l1), 1.0);
    ASSERT_TRUE(rep.measure.has_value());
    EXPECT_NEAR(rep.measure->options.T, 0.2, 1e-15);
}

TEST(Sweep, ResultsDoNotDependOnThreadCount) {
    const auto opts = quick({0.1, 0.05, 0.03});
    ::setenv("WHIPDYN_THREADS", "1", 1);
    const auto a = sweep_epsilon(preset("upright"), opts);
    ::setenv("WHIPDYN_THREADS", "3", 1);
    const auto b = sweep_epsilon(preset("upright"), opts);
    ::unsetenv("WHIPDYN_THREADS");
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
        EXPECT_EQ(a.rows[k].eps, b.rows[k].eps);
        EXPECT_EQ(a.rows[k].tension_l1, b.rows[k].tension_l1);
        EXPECT_EQ(a.rows[k].sup_kinetic, b.rows[k].sup_kinetic);
        EXPECT_EQ(a.rows[k].residuals, b.rows[k].residuals);
    }
    EXPECT_EQ(a.measure->total_lambda(), b.measure->total_lambda());
}

TEST(Sweep, HookSeesEveryRun) {
    std::vector<int> seen(3, 0);
    sweep_epsilon(preset("upright"), quick({0.1, 0.05, 0.03}),
                  [&](std::size_t k, double, const RegTrajectory& tr) {
                      EXPECT_FALSE(tr.snapshots.empty());
                      ++seen[k];
                  });
    EXPECT_EQ(seen, std::vector<int>(3, 1));
}

TEST(Sweep, UprightBoundsAreUniform) {
    SweepOptions o;
    o.eps_list = {0.1, 0.03, 0.01};
    o.nodes = 51;
    o.horizon = 1.0;
    o.test_pairs = 12;
    const auto rep = sweep_epsilon(preset("upright"), o);
    ASSERT_TRUE(rep.all_ok());
    EXPECT_LE(spread_ratio(rep, &SweepRow::tension_l1), 3.0);
    EXPECT_LE(spread_ratio(rep, &SweepRow::sup_kinetic), 3.0);
    for (const auto& r : rep.rows) EXPECT_TRUE(r.energy_monotone) << r.eps;
    EXPECT_TRUE(residual_monotone(rep));
}
