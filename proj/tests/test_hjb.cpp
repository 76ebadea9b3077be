#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fbas/hjb.hpp"
#include "fbas/rng.hpp"
#include "fbas/testing/oracles.hpp"
#include "fbas/testing/selftest.hpp"

using namespace fbas;
using Catch::Approx;

TEST_CASE("zero horizon gives zero values") {
  const auto sol = solve_finite_horizon({0.01, 1, 1, 10, 10, 0, 0}, target_objective(0, 0.1, 0), {-2, 2},
                                        ActionGrid::uniform(0.0, 0.2, 3, 3), {0, 1.0, 1.0, {}});
  CHECK(sol.horizon() == 0);
  for (double v : sol.final_values()) CHECK(v == 0.0);
  CHECK(sol.policy.empty());
}

TEST_CASE("one-step values equal the best expected reward") {
  const MarketParams xi{0.01, 1.0, 1.0, 10.0, 10.0, 0.0, 0.0};
  const ActionGrid actions(std::vector<QuoteAction>{{0.1, 0.1}});
  const ObjectiveVector z{1.0, 0.0, 0.0, 0.0};
  const auto sol = solve_finite_horizon(xi, z, {-1, 1}, actions, {1, 1.0, 1.0, {}});
  const double p = 1.0 - std::exp(-std::exp(-1.0));
  CHECK(sol.final_values()[1] == Approx(2 * p * 0.1).epsilon(1e-14));
  // Edge states quote one side only.
  CHECK(sol.final_values()[0] == Approx(p * 0.1).epsilon(1e-14));
  CHECK(sol.final_values()[2] == Approx(p * 0.1).epsilon(1e-14));
}

TEST_CASE("property: vector recursion equals the scalar DP oracle") {
  RandomStream rng(77);
  HjbSolver solver;
  double worst = 0.0;
  for (int k = 0; k < 150; ++k) {
    const auto r = testing::random_instance(rng);
    const auto sol = solver.solve(r.xi, r.z, r.grid, r.actions, r.settings);
    const auto oracle = testing::oracle_values(r);
    for (std::size_t i = 0; i < oracle.size(); ++i) worst = std::max(worst, std::abs(sol.final_values()[i] - oracle[i]));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("property: scalar layers are U . z and the policy is greedy on F") {
  RandomStream rng(78);
  for (int k = 0; k < 40; ++k) {
    const auto r = testing::random_instance(rng);
    const auto sol = solve_finite_horizon(r.xi, r.z, r.grid, r.actions, r.settings);
    for (int n = 1; n <= sol.horizon(); ++n) {
      const auto& U = sol.layers[n].values;
      const auto& Uprev = sol.layers[n - 1].values;
      const auto V = scalar_value(U, r.z);
      for (std::size_t i = 0; i < U.size(); ++i) {
        REQUIRE(V[i] == sol.scalar[n][i]);
        const int q = r.grid.state(i);
        std::vector<FeatureVector> F;
        for (const auto& a : r.actions.actions()) F.push_back(forward_features(q, a, Uprev, r.grid, r.xi, r.settings));
        const std::size_t best = select_action(F, r.z);
        // The fast argmax may pick a different action only on an exact tie.
        const std::size_t chosen = sol.policy[n - 1][i];
        REQUIRE(std::abs(r.z.dot(F[chosen]) - r.z.dot(F[best])) <= 1e-12 * std::max(1.0, std::abs(r.z.dot(F[best]))));
        const auto& Fc = F[chosen];
        REQUIRE(U[i].pnl == Approx(Fc.pnl).epsilon(1e-12).margin(1e-15));
        REQUIRE(U[i].q_next == Approx(Fc.q_next).epsilon(1e-12).margin(1e-15));
        REQUIRE(U[i].q2_next == Approx(Fc.q2_next).epsilon(1e-12).margin(1e-15));
        REQUIRE(U[i].adv == Approx(Fc.adv).epsilon(1e-12).margin(1e-15));
      }
    }
  }
}

TEST_CASE("select_action breaks ties toward the lowest index") {
  const std::vector<FeatureVector> F{{1, 0, 0, 0}, {2, 0, 0, 0}, {2, 0, 0, 0}};
  CHECK(select_action(F, {1, 0, 0, 0}) == 1);
  CHECK_THROWS_AS(select_action(std::vector<FeatureVector>{}, ObjectiveVector{}), InfeasibleState);
}

TEST_CASE("identical actions resolve to the first in grid order") {
  const ActionGrid g(std::vector<QuoteAction>{{0.2, 0.1}, {0.1, 0.1}, {0.1, 0.1}});
  CHECK(g[0] == QuoteAction{0.1, 0.1});
  const auto sol = solve_finite_horizon({0.01, 1, 1, 10, 10, 0, 0}, target_objective(0, 0.1, 0), {-1, 1}, g,
                                        {2, 1.0, 1.0, {}});
  for (const auto& layer : sol.policy)
    for (std::size_t a : layer) CHECK(a != 1);
}

TEST_CASE("inventory aversion skews the policy") {
  const MarketParams xi{0.01, 1.0, 1.0, 20.0, 20.0, 0.0, 0.0};
  const auto actions = ActionGrid::uniform(0.0, 0.3, 16, 16);
  const auto sol = solve_finite_horizon(xi, target_objective(0.0, 0.01, 0.0), {-5, 5}, actions, {5, 1.0, 1.0, {}});
  const auto& pol = sol.policy.back();
  const InventoryGrid grid{-5, 5};
  const auto long_action = actions[pol[grid.index(3)]];
  const auto short_action = actions[pol[grid.index(-3)]];
  CHECK(long_action.delta_bid > long_action.delta_ask);
  CHECK(short_action.delta_bid < short_action.delta_ask);
  // Symmetric market: V is even in q.
  for (int q = 1; q <= 5; ++q)
    CHECK(sol.final_values()[grid.index(q)] == Approx(sol.final_values()[grid.index(-q)]).epsilon(1e-12));
}

TEST_CASE("grid and settings validation") {
  CHECK_THROWS_AS((InventoryGrid{2, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((HjbSettings{-1, 1.0, 1.0, {}}.validate()), ConfigError);
  CHECK_THROWS_AS((HjbSettings{3, 0.0, 1.0, {}}.validate()), ConfigError);
  CHECK_THROWS(ActionGrid(std::vector<QuoteAction>{}).validate());
  const InventoryGrid g{-3, 3};
  CHECK_FALSE(g.gates(3).bid);
  CHECK(g.gates(3).ask);
  CHECK_FALSE(g.gates(-3).ask);
}

TEST_CASE("solve_final agrees with solve") {
  RandomStream rng(79);
  HjbSolver a, b;
  for (int k = 0; k < 20; ++k) {
    const auto r = testing::random_instance(rng);
    const auto full = a.solve(r.xi, r.z, r.grid, r.actions, r.settings);
    const auto last = b.solve_final(r.xi, r.z, r.grid, r.actions, r.settings);
    for (std::size_t i = 0; i < r.grid.size(); ++i) REQUIRE(last.V[i] == full.final_values()[i]);
  }
}
