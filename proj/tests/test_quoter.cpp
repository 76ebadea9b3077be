#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fbas/quoter.hpp"
#include "fbas/rng.hpp"
#include "fbas/testing/oracles.hpp"

using namespace fbas;
using Catch::Approx;

TEST_CASE("closed form examples") {
  CHECK(closed_form_quote(10.0, 0.0, 1.0, 0.0) == Approx(0.1));
  CHECK(closed_form_quote(10.0, 0.02, 1.0, 0.0) == Approx(0.08));
  CHECK(closed_form_quote(10.0, 0.0, 2.0, 0.01) == Approx(0.105));
  CHECK(closed_form_quote(20.0, -0.04, 2.0, 0.0) == Approx(0.07));
}

TEST_CASE("property: closed form is the maximizer of J") {
  RandomStream rng(21);
  for (int i = 0; i < 300; ++i) {
    const double A = rng.uniform(0.1, 5), kappa = rng.uniform(2, 60), v = rng.uniform(0.2, 3);
    const double c = rng.uniform(0, 0.02), D = rng.uniform(-0.1, 0.1);
    const double d = closed_form_quote(kappa, D, v, c);
    const double j = testing::quote_objective(d, A, kappa, D, c, v);
    for (double h : {1e-4, 1e-3, 1e-2}) {
      REQUIRE(testing::quote_objective(d + h, A, kappa, D, c, v) <= j);
      REQUIRE(testing::quote_objective(d - h, A, kappa, D, c, v) <= j);
    }
  }
}

TEST_CASE("property: adverse cost widens the quote at fixed h") {
  RandomStream rng(22);
  const SafetyLimits limits{0.0, 10.0, 100.0, 10.0};
  const InventoryGrid grid{-3, 3};
  for (int i = 0; i < 500; ++i) {
    std::vector<double> h(grid.size());
    for (double& x : h) x = rng.uniform(-0.005, 0.005);
    MarketParams xi{0.01, 1, 1, rng.uniform(5, 50), rng.uniform(5, 50), rng.uniform(0, 0.01), 0.0};
    const auto a = quotes_from_value(h, grid, 0, 1.0, xi, limits);
    xi.c_bid += rng.uniform(1e-4, 0.01);
    const auto b = quotes_from_value(h, grid, 0, 1.0, xi, limits);
    REQUIRE(b.delta_bid > a.delta_bid);
    REQUIRE(b.delta_ask == a.delta_ask);
  }
}

TEST_CASE("quotes clip to the safety band and fall back on non-finite values") {
  const SafetyLimits limits{0.01, 0.2, 10.0, 1.0};
  QuoteDiagnostics diag;
  CHECK(clip_quote(0.5, limits, &diag) == 0.2);
  CHECK(clip_quote(-0.1, limits, &diag) == 0.01);
  CHECK(diag.nonfinite_fallbacks == 0);
  CHECK(clip_quote(NAN, limits, &diag) == 0.2);
  CHECK(clip_quote(INFINITY, limits, &diag) == 0.2);
  CHECK(diag.nonfinite_fallbacks == 2);

  const InventoryGrid grid{-1, 1};
  const std::vector<double> h{0.0, NAN, 0.0};
  const auto q = quotes_from_value(h, grid, 0, 1.0, {0.01, 1, 1, 10, 10, 0, 0}, limits, 100.0, &diag);
  CHECK(q.delta_bid == 0.2);
  CHECK(q.bid_price == Approx(99.8));
  CHECK(diag.nonfinite_fallbacks == 4);
}

TEST_CASE("inventory gates withdraw one side") {
  const InventoryGrid grid{-2, 2};
  const std::vector<double> h(grid.size(), 0.0);
  const MarketParams xi{0.01, 1, 1, 10, 10, 0, 0};
  const SafetyLimits limits{0.005, 0.5, 2.0, 1.0};
  const auto top = quotes_from_value(h, grid, 2, 1.0, xi, limits);
  CHECK_FALSE(top.bid_enabled);
  CHECK(std::isnan(top.delta_bid));
  CHECK(std::isnan(top.bid_price));
  CHECK(top.ask_enabled);
  const auto bottom = quotes_from_value(h, grid, -2, 1.0, xi, limits);
  CHECK_FALSE(bottom.ask_enabled);
  CHECK(bottom.bid_enabled);
  // Q_max tighter than the grid also gates.
  const auto tight = quotes_from_value(h, grid, 1, 1.0, xi, {0.005, 0.5, 1.0, 1.0});
  CHECK_FALSE(tight.bid_enabled);
  CHECK_THROWS_AS(quotes_from_value(h, grid, 3, 1.0, xi, limits), InvalidParameter);
}

TEST_CASE("inventory skews the quotes") {
  const InventoryGrid grid{-3, 3};
  std::vector<double> h(grid.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double q = grid.state(i);
    h[i] = -0.01 * q * q;
  }
  const MarketParams xi{0.01, 1, 1, 20, 20, 0, 0};
  const SafetyLimits limits{0.0, 1.0, 10.0, 1.0};
  const auto flat = quotes_from_value(h, grid, 0, 1.0, xi, limits);
  const auto longq = quotes_from_value(h, grid, 2, 1.0, xi, limits);
  CHECK(flat.delta_bid == Approx(flat.delta_ask));
  CHECK(longq.delta_bid > flat.delta_bid);
  CHECK(longq.delta_ask < flat.delta_ask);
}

TEST_CASE("round half toward zero") {
  CHECK(round_half_toward_zero(0.5) == 0);
  CHECK(round_half_toward_zero(-0.5) == 0);
  CHECK(round_half_toward_zero(1.5) == 1);
  CHECK(round_half_toward_zero(-2.5) == -2);
  CHECK(round_half_toward_zero(1.6) == 2);
  CHECK(round_half_toward_zero(-1.4) == -1);
}

TEST_CASE("centered quotes shift the value profile by theta") {
  const InventoryGrid grid{-4, 4};
  std::vector<double> h(grid.size());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = -0.01 * grid.state(i) * grid.state(i);
  const MarketParams xi{0.01, 1, 1, 20, 20, 0, 0};
  const SafetyLimits limits{0.0, 1.0, 4.0, 1.0};
  // Holding two units with target 2 quotes like holding none.
  const auto centered = centered_quotes(h, grid, 2, 2.0, 1.0, xi, limits);
  const auto flat = quotes_from_value(h, grid, 0, 1.0, xi, limits);
  CHECK(centered.delta_bid == flat.delta_bid);
  CHECK(centered.delta_ask == flat.delta_ask);
  // Hard gates still follow the actual position.
  const auto at_cap = centered_quotes(h, grid, 4, 4.0, 1.0, xi, limits);
  CHECK_FALSE(at_cap.bid_enabled);
  CHECK(at_cap.ask_enabled);
}

TEST_CASE("safety limits validation") {
  CHECK_THROWS_AS((SafetyLimits{0.3, 0.2, 10, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((SafetyLimits{0.0, 0.2, 0, 1}.validate()), ConfigError);
}
