#include <catch_amalgamated.hpp>

#include <cmath>

#include "fbas/market_model.hpp"
#include "fbas/rng.hpp"
#include "fbas/testing/oracles.hpp"

using namespace fbas;
using Catch::Approx;

TEST_CASE("fill intensity examples") {
  CHECK(fill_intensity(0.0, 1.5, 10.0) == 1.5);
  // A e^{-kappa delta} at kappa delta = 1.
  CHECK(fill_intensity(0.1, 2.0, 10.0) == Approx(2.0 * 0.36787944117144233).epsilon(1e-15));
  CHECK(fill_intensity(0.3, 0.0, 10.0) == 0.0);
}

TEST_CASE("fill intensity rejects bad parameters") {
  CHECK_THROWS_AS(fill_intensity(0.1, 1.0, 0.0), InvalidParameter);
  CHECK_THROWS_AS(fill_intensity(0.1, -1.0, 5.0), InvalidParameter);
  CHECK_THROWS_AS(fill_intensity(NAN, 1.0, 5.0), InvalidParameter);
  CHECK_THROWS_AS(fill_intensity(0.1, INFINITY, 5.0), InvalidParameter);
}

TEST_CASE("fill probability") {
  CHECK(fill_probability(0.0, 1.0) == 0.0);
  CHECK(fill_probability(1.0, 1.0) == Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
  CHECK(fill_probability(5.0, 1.0, false) == 0.0);
  // Tiny rates keep full relative precision.
  CHECK(fill_probability(1e-12, 1.0) == Approx(1e-12).epsilon(1e-10));
  CHECK_THROWS_AS(fill_probability(1.0, 0.0), InvalidParameter);
  CHECK_THROWS_AS(fill_probability(-1.0, 1.0), InvalidParameter);
}

TEST_CASE("second moment examples") {
  CHECK(inventory_second_moment(0, 0, 0) == 0.0);
  CHECK(inventory_second_moment(3, 0, 0) == 9.0);
  CHECK(inventory_second_moment(0, 1, 0) == 1.0);
  CHECK(inventory_second_moment(0, 1, 1) == 0.0);
  CHECK(inventory_second_moment(2, 0.5, 0.5) == Approx(4.5));
}

TEST_CASE("transition distribution sums to one and keeps both-fill at q") {
  RandomStream rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double pb = rng.uniform(), pa = rng.uniform();
    const auto t = transition_distribution(pb, pa);
    CHECK(t.p00 + t.p10 + t.p01 + t.p11 == Approx(1.0).epsilon(1e-15));
    double mean = 0.0;
    const auto probs = t.probabilities();
    for (std::size_t k = 0; k < 4; ++k) mean += probs[k] * TransitionDistribution::inventory_delta[k];
    CHECK(mean == Approx(pb - pa).margin(1e-15));
  }
}

TEST_CASE("property: second moment equals four-outcome enumeration") {
  RandomStream rng(42);
  for (int i = 0; i < 20000; ++i) {
    const double q = std::floor(rng.uniform(-30.0, 31.0));
    const double pb = rng.uniform(), pa = rng.uniform();
    const double exact = testing::enumerate_second_moment(q, pb, pa);
    REQUIRE(std::abs(inventory_second_moment(q, pb, pa) - exact) <= 1e-12 * std::max(1.0, exact));
  }
}

TEST_CASE("expected features match a direct enumeration") {
  const MarketParams xi{0.01, 1.2, 0.8, 15.0, 25.0, 0.003, 0.001};
  const QuoteAction a{0.05, 0.08};
  const FeatureConfig cfg{2.0, 0.5};
  const double dt = 0.7;
  for (int q = -4; q <= 4; ++q) {
    const double pb = 1.0 - std::exp(-1.2 * std::exp(-15.0 * 0.05) * dt);
    const double pa = 1.0 - std::exp(-0.8 * std::exp(-25.0 * 0.08) * dt);
    double pnl = 0, qn = 0, q2 = 0, adv = 0;
    for (int nb = 0; nb <= 1; ++nb)
      for (int na = 0; na <= 1; ++na) {
        const double p = (nb ? pb : 1 - pb) * (na ? pa : 1 - pa);
        const double pos = 2.0 * (q + nb - na);
        pnl += p * 2.0 * (nb * 0.05 + na * 0.08);
        qn += p * pos;
        q2 += p * 0.5 * pos * pos;
        adv += p * (nb * 0.003 + na * 0.001);
      }
    const FeatureVector f = expected_features(q, a, xi, dt, {}, cfg);
    CHECK(f.pnl == Approx(pnl).epsilon(1e-13));
    CHECK(f.q_next == Approx(qn).epsilon(1e-13).margin(1e-14));
    CHECK(f.q2_next == Approx(q2).epsilon(1e-13).margin(1e-14));
    CHECK(f.adv == Approx(adv).epsilon(1e-13));
  }
}

TEST_CASE("disabled side contributes nothing") {
  const MarketParams xi{0.01, 1.0, 1.0, 20.0, 20.0, 0.002, 0.002};
  const FeatureVector f = expected_features(0, {0.05, 0.05}, xi, 1.0, {false, true});
  const FeatureVector g = expected_features(0, {0.05, 0.05}, xi, 1.0, {false, false});
  CHECK(f.q_next < 0.0);
  CHECK(g == FeatureVector{0.0, 0.0, 0.0, 0.0});
}

TEST_CASE("property: features are monotone in the quote distance") {
  RandomStream rng(5);
  for (int i = 0; i < 2000; ++i) {
    const MarketParams xi{0.01, rng.uniform(0.1, 3), rng.uniform(0.1, 3), rng.uniform(1, 50), rng.uniform(1, 50),
                          rng.uniform(0, 0.01), rng.uniform(0, 0.01)};
    const double d1 = rng.uniform(0, 0.3), d2 = d1 + rng.uniform(1e-3, 0.3);
    const auto p1 = fill_probabilities({d1, d1}, xi, 1.0);
    const auto p2 = fill_probabilities({d2, d2}, xi, 1.0);
    REQUIRE(p2.p_bid <= p1.p_bid);
    REQUIRE(p2.p_ask <= p1.p_ask);
    REQUIRE(p1.p_bid >= 0.0);
    REQUIRE(p1.p_bid < 1.0);
  }
}

TEST_CASE("market params validation") {
  MarketParams xi{0.01, 1.0, 1.0, 20.0, 20.0, 0.0, 0.0};
  CHECK(xi.valid());
  xi.kappa_ask = 0.0;
  CHECK_FALSE(xi.valid());
  CHECK_THROWS_AS(xi.validate(), InvalidParameter);
  xi.kappa_ask = 1.0;
  xi.c_bid = -0.1;
  CHECK_FALSE(xi.valid());
}

TEST_CASE("rng substreams are reproducible and label-separated") {
  auto a = RandomStream::derive(7, "x");
  auto b = RandomStream::derive(7, "x");
  auto c = RandomStream::derive(7, "y");
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    REQUIRE(x == b.next_u64());
    differs = differs || x != c.next_u64();
  }
  CHECK(differs);
  RandomStream u(3);
  for (int i = 0; i < 10000; ++i) {
    const double x = u.uniform();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
  }
}
