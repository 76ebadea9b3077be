#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fbas/account.hpp"
#include "fbas/backtest.hpp"
#include "fbas/estimator.hpp"
#include "fbas/metrics.hpp"
#include "fbas/synth.hpp"

using namespace fbas;
using Catch::Approx;

namespace {

BacktestConfig small_config(std::size_t decisions = 600) {
  BacktestConfig cfg;
  cfg.market.duration_sec = static_cast<double>(decisions);
  cfg.truth = {cfg.market.sigma, cfg.market.A_bid, cfg.market.A_ask, cfg.market.kappa_bid, cfg.market.kappa_ask, 0, 0};
  cfg.limits.q_max = 5;
  cfg.adapter.constraints.q_max = 5;
  cfg.n_delta_bid = cfg.n_delta_ask = 6;
  cfg.hjb.horizon_steps = 5;
  cfg.adapter.min_observations = 20;
  cfg.estimator.min_fills = 10;
  return cfg;
}

}  // namespace

TEST_CASE("account fill and mark-to-market") {
  AccountState a = AccountState::opening(1000.0, 100.0);
  a = apply_fill(a, {0, Side::bid, 0.05, 2.0, 100.0, false});
  CHECK(a.cash == Approx(1000.0 - 2.0 * 99.95));
  CHECK(a.inventory == 2.0);
  CHECK(a.wealth == Approx(1000.1));
  CHECK(a.identity_holds());
  a = mark_to_market(a, 101.0);
  CHECK(a.wealth == Approx(1002.1));
  CHECK(a.identity_holds());
  a = apply_fill(a, {0, Side::ask, 0.1, 1.0, 101.0, false}, 10.0, 0.01);
  CHECK(a.inventory == 1.0);
  CHECK(a.wealth == Approx(1002.1 + 0.1 - 0.01));
  CHECK(a.identity_holds());
  CHECK_THROWS_AS(apply_fill(a, {0, Side::bid, 0.1, 1.0, 101.0, false}, 1.5), SimulationIntegrityError);
  CHECK_THROWS_AS(mark_to_market(a, -1.0), SimulationIntegrityError);
}

TEST_CASE("property: wealth identity under random fills and moves") {
  RandomStream rng(31);
  AccountState a = AccountState::opening(5000.0, 50.0);
  double mid = 50.0;
  for (int i = 0; i < 100000; ++i) {
    mid = std::max(1.0, mid + 0.05 * rng.normal());
    a = mark_to_market(a, mid);
    if (rng.bernoulli(0.3)) a = apply_fill(a, {0, rng.bernoulli(0.5) ? Side::bid : Side::ask, rng.uniform(0, 0.1), 1.0, mid, false});
    REQUIRE(a.identity_holds(1e-9));
  }
}

TEST_CASE("metrics examples") {
  std::vector<EquityPoint> curve;
  const double w[] = {100, 110, 99, 121, 110};
  for (int i = 0; i < 5; ++i) curve.push_back({static_cast<std::int64_t>(i) * 86400'000'000'000LL, w[i], w[i], 0, 1});
  const auto r = compute_metrics(curve, {}, {});
  CHECK(r.cumulative_return == Approx(0.10));
  CHECK(r.max_drawdown == Approx(0.1));  // 110 -> 99
  CHECK(r.max_drawdown > 0.0);
  CHECK(r.trades == 0);
  CHECK(std::isnan(r.return_per_trade));
  CHECK(r.return_over_max_drawdown == Approx(1.0));
  // Daily steps: annualized with sqrt(365).
  std::vector<double> x{0.1, -0.11, 0.22, -0.11};
  double m = 0;
  for (double v : x) m += v;
  m /= 4;
  double ss = 0, dd = 0;
  for (double v : x) {
    ss += (v - m) * (v - m);
    dd += std::min(v, 0.0) * std::min(v, 0.0);
  }
  CHECK(r.sharpe == Approx(m / std::sqrt(ss / 3) * std::sqrt(365.0)));
  CHECK(r.sortino == Approx(m / std::sqrt(dd / 4) * std::sqrt(365.0)));
}

TEST_CASE("metrics of a flat curve are NaN, not infinite") {
  std::vector<EquityPoint> curve;
  for (int i = 0; i < 10; ++i) curve.push_back({i * 1'000'000'000LL, 100, 100, 0, 1});
  const auto r = compute_metrics(curve, {}, {});
  CHECK(r.cumulative_return == 0.0);
  CHECK(r.max_drawdown == 0.0);
  CHECK(std::isnan(r.sharpe));
  CHECK(std::isnan(r.sortino));
  CHECK(std::isnan(r.return_over_max_drawdown));
  CHECK_THROWS_AS(compute_metrics(std::vector<EquityPoint>{}, {}, {}), InvalidParameter);
}

TEST_CASE("synthetic market with zero volatility keeps a constant mid") {
  SynthConfig m;
  m.sigma = 0.0;
  m.duration_sec = 200;
  const auto events = synthesize_market(m, 3);
  std::size_t mids = 0, trades = 0;
  for (const auto& e : events) {
    if (e.kind == EventKind::mid_update) {
      ++mids;
      REQUIRE(e.price == m.mid0);
    } else {
      ++trades;
    }
  }
  CHECK(mids == 201);
  CHECK(trades > 0);
  for (std::size_t i = 1; i < events.size(); ++i) REQUIRE(events[i].timestamp_ns >= events[i - 1].timestamp_ns);
  CHECK(synthesize_market(m, 3).size() == events.size());
}

TEST_CASE("estimator recovers intensity parameters from the tape") {
  BacktestConfig cfg = small_config(4000);
  cfg.market.A_bid = 2.0;
  cfg.market.kappa_bid = 15.0;
  cfg.estimator.window_sec = 4000;
  cfg.estimator.outcome_capacity = 40000;
  cfg.truth = {cfg.market.sigma, 2.0, 1.0, 15.0, 20.0, 0, 0};
  const auto events = synthesize_market(cfg.market, 17);
  const auto result = run_backtest(events, cfg);
  const auto& last = result.diagnostics.back().xi;
  CHECK(last.A_bid == Approx(2.0).epsilon(0.15));
  CHECK(last.kappa_bid == Approx(15.0).epsilon(0.15));
  CHECK(last.A_ask == Approx(1.0).epsilon(0.15));
  CHECK(last.kappa_ask == Approx(20.0).epsilon(0.15));
  CHECK(last.sigma == Approx(cfg.market.sigma).epsilon(0.15));
}

TEST_CASE("intensity fit inverts exact bucket tallies") {
  std::vector<EstimatorWindow::BucketTally> t;
  for (int b = 0; b < 8; ++b) {
    const double d = 0.025 + 0.05 * b, p = 1.0 - std::exp(-1.5 * std::exp(-12.0 * d));
    const std::size_t n = 100000000;
    t.push_back({n, static_cast<std::size_t>(std::llround(p * n)), d * n, static_cast<double>(n)});
  }
  const auto fit = fit_intensity(t, 5);
  REQUIRE(fit.has_value());
  CHECK(fit->A == Approx(1.5).epsilon(1e-5));
  CHECK(fit->kappa == Approx(12.0).epsilon(1e-5));
}

TEST_CASE("backtest runs are deterministic") {
  const BacktestConfig cfg = small_config();
  const auto events = synthesize_market(cfg.market, 5);
  const auto a = run_backtest(events, cfg);
  const auto b = run_backtest(events, cfg);
  REQUIRE(a.quotes.size() == b.quotes.size());
  for (std::size_t i = 0; i < a.quotes.size(); ++i) REQUIRE(identical_quotes(a.quotes[i], b.quotes[i]));
  REQUIRE(a.equity == b.equity);
  CHECK(a.max_identity_gap <= 1e-9);
  CHECK(a.decisions == 601);
}

TEST_CASE("baseline equivalence without adaptation") {
  BacktestConfig cfg = small_config();
  cfg.adapter.mix_beta = 0.0;
  cfg.adapter.alpha_z = 1.0;
  const auto events = synthesize_market(cfg.market, 6);
  const auto adaptive = run_backtest(events, cfg);
  cfg.strategy = StrategyKind::fixed_as;
  const auto fixed = run_backtest(events, cfg);
  REQUIRE(adaptive.quotes.size() == fixed.quotes.size());
  for (std::size_t i = 0; i < fixed.quotes.size(); ++i) REQUIRE(identical_quotes(adaptive.quotes[i], fixed.quotes[i]));
}

TEST_CASE("inventory stays within Q_max plus one order") {
  for (auto strategy : {StrategyKind::adaptive_fb_as, StrategyKind::fixed_as, StrategyKind::symmetric_naive}) {
    BacktestConfig cfg = small_config();
    cfg.strategy = strategy;
    cfg.quote_mode = strategy == StrategyKind::fixed_as ? QuoteMode::centered : QuoteMode::direct;
    const auto r = run_backtest(synthesize_market(cfg.market, 8), cfg);
    for (const auto& e : r.equity) REQUIRE(std::abs(e.inventory) <= cfg.limits.q_max + cfg.order_size());
    for (const auto& q : r.quotes) {
      if (q.bid_enabled) REQUIRE((q.delta_bid >= cfg.limits.delta_min && q.delta_bid <= cfg.limits.delta_max));
      if (q.ask_enabled) REQUIRE((q.delta_ask >= cfg.limits.delta_min && q.delta_ask <= cfg.limits.delta_max));
    }
  }
}

TEST_CASE("backtest input validation") {
  BacktestConfig cfg = small_config();
  CHECK_THROWS_AS(run_backtest(std::vector<MarketEvent>{}, cfg), IngestionError);
  std::vector<MarketEvent> bad{{10, EventKind::mid_update, 100, 0, Aggressor::none},
                               {5, EventKind::mid_update, 100, 0, Aggressor::none}};
  CHECK_THROWS_AS(run_backtest(bad, cfg), IngestionError);
  cfg.decision_dt_sec = 0;
  CHECK_THROWS_AS(run_backtest(synthesize_market(cfg.market, 1), cfg), ConfigError);
}

TEST_CASE("fb estimator and regime kernel keep the objective admissible") {
  for (auto est : {ObjectiveEstimator::ridge, ObjectiveEstimator::fb}) {
    BacktestConfig cfg = small_config(1500);
    cfg.adapter.estimator = est;
    cfg.adapter.kernel_bandwidth = 1.0;
    cfg.adapter.alpha_z = 0.5;
    const auto r = run_backtest(synthesize_market(cfg.market, 12), cfg);
    CHECK(r.live_decisions > 0);
    for (const auto& d : r.diagnostics) REQUIRE(in_constraint_set(d.z, cfg.adapter.constraints));
  }
}

TEST_CASE("centered quoting runs and respects the hard gates") {
  BacktestConfig cfg = small_config(1500);
  cfg.quote_mode = QuoteMode::centered;
  cfg.market.drift_per_sec = 0.002;
  cfg.truth = {cfg.market.sigma, 1, 1, 20, 20, 0, 0};
  const auto r = run_backtest(synthesize_market(cfg.market, 13), cfg);
  for (std::size_t i = 0; i < r.quotes.size(); ++i) {
    const double q = i == 0 ? 0.0 : r.equity[i - 1].inventory;
    if (q >= cfg.limits.q_max) REQUIRE_FALSE(r.quotes[i].bid_enabled);
    if (q <= -cfg.limits.q_max) REQUIRE_FALSE(r.quotes[i].ask_enabled);
  }
}
