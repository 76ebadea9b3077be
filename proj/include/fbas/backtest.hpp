#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fbas/account.hpp"
#include "fbas/errors.hpp"
#include "fbas/estimator.hpp"
#include "fbas/events.hpp"
#include "fbas/format.hpp"
#include "fbas/hjb.hpp"
#include "fbas/market_model.hpp"
#include "fbas/metrics.hpp"
#include "fbas/objective.hpp"
#include "fbas/quoter.hpp"
#include "fbas/rng.hpp"
#include "fbas/synth.hpp"

namespace fbas {

enum class StrategyKind { adaptive_fb_as, fixed_as, symmetric_naive };
enum class QuoteMode { direct, centered };

inline const char* to_string(StrategyKind s) {
  switch (s) {
    case StrategyKind::adaptive_fb_as: return "adaptive_fb_as";
    case StrategyKind::fixed_as: return "fixed_as";
    case StrategyKind::symmetric_naive: return "symmetric_naive";
  }
  return "?";
}

struct BacktestConfig {
  StrategyKind strategy = StrategyKind::adaptive_fb_as;
  std::uint64_t seed = 0;
  double decision_dt_sec = 1.0;
  std::size_t max_decisions = 0;  // 0: until the last event

  // Receding-horizon solver. hjb.dt <= 0 means "use decision_dt_sec".
  HjbSettings hjb{10, 0.0, 1.0, {}};
  int grid_q_min = 0;  // grid bounds in order-size units; both 0 means +-Q_max / v
  int grid_q_max = 0;
  std::size_t n_delta_bid = 11;
  std::size_t n_delta_ask = 11;
  QuoteMode quote_mode = QuoteMode::direct;

  AdapterConfig adapter{};
  SafetyLimits limits{};
  EstimatorConfig estimator{};
  MarketParams estimator_defaults{0.01, 1.0, 1.0, 20.0, 20.0, 0.0, 0.0};
  MarketParams truth{0.01, 1.0, 1.0, 20.0, 20.0, 0.0, 0.0};  // drives the simulated fills
  SynthConfig market{};

  double initial_cash = 10000.0;
  double fee_per_fill = 0.0;
  MetricsConfig metrics{};

  double hjb_dt() const noexcept { return hjb.dt > 0.0 ? hjb.dt : decision_dt_sec; }
  double order_size() const noexcept { return hjb.features.order_size; }

  InventoryGrid grid() const {
    if (grid_q_min != 0 || grid_q_max != 0) return {grid_q_min, grid_q_max};
    const int top = static_cast<int>(std::floor(limits.q_max / order_size() + 1e-9));
    return {-top, top};
  }

  ActionGrid action_grid() const {
    return ActionGrid::uniform(limits.delta_min, limits.delta_max, n_delta_bid, n_delta_ask);
  }

  HjbSettings hjb_settings() const {
    HjbSettings s = hjb;
    s.dt = hjb_dt();
    return s;
  }

  void validate() const {
    if (!(decision_dt_sec > 0.0)) throw ConfigError("decision_dt_sec must be positive");
    hjb_settings().validate();
    grid().validate();
    limits.validate();
    if (order_size() > limits.v_max) throw ConfigError("order size exceeds v_max");
    action_grid().validate();
    adapter.validate();
    estimator.validate();
    if (!estimator_defaults.valid()) throw ConfigError("estimator defaults out of range");
    if (!truth.valid()) throw ConfigError("fill-simulation parameters out of range");
    if (!(initial_cash >= 0.0) || !(fee_per_fill >= 0.0)) throw ConfigError("account settings out of range");
  }
};

/// Per-decision record of the estimated state and emitted quotes.
struct DiagnosticRow {
  std::int64_t timestamp_ns = 0;
  MarketParams xi;
  ObjectiveVector z;
  double theta = 0.0;
  double lambda = 0.0;
  double delta_bid = 0.0;
  double delta_ask = 0.0;
  bool live = false;  // estimators and objective window past warm-up
};

struct BacktestResult {
  MetricsReport metrics;
  std::vector<EquityPoint> equity;
  std::vector<DiagnosticRow> diagnostics;
  std::vector<FillRecord> fills;
  std::vector<QuotePair> quotes;
  std::size_t decisions = 0;
  std::size_t live_decisions = 0;
  std::size_t nonfinite_quote_fallbacks = 0;
  double max_identity_gap = 0.0;  // worst relative |W - (X + q m)|
};

/// Independent Bernoulli fills for one step. Both uniforms are always drawn
/// so the stream position does not depend on the gates.
inline StepFills simulate_fills(const QuotePair& quotes, const MarketParams& xi_true, double dt, RandomStream& rng,
                                double size = 1.0) {
  const double u_bid = rng.uniform();
  const double u_ask = rng.uniform();
  StepFills f;
  f.size = size;
  f.delta_bid = quotes.delta_bid;
  f.delta_ask = quotes.delta_ask;
  if (quotes.bid_enabled)
    f.bid = u_bid < fill_probability(fill_intensity(quotes.delta_bid, xi_true.A_bid, xi_true.kappa_bid), dt);
  if (quotes.ask_enabled)
    f.ask = u_ask < fill_probability(fill_intensity(quotes.delta_ask, xi_true.A_ask, xi_true.kappa_ask), dt);
  return f;
}

/// Symmetric quotes at the zero-inventory Avellaneda-Stoikov width
/// 1/kappa + c/v, with the same inventory gates.
inline QuotePair naive_quotes(const MarketParams& xi, double q, double v, const SafetyLimits& limits, double mid,
                              QuoteDiagnostics* diag = nullptr) {
  QuotePair out;
  out.bid_enabled = q < limits.q_max;
  out.ask_enabled = q > -limits.q_max;
  if (out.bid_enabled) {
    out.delta_bid = clip_quote(closed_form_quote(xi.kappa_bid, 0.0, v, xi.c_bid), limits, diag);
    out.bid_price = mid - out.delta_bid;
  }
  if (out.ask_enabled) {
    out.delta_ask = clip_quote(closed_form_quote(xi.kappa_ask, 0.0, v, xi.c_ask), limits, diag);
    out.ask_price = mid + out.delta_ask;
  }
  return out;
}

/// Quotes of the fixed-objective baseline (or any pinned objective) at one
/// state: solve the receding-horizon HJB for z and apply the closed form.
inline QuotePair fixed_objective_quotes(const MarketParams& xi, const ObjectiveVector& z, double inventory, double mid,
                                        const BacktestConfig& cfg, int horizon_steps = -1) {
  HjbSettings s = cfg.hjb_settings();
  if (horizon_steps >= 0) s.horizon_steps = horizon_steps;
  const InventoryGrid grid = cfg.grid();
  HjbSolver solver;
  const auto layer = solver.solve_final(xi, z, grid, cfg.action_grid(), s);
  const double v = cfg.order_size();
  return quotes_from_value(layer.V, grid, static_cast<int>(std::llround(inventory / v)), v, xi, cfg.limits, mid);
}

namespace detail {

inline bool same_bits(double a, double b) noexcept {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

}  // namespace detail

inline bool identical_quotes(const QuotePair& a, const QuotePair& b) noexcept {
  return a.bid_enabled == b.bid_enabled && a.ask_enabled == b.ask_enabled &&
         detail::same_bits(a.delta_bid, b.delta_bid) && detail::same_bits(a.delta_ask, b.delta_ask) &&
         detail::same_bits(a.bid_price, b.bid_price) && detail::same_bits(a.ask_price, b.ask_price);
}

/// Event-driven backtest of one strategy.
///
/// One decision per `decision_dt_sec`. Events up to a decision time update
/// the estimator window only. At each decision: mark to market, mature
/// markout labels, estimate xi, update the objective, solve the HJB over the
/// remaining horizon, quote, simulate fills over the next interval and book
/// them. Deterministic given (events, config).
inline BacktestResult run_backtest(std::span<const MarketEvent> events, const BacktestConfig& cfg) {
  cfg.validate();
  if (events.empty()) throw IngestionError("run_backtest: no events", 0);
  for (std::size_t i = 1; i < events.size(); ++i)
    if (events[i].timestamp_ns < events[i - 1].timestamp_ns)
      throw IngestionError("run_backtest: events out of time order", i + 1);

  const double v = cfg.order_size();
  const double dt = cfg.decision_dt_sec;
  const auto dt_ns = static_cast<std::int64_t>(std::llround(dt * 1e9));
  if (dt_ns <= 0) throw ConfigError("decision_dt_sec below one nanosecond");
  const std::int64_t t_begin = events.front().timestamp_ns;
  std::size_t decisions = static_cast<std::size_t>((events.back().timestamp_ns - t_begin) / dt_ns) + 1;
  if (cfg.max_decisions > 0) decisions = std::min(decisions, cfg.max_decisions);

  const InventoryGrid grid = cfg.grid();
  const ActionGrid actions = cfg.action_grid();
  const HjbSettings base_settings = cfg.hjb_settings();
  const ObjectiveVector z_prior = cfg.adapter.z_prior();
  const bool use_kernel = cfg.adapter.kernel_bandwidth > 0.0;
  const double inventory_limit = cfg.limits.q_max + v;

  EstimatorWindow window(cfg.estimator);
  ObjectiveAdapter adapter(cfg.adapter);
  HjbSolver solver;
  RandomStream fill_rng = RandomStream::derive(cfg.seed, "backtest.fills");
  QuoteDiagnostics quote_diag;

  BacktestResult out;
  out.equity.reserve(decisions);
  out.diagnostics.reserve(decisions);
  out.quotes.reserve(decisions);

  std::vector<double> probe_centers(cfg.estimator.buckets);
  for (std::size_t b = 0; b < probe_centers.size(); ++b) probe_centers[b] = window.bucket_center(b);

  AccountState account;
  bool have_mid = false;
  bool have_reference = false;
  double reference_mid = 0.0;  // mid at the previous decision
  std::int64_t reference_ts = 0;
  double depth_bid = -std::numeric_limits<double>::infinity();  // deepest sell aggressor since reference
  double depth_ask = -std::numeric_limits<double>::infinity();
  double mid = 0.0;
  std::size_t next_event = 0;

  auto check_identity = [&](const AccountState& a) {
    const double scale = std::max(1.0, std::abs(a.cash) + std::abs(a.inventory * a.mid));
    const double gap = std::abs(a.identity_gap()) / scale;
    out.max_identity_gap = std::max(out.max_identity_gap, gap);
    if (gap > 1e-9) throw SimulationIntegrityError("wealth identity violated");
  };

  for (std::size_t k = 0; k < decisions; ++k) {
    const std::int64_t now = t_begin + static_cast<std::int64_t>(k) * dt_ns;

    for (; next_event < events.size() && events[next_event].timestamp_ns <= now; ++next_event) {
      const MarketEvent& e = events[next_event];
      if (e.kind == EventKind::mid_update) {
        window.add_mid(e.timestamp_ns, e.price);
        mid = e.price;
        if (!have_mid) {
          account = AccountState::opening(cfg.initial_cash, mid);
          have_mid = true;
        } else {
          account = mark_to_market(account, mid);
          check_identity(account);
        }
      } else if (have_reference) {
        if (e.aggressor == Aggressor::sell) depth_bid = std::max(depth_bid, reference_mid - e.price);
        if (e.aggressor == Aggressor::buy) depth_ask = std::max(depth_ask, e.price - reference_mid);
      }
    }
    if (!have_mid) continue;

    // Probe ladder: would a quote at each bucket distance have been reached
    // by the aggressor flow since the previous decision?
    if (have_reference && now > reference_ts) {
      const double exposure = static_cast<double>(now - reference_ts) * 1e-9;
      for (double d : probe_centers) {
        window.add_quote_outcome(Side::bid, d, exposure, depth_bid >= d);
        window.add_quote_outcome(Side::ask, d, exposure, depth_ask >= d);
      }
    }

    const auto step = static_cast<std::int64_t>(k);
    for (const MaturedFill& m : adapter.mature(step, mid)) {
      const double dm = m.mid_at_H - m.mid_at_fill;
      if (m.fills.bid) window.add_markout(Side::bid, -dm);
      if (m.fills.ask) window.add_markout(Side::ask, dm);
    }

    const MarketEstimate est = estimate_market_params_detailed(window, cfg.estimator_defaults);
    const MarketParams& xi = est.params;
    const bool warm = est.status.intensities_ready();

    std::vector<double> embedding;
    if (use_kernel) embedding = {xi.sigma, xi.A_bid + xi.A_ask, xi.c_bid + xi.c_ask};
    const AdapterState adapted = adapter.update(step, embedding);

    ObjectiveVector z = z_prior;
    bool live = warm;
    if (cfg.strategy == StrategyKind::adaptive_fb_as) {
      live = warm && adapted.live;
      if (warm) z = adapted.z;
    }

    HjbSettings settings = base_settings;
    settings.horizon_steps = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(base_settings.horizon_steps),
                                                                    decisions - k));
    const int q_grid = static_cast<int>(std::llround(account.inventory / v));
    if (!grid.contains(q_grid)) throw SimulationIntegrityError("inventory left the HJB grid");

    QuotePair quotes;
    const ImpliedTarget target = implied_target(z);
    if (cfg.strategy == StrategyKind::symmetric_naive) {
      quotes = naive_quotes(xi, account.inventory, v, cfg.limits, mid, &quote_diag);
    } else if (cfg.quote_mode == QuoteMode::centered) {
      const ObjectiveVector z_centered{z.pnl, 0.0, z.q2, z.adv};
      const auto layer = solver.solve_final(xi, z_centered, grid, actions, settings);
      quotes = centered_quotes(layer.V, grid, q_grid, target.theta, v, xi, cfg.limits, mid, &quote_diag);
    } else {
      const auto layer = solver.solve_final(xi, z, grid, actions, settings);
      quotes = quotes_from_value(layer.V, grid, q_grid, v, xi, cfg.limits, mid, &quote_diag);
    }

    const StepFills fills = simulate_fills(quotes, cfg.truth, dt, fill_rng, v);
    if (fills.bid) {
      const FillRecord f{now, Side::bid, quotes.delta_bid, v, mid, false};
      account = apply_fill(account, f, inventory_limit, cfg.fee_per_fill);
      out.fills.push_back({f.timestamp_ns, f.side, quantize(f.delta), quantize(f.size), quantize(f.mid), false});
    }
    if (fills.ask) {
      const FillRecord f{now, Side::ask, quotes.delta_ask, v, mid, false};
      account = apply_fill(account, f, inventory_limit, cfg.fee_per_fill);
      out.fills.push_back({f.timestamp_ns, f.side, quantize(f.delta), quantize(f.size), quantize(f.mid), false});
    }
    check_identity(account);
    if (fills.any()) {
      std::vector<double> fill_embedding;
      if (use_kernel) fill_embedding = embedding;
      adapter.record_fills(step, fills, backward_row(fills, account.inventory, xi, cfg.hjb.features), mid,
                           std::move(fill_embedding));
    }

    out.equity.push_back({now, quantize(account.wealth), quantize(account.cash), quantize(account.inventory),
                          quantize(mid)});
    out.diagnostics.push_back({now, xi, z, target.theta, target.lambda, quotes.delta_bid, quotes.delta_ask, live});
    out.quotes.push_back(quotes);
    out.live_decisions += live ? 1 : 0;

    have_reference = true;
    reference_mid = mid;
    reference_ts = now;
    depth_bid = depth_ask = -std::numeric_limits<double>::infinity();
  }

  out.decisions = out.equity.size();
  out.nonfinite_quote_fallbacks = quote_diag.nonfinite_fallbacks;
  if (out.equity.empty()) throw IngestionError("run_backtest: no mid-price before the last decision", 0);
  MetricsConfig mc = cfg.metrics;
  if (!(mc.notional_base > 0.0)) mc.notional_base = cfg.initial_cash > 0.0 ? cfg.initial_cash : 0.0;
  out.metrics = compute_metrics(out.equity, out.fills, mc);
  return out;
}

}  // namespace fbas
