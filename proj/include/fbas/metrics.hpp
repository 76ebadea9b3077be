#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "fbas/errors.hpp"
#include "fbas/events.hpp"

namespace fbas {

struct EquityPoint {
  std::int64_t timestamp_ns = 0;
  double wealth = 0.0;
  double cash = 0.0;
  double inventory = 0.0;
  double mid = 0.0;
  friend bool operator==(const EquityPoint&, const EquityPoint&) = default;
};

struct MetricsConfig {
  double notional_base = 0.0;     // <= 0: use the opening wealth
  double steps_per_day = 0.0;     // <= 0: infer from the equity timestamps
  double days_per_year = 365.0;
  double seconds_per_day = 86400.0;

  friend bool operator==(const MetricsConfig&, const MetricsConfig&) = default;
};

/// Undefined ratios (zero variance, zero drawdown, no trades) are NaN, never
/// infinity. Drawdown is a positive fraction.
struct MetricsReport {
  double cumulative_return = 0.0;
  double sharpe = 0.0;
  double sortino = 0.0;
  double max_drawdown = 0.0;
  double daily_trades = 0.0;
  double daily_turnover = 0.0;
  double return_over_max_drawdown = 0.0;
  double return_per_trade = 0.0;
  double max_position_value = 0.0;
  std::size_t trades = 0;
  double turnover = 0.0;
};

inline constexpr double metric_nan = std::numeric_limits<double>::quiet_NaN();

inline double finite_or_nan(double x) noexcept { return std::isfinite(x) ? x : metric_nan; }

/// Running-peak drawdown of an equity series, as a positive fraction of the peak.
inline double max_drawdown(std::span<const double> equity) noexcept {
  double peak = -std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (double w : equity) {
    peak = std::max(peak, w);
    if (peak > 0.0) worst = std::max(worst, (peak - w) / peak);
  }
  return worst;
}

inline MetricsReport compute_metrics(std::span<const EquityPoint> curve, std::span<const FillRecord> fills,
                                     const MetricsConfig& cfg) {
  if (curve.empty()) throw InvalidParameter("compute_metrics: equity curve is empty");
  const double w0 = curve.front().wealth;
  const double base = cfg.notional_base > 0.0 ? cfg.notional_base : w0;
  if (!(base > 0.0)) throw InvalidParameter("compute_metrics: notional base must be positive");

  MetricsReport r;
  std::vector<double> equity(curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    equity[i] = base + (curve[i].wealth - w0);
    r.max_position_value = std::max(r.max_position_value, std::abs(curve[i].inventory * curve[i].mid));
  }
  r.cumulative_return = (curve.back().wealth - w0) / base;
  r.max_drawdown = max_drawdown(equity);

  const std::size_t n = curve.size() - 1;
  const double elapsed_sec = static_cast<double>(curve.back().timestamp_ns - curve.front().timestamp_ns) * 1e-9;
  double steps_per_day = cfg.steps_per_day;
  if (!(steps_per_day > 0.0) && n > 0 && elapsed_sec > 0.0)
    steps_per_day = cfg.seconds_per_day / (elapsed_sec / static_cast<double>(n));
  const double annualization = std::sqrt(steps_per_day * cfg.days_per_year);

  if (n >= 2) {
    double mean = 0.0;
    for (std::size_t i = 1; i <= n; ++i) mean += (curve[i].wealth - curve[i - 1].wealth) / base;
    mean /= static_cast<double>(n);
    double ss = 0.0, down = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      const double x = (curve[i].wealth - curve[i - 1].wealth) / base;
      ss += (x - mean) * (x - mean);
      down += std::min(x, 0.0) * std::min(x, 0.0);
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    const double dd = std::sqrt(down / static_cast<double>(n));
    r.sharpe = sd > 0.0 ? finite_or_nan(mean / sd * annualization) : metric_nan;
    r.sortino = dd > 0.0 ? finite_or_nan(mean / dd * annualization) : metric_nan;
  } else {
    r.sharpe = r.sortino = metric_nan;
  }

  r.trades = fills.size();
  for (const auto& f : fills) r.turnover += std::abs(f.price() * f.size);
  const double days = elapsed_sec / cfg.seconds_per_day;
  r.daily_trades = days > 0.0 ? static_cast<double>(r.trades) / days : metric_nan;
  r.daily_turnover = days > 0.0 ? r.turnover / days : metric_nan;
  r.return_over_max_drawdown = r.max_drawdown > 0.0 ? finite_or_nan(r.cumulative_return / r.max_drawdown) : metric_nan;
  r.return_per_trade = r.trades > 0 ? r.cumulative_return / static_cast<double>(r.trades) : metric_nan;
  return r;
}

}  // namespace fbas
