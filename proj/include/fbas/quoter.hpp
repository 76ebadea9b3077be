#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include "fbas/errors.hpp"
#include "fbas/hjb.hpp"
#include "fbas/market_model.hpp"

namespace fbas {

struct SafetyLimits {
  double delta_min = 0.005;
  double delta_max = 0.5;
  double q_max = 10.0;  // inventory bound in size units
  double v_max = 1.0;

  void validate() const {
    if (!(delta_min >= 0.0) || !(delta_max > delta_min) || !(q_max > 0.0) || !(v_max > 0.0))
      throw ConfigError("safety limits out of range");
  }
};

/// Bid/ask distances and prices. A disabled side carries NaN distance and price.
struct QuotePair {
  double delta_bid = std::numeric_limits<double>::quiet_NaN();
  double delta_ask = std::numeric_limits<double>::quiet_NaN();
  bool bid_enabled = false;
  bool ask_enabled = false;
  double bid_price = std::numeric_limits<double>::quiet_NaN();
  double ask_price = std::numeric_limits<double>::quiet_NaN();

  QuoteAction action() const noexcept { return {delta_bid, delta_ask}; }
  SideGates gates() const noexcept { return {bid_enabled, ask_enabled}; }
};

/// Counts quotes that fell back to delta_max because the closed form was not finite.
struct QuoteDiagnostics {
  std::size_t nonfinite_fallbacks = 0;
};

/// Unconstrained maximizer of A exp(-kappa delta) (v delta + D - c):
/// delta* = 1/kappa - D/v + c/v. Independent of A.
inline double closed_form_quote(double kappa, double D, double v, double c) noexcept {
  return 1.0 / kappa - D / v + c / v;
}

inline double clip_quote(double delta, const SafetyLimits& limits, QuoteDiagnostics* diag) noexcept {
  if (!std::isfinite(delta)) {
    if (diag) ++diag->nonfinite_fallbacks;
    return limits.delta_max;
  }
  return std::clamp(delta, limits.delta_min, limits.delta_max);
}

/// Closed-form quotes at grid state q from the scalar continuation value h
/// over `grid`. D_bid = h(q+1) - h(q) and D_ask = h(q-1) - h(q); one grid
/// step is one order size. The bid is withdrawn when q v >= Q_max or q is the
/// top of the grid, the ask symmetrically.
inline QuotePair quotes_from_value(std::span<const double> h, const InventoryGrid& grid, int q, double v,
                                   const MarketParams& xi, const SafetyLimits& limits, double mid = 0.0,
                                   QuoteDiagnostics* diag = nullptr) {
  if (h.size() != grid.size()) throw InvalidParameter("quotes_from_value: value profile does not match the grid");
  if (!grid.contains(q)) throw InvalidParameter("quotes_from_value: inventory outside the grid");
  const double position = static_cast<double>(q) * v;
  const SideGates edge = grid.gates(q);
  QuotePair out;
  out.bid_enabled = edge.bid && position < limits.q_max;
  out.ask_enabled = edge.ask && position > -limits.q_max;
  const std::size_t i = grid.index(q);
  if (out.bid_enabled) {
    const double D = h[i + 1] - h[i];
    out.delta_bid = clip_quote(closed_form_quote(xi.kappa_bid, D, v, xi.c_bid), limits, diag);
    out.bid_price = mid - out.delta_bid;
  }
  if (out.ask_enabled) {
    const double D = h[i - 1] - h[i];
    out.delta_ask = clip_quote(closed_form_quote(xi.kappa_ask, D, v, xi.c_ask), limits, diag);
    out.ask_price = mid + out.delta_ask;
  }
  return out;
}

/// Nearest grid state to x, halves rounded toward zero.
inline int round_half_toward_zero(double x) noexcept {
  const double t = std::trunc(x);
  if (std::abs(x - t) == 0.5) return static_cast<int>(t);
  return static_cast<int>(std::round(x));
}

/// Quotes from a value profile over centered inventory q - theta (size
/// units), rounded to the nearest grid state. The hard inventory gates still
/// apply to the actual position q.
inline QuotePair centered_quotes(std::span<const double> h_tilde, const InventoryGrid& grid, int q, double theta,
                                 double v, const MarketParams& xi, const SafetyLimits& limits, double mid = 0.0,
                                 QuoteDiagnostics* diag = nullptr) {
  const int centered = std::clamp(round_half_toward_zero((static_cast<double>(q) * v - theta) / v), grid.q_min,
                                  grid.q_max);
  QuotePair out = quotes_from_value(h_tilde, grid, centered, v, xi, limits, mid, diag);
  const double position = static_cast<double>(q) * v;
  if (position >= limits.q_max && out.bid_enabled) {
    out.bid_enabled = false;
    out.delta_bid = out.bid_price = std::numeric_limits<double>::quiet_NaN();
  }
  if (position <= -limits.q_max && out.ask_enabled) {
    out.ask_enabled = false;
    out.delta_ask = out.ask_price = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace fbas
