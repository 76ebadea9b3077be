#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "fbas/errors.hpp"
#include "fbas/events.hpp"

namespace fbas {

/// Cash, inventory and mark-to-market wealth.
///
/// `wealth` is carried forward incrementally (spread capture on fills, q dm on
/// mid moves, minus fees) so that the identity W = X + q m is a real check on
/// the accounting rather than a definition.
struct AccountState {
  double cash = 0.0;
  double inventory = 0.0;  // size units
  double mid = 0.0;
  double wealth = 0.0;

  static AccountState opening(double cash, double mid) { return {cash, 0.0, mid, cash}; }

  double identity_gap() const noexcept { return wealth - (cash + inventory * mid); }

  /// True when |W - (X + q m)| <= tol relative to the size of the terms.
  bool identity_holds(double tol = 1e-9) const noexcept {
    const double scale = std::max(1.0, std::abs(cash) + std::abs(inventory * mid));
    return std::abs(identity_gap()) <= tol * scale;
  }
};

inline AccountState mark_to_market(AccountState a, double mid) {
  if (!(mid > 0.0) || !std::isfinite(mid)) throw SimulationIntegrityError("mark_to_market: invalid mid");
  a.wealth += a.inventory * (mid - a.mid);
  a.mid = mid;
  return a;
}

/// Executes one fill at its placement mid. A bid fill buys `size` at
/// mid - delta, an ask fill sells at mid + delta. Throws when the resulting
/// position exceeds `inventory_limit`.
inline AccountState apply_fill(AccountState a, const FillRecord& fill,
                               double inventory_limit = std::numeric_limits<double>::infinity(), double fee = 0.0) {
  if (!(fill.size > 0.0)) throw SimulationIntegrityError("apply_fill: fill size must be positive");
  a = mark_to_market(a, fill.mid);
  if (fill.side == Side::bid) {
    a.cash -= fill.price() * fill.size;
    a.inventory += fill.size;
  } else {
    a.cash += fill.price() * fill.size;
    a.inventory -= fill.size;
  }
  a.wealth += fill.delta * fill.size;
  a.cash -= fee;
  a.wealth -= fee;
  if (std::abs(a.inventory) > inventory_limit)
    throw SimulationIntegrityError("apply_fill: inventory limit breached");
  return a;
}

}  // namespace fbas
