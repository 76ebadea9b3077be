#pragma once

#include <cstdint>

#include "fbas/estimator.hpp"

namespace fbas {

enum class EventKind { mid_update, trade };
enum class Aggressor { buy, sell, none };

/// One ingested order-flow event. A sell aggressor trades against resting
/// bids, a buy aggressor against resting asks.
struct MarketEvent {
  std::int64_t timestamp_ns = 0;
  EventKind kind = EventKind::mid_update;
  double price = 0.0;
  double size = 0.0;
  Aggressor aggressor = Aggressor::none;

  friend bool operator==(const MarketEvent&, const MarketEvent&) = default;
};

/// One simulated execution of our own quote.
struct FillRecord {
  std::int64_t timestamp_ns = 0;
  Side side = Side::bid;
  double delta = 0.0;  // distance from the mid at placement
  double size = 0.0;
  double mid = 0.0;    // mid at placement
  bool matured = false;

  double price() const noexcept { return side == Side::bid ? mid - delta : mid + delta; }
  friend bool operator==(const FillRecord&, const FillRecord&) = default;
};

}  // namespace fbas
