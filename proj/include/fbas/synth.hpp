#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fbas/errors.hpp"
#include "fbas/events.hpp"
#include "fbas/rng.hpp"

namespace fbas {

/// Parameters of the synthetic market: an arithmetic Brownian mid with
/// optional drift, plus Poisson aggressor flow whose depth is exponential, so
/// that a resting quote at distance delta is reached at rate A exp(-kappa delta).
struct SynthConfig {
  double mid0 = 100.0;
  double sigma = 0.01;          // price units per sqrt(second)
  double drift_per_sec = 0.0;   // price units per second
  double A_bid = 1.0;           // sell aggressors per second (hit bids)
  double A_ask = 1.0;           // buy aggressors per second (lift asks)
  double kappa_bid = 20.0;      // per price unit
  double kappa_ask = 20.0;
  double duration_sec = 1000.0;
  double dt_event_sec = 1.0;
  double trade_size = 1.0;

  void validate() const {
    if (!(mid0 > 0.0) || !(sigma >= 0.0) || !std::isfinite(drift_per_sec) || !(A_bid >= 0.0) || !(A_ask >= 0.0) ||
        !(kappa_bid > 0.0) || !(kappa_ask > 0.0) || !(duration_sec > 0.0) || !(dt_event_sec > 0.0) ||
        !(trade_size > 0.0))
      throw ConfigError("synthetic market parameters out of range");
  }

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

namespace detail {

inline std::int64_t to_ns(double seconds) { return static_cast<std::int64_t>(std::llround(seconds * 1e9)); }

// Arrival times of a Poisson process with `rate` on [t0, t0 + dt).
inline void poisson_arrivals(RandomStream& rng, double rate, double t0, double dt, std::vector<double>& out) {
  out.clear();
  if (rate <= 0.0) return;
  double t = rng.exponential(rate);
  while (t < dt) {
    out.push_back(t0 + t);
    t += rng.exponential(rate);
  }
}

}  // namespace detail

/// Bit-reproducible event stream for `seed`. Mid updates land on the event
/// grid; trades inside an interval are priced off the mid at its start.
inline std::vector<MarketEvent> synthesize_market(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  RandomStream mid_rng = RandomStream::derive(seed, "synth.mid");
  RandomStream sell_rng = RandomStream::derive(seed, "synth.sell");
  RandomStream buy_rng = RandomStream::derive(seed, "synth.buy");

  const auto steps = static_cast<std::int64_t>(std::floor(cfg.duration_sec / cfg.dt_event_sec + 1e-9));
  const double dt = cfg.dt_event_sec;
  const double step_sd = cfg.sigma * std::sqrt(dt);

  std::vector<MarketEvent> events;
  events.reserve(static_cast<std::size_t>(steps + 1) *
                 static_cast<std::size_t>(1.0 + (cfg.A_bid + cfg.A_ask) * dt + 0.5));
  double mid = cfg.mid0;
  events.push_back({0, EventKind::mid_update, mid, 0.0, Aggressor::none});

  std::vector<double> sells, buys;
  struct Trade {
    double t;
    double price;
    Aggressor side;
  };
  std::vector<Trade> trades;
  for (std::int64_t k = 0; k < steps; ++k) {
    const double t0 = static_cast<double>(k) * dt;
    detail::poisson_arrivals(sell_rng, cfg.A_bid, t0, dt, sells);
    detail::poisson_arrivals(buy_rng, cfg.A_ask, t0, dt, buys);
    trades.clear();
    for (double t : sells) trades.push_back({t, mid - sell_rng.exponential(cfg.kappa_bid), Aggressor::sell});
    for (double t : buys) trades.push_back({t, mid + buy_rng.exponential(cfg.kappa_ask), Aggressor::buy});
    std::stable_sort(trades.begin(), trades.end(), [](const Trade& a, const Trade& b) { return a.t < b.t; });
    for (const auto& tr : trades) {
      if (!(tr.price > 0.0)) throw ConfigError("synthetic trade price went non-positive; lower kappa or raise mid0");
      events.push_back({detail::to_ns(tr.t), EventKind::trade, tr.price, cfg.trade_size, tr.side});
    }

    const double z = cfg.sigma > 0.0 ? mid_rng.normal() : 0.0;
    mid += cfg.drift_per_sec * dt + step_sd * z;
    if (!(mid > 0.0)) throw ConfigError("synthetic mid-price went non-positive; lower sigma or drift");
    events.push_back({detail::to_ns(static_cast<double>(k + 1) * dt), EventKind::mid_update, mid, 0.0,
                      Aggressor::none});
  }
  return events;
}

}  // namespace fbas
