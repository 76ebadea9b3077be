#pragma once

#include <array>
#include <cmath>
#include <string>

#include "fbas/errors.hpp"

namespace fbas {

/// Local Avellaneda-Stoikov parameters: volatility, per-side base arrival
/// intensity A, depth decay kappa and adverse-selection cost c.
struct MarketParams {
  double sigma = 0.0;
  double A_bid = 0.0;
  double A_ask = 0.0;
  double kappa_bid = 1.0;
  double kappa_ask = 1.0;
  double c_bid = 0.0;
  double c_ask = 0.0;

  bool valid() const noexcept {
    const std::array<double, 7> all{sigma, A_bid, A_ask, kappa_bid, kappa_ask, c_bid, c_ask};
    for (double x : all)
      if (!std::isfinite(x)) return false;
    return sigma >= 0.0 && A_bid >= 0.0 && A_ask >= 0.0 && kappa_bid > 0.0 && kappa_ask > 0.0 &&
           c_bid >= 0.0 && c_ask >= 0.0;
  }

  void validate() const {
    if (!valid()) throw InvalidParameter("MarketParams out of range");
  }

  friend bool operator==(const MarketParams&, const MarketParams&) = default;
};

/// Quote distances from the mid for one decision.
struct QuoteAction {
  double delta_bid = 0.0;
  double delta_ask = 0.0;
  friend bool operator==(const QuoteAction&, const QuoteAction&) = default;
};

/// Which sides are allowed to quote. A disabled side has zero fill probability.
struct SideGates {
  bool bid = true;
  bool ask = true;
};

struct FillProbabilities {
  double p_bid = 0.0;
  double p_ask = 0.0;
};

/// Four independent fill outcomes of one step. Index order matches
/// `inventory_delta`: none, bid only, ask only, both.
struct TransitionDistribution {
  double p00 = 1.0;
  double p10 = 0.0;
  double p01 = 0.0;
  double p11 = 0.0;

  static constexpr std::array<int, 4> inventory_delta{0, +1, -1, 0};

  std::array<double, 4> probabilities() const { return {p00, p10, p01, p11}; }
};

/// Reward-space coordinates: spread capture, next inventory, squared next
/// inventory and adverse-selection cost. Used both for one-step expectations
/// and for discounted occupancies.
struct FeatureVector {
  double pnl = 0.0;
  double q_next = 0.0;
  double q2_next = 0.0;
  double adv = 0.0;

  FeatureVector& operator+=(const FeatureVector& o) noexcept {
    pnl += o.pnl;
    q_next += o.q_next;
    q2_next += o.q2_next;
    adv += o.adv;
    return *this;
  }
  friend FeatureVector operator+(FeatureVector a, const FeatureVector& b) noexcept { return a += b; }
  friend FeatureVector operator*(double s, const FeatureVector& f) noexcept {
    return {s * f.pnl, s * f.q_next, s * f.q2_next, s * f.adv};
  }
  std::array<double, 4> as_array() const { return {pnl, q_next, q2_next, adv}; }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Unit conventions shared by the forward features and the backward rows.
struct FeatureConfig {
  double order_size = 1.0;  // v; one inventory grid step
  double risk_scale = 1.0;  // multiplier on the squared-inventory coordinate
};

/// lambda(delta) = A exp(-kappa delta).
inline double fill_intensity(double delta, double A, double kappa) {
  if (!std::isfinite(delta) || !std::isfinite(A) || !std::isfinite(kappa))
    throw InvalidParameter("fill_intensity: non-finite input");
  if (kappa <= 0.0 || A < 0.0) throw InvalidParameter("fill_intensity: need kappa > 0 and A >= 0");
  return A * std::exp(-kappa * delta);
}

/// Probability of at least one Poisson arrival with rate lambda during dt.
inline double fill_probability(double lambda, double dt, bool enabled = true) {
  if (!(lambda >= 0.0) || !(dt > 0.0)) throw InvalidParameter("fill_probability: need lambda >= 0 and dt > 0");
  if (!enabled) return 0.0;
  return -std::expm1(-lambda * dt);
}

inline FillProbabilities fill_probabilities(const QuoteAction& a, const MarketParams& xi, double dt,
                                            SideGates gates = {}) {
  return {fill_probability(fill_intensity(a.delta_bid, xi.A_bid, xi.kappa_bid), dt, gates.bid),
          fill_probability(fill_intensity(a.delta_ask, xi.A_ask, xi.kappa_ask), dt, gates.ask)};
}

/// E[(q')^2] for q' = q + N_b - N_a with independent Bernoulli fills.
inline double inventory_second_moment(double q, double p_bid, double p_ask) noexcept {
  return q * q + 2.0 * q * (p_bid - p_ask) + p_bid + p_ask - 2.0 * p_bid * p_ask;
}

inline TransitionDistribution transition_distribution(double p_bid, double p_ask) noexcept {
  return {(1.0 - p_bid) * (1.0 - p_ask), p_bid * (1.0 - p_ask), (1.0 - p_bid) * p_ask, p_bid * p_ask};
}

/// One-step expected features at grid inventory q (units of the order size).
/// The adverse-selection cost stays in its own coordinate and is not netted
/// out of the spread capture.
inline FeatureVector expected_features(const FillProbabilities& p, double q, const QuoteAction& a,
                                       const MarketParams& xi, const FeatureConfig& cfg = {}) {
  const double v = cfg.order_size;
  return {p.p_bid * v * a.delta_bid + p.p_ask * v * a.delta_ask,
          v * (q + p.p_bid - p.p_ask),
          cfg.risk_scale * v * v * inventory_second_moment(q, p.p_bid, p.p_ask),
          p.p_bid * xi.c_bid + p.p_ask * xi.c_ask};
}

inline FeatureVector expected_features(double q, const QuoteAction& a, const MarketParams& xi, double dt,
                                       SideGates gates = {}, const FeatureConfig& cfg = {}) {
  return expected_features(fill_probabilities(a, xi, dt, gates), q, a, xi, cfg);
}

}  // namespace fbas
