#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "fbas/errors.hpp"
#include "fbas/market_model.hpp"

namespace fbas {

enum class Side { bid, ask };

struct EstimatorConfig {
  double window_sec = 600.0;            // mid samples kept for volatility
  std::size_t outcome_capacity = 5000;  // quote outcomes kept per side
  std::size_t markout_capacity = 200;   // matured fill markouts kept per side
  std::size_t buckets = 10;             // equal-width distance buckets on [0, bucket_delta_max]
  double bucket_delta_max = 0.5;
  std::size_t min_fills = 20;
  std::size_t min_returns = 10;
  std::size_t min_markouts = 20;

  void validate() const {
    if (!(window_sec > 0.0) || outcome_capacity == 0 || markout_capacity == 0 || buckets < 2 ||
        !(bucket_delta_max > 0.0))
      throw ConfigError("estimator config out of range");
  }
};

/// Rolling evidence for the market-parameter estimators.
///
/// Holds recent mid samples (bounded by time), per-side quote outcomes as
/// (distance, exposure, filled) triples (bounded by count, tallied into
/// distance buckets), and per-side markout losses of matured fills.
/// Single writer.
class EstimatorWindow {
 public:
  struct MidSample {
    std::int64_t ts_ns;
    double mid;
  };
  struct Outcome {
    double delta;
    double exposure_sec;
    bool filled;
    std::size_t bucket;
  };
  struct BucketTally {
    std::size_t count = 0;
    std::size_t fills = 0;
    double sum_delta = 0.0;
    double sum_exposure = 0.0;
  };

  explicit EstimatorWindow(EstimatorConfig cfg = {}) : cfg_(cfg) {
    cfg_.validate();
    for (auto& side : sides_) side.tallies.resize(cfg_.buckets);
  }

  const EstimatorConfig& config() const noexcept { return cfg_; }

  void add_mid(std::int64_t ts_ns, double mid) {
    if (!mids_.empty() && ts_ns < mids_.back().ts_ns)
      throw InvalidParameter("EstimatorWindow: mid samples must be time ordered");
    if (!(mid > 0.0) || !std::isfinite(mid)) throw InvalidParameter("EstimatorWindow: mid must be positive");
    mids_.push_back({ts_ns, mid});
    const auto horizon = static_cast<std::int64_t>(cfg_.window_sec * 1e9);
    while (!mids_.empty() && ts_ns - mids_.front().ts_ns > horizon) mids_.pop_front();
  }

  void add_quote_outcome(Side side, double delta, double exposure_sec, bool filled) {
    if (!std::isfinite(delta) || !(exposure_sec > 0.0))
      throw InvalidParameter("EstimatorWindow: outcome needs finite distance and positive exposure");
    auto& s = sides_[index(side)];
    const Outcome o{delta, exposure_sec, filled, bucket_of(delta)};
    s.outcomes.push_back(o);
    tally(s, o, +1);
    if (s.outcomes.size() > cfg_.outcome_capacity) {
      tally(s, s.outcomes.front(), -1);
      s.outcomes.pop_front();
    }
  }

  /// Signed markout per unit size of a matured fill; positive means the
  /// price moved against the filled side.
  void add_markout(Side side, double loss_per_unit) {
    if (!std::isfinite(loss_per_unit)) throw InvalidParameter("EstimatorWindow: non-finite markout");
    auto& m = sides_[index(side)].markouts;
    m.push_back(loss_per_unit);
    if (m.size() > cfg_.markout_capacity) m.pop_front();
  }

  const std::deque<MidSample>& mids() const noexcept { return mids_; }
  const std::deque<Outcome>& outcomes(Side side) const noexcept { return sides_[index(side)].outcomes; }
  const std::vector<BucketTally>& tallies(Side side) const noexcept { return sides_[index(side)].tallies; }
  const std::deque<double>& markouts(Side side) const noexcept { return sides_[index(side)].markouts; }

  std::size_t fill_count(Side side) const noexcept {
    std::size_t n = 0;
    for (const auto& t : tallies(side)) n += t.fills;
    return n;
  }

  bool empty() const noexcept {
    return mids_.empty() && sides_[0].outcomes.empty() && sides_[1].outcomes.empty() &&
           sides_[0].markouts.empty() && sides_[1].markouts.empty();
  }

  std::size_t bucket_of(double delta) const noexcept {
    const double width = cfg_.bucket_delta_max / static_cast<double>(cfg_.buckets);
    if (!(delta > 0.0)) return 0;
    const auto b = static_cast<std::size_t>(delta / width);
    return std::min(b, cfg_.buckets - 1);
  }

  double bucket_center(std::size_t b) const noexcept {
    const double width = cfg_.bucket_delta_max / static_cast<double>(cfg_.buckets);
    return (static_cast<double>(b) + 0.5) * width;
  }

 private:
  struct SideData {
    std::deque<Outcome> outcomes;
    std::vector<BucketTally> tallies;
    std::deque<double> markouts;
  };

  static std::size_t index(Side s) noexcept { return s == Side::bid ? 0 : 1; }

  static void tally(SideData& s, const Outcome& o, int sign) {
    auto& t = s.tallies[o.bucket];
    if (sign > 0) {
      ++t.count;
      t.fills += o.filled ? 1 : 0;
    } else {
      --t.count;
      t.fills -= o.filled ? 1 : 0;
    }
    if (t.count == 0) {
      t.sum_delta = 0.0;
      t.sum_exposure = 0.0;
    } else {
      t.sum_delta += sign * o.delta;
      t.sum_exposure += sign * o.exposure_sec;
    }
  }

  EstimatorConfig cfg_;
  std::deque<MidSample> mids_;
  std::array<SideData, 2> sides_;
};

struct IntensityFit {
  double A;
  double kappa;
};

/// Weighted least squares of log empirical fill rate on bucket distance.
///
/// Each usable bucket (0 < fills < count) gives a rate by inverting the
/// per-exposure fill probability, lambda = -ln(1 - p) / exposure. Weights are
/// the delta-method inverse variances of ln(lambda). Returns nullopt when
/// fewer than `min_fills` fills, fewer than two usable buckets, or a
/// non-negative slope.
inline std::optional<IntensityFit> fit_intensity(const std::vector<EstimatorWindow::BucketTally>& tallies,
                                                 std::size_t min_fills) {
  std::size_t total_fills = 0;
  for (const auto& t : tallies) total_fills += t.fills;
  if (total_fills < min_fills || total_fills == 0) return std::nullopt;

  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t usable = 0;
  for (const auto& t : tallies) {
    if (t.fills == 0 || t.fills >= t.count) continue;
    const double n = static_cast<double>(t.count);
    const double p = static_cast<double>(t.fills) / n;
    const double exposure = t.sum_exposure / n;
    const double l1p = std::log1p(-p);
    const double rate = -l1p / exposure;
    const double x = t.sum_delta / n;
    const double y = std::log(rate);
    const double w = n * (1.0 - p) * l1p * l1p / p;
    sw += w;
    sx += w * x;
    sy += w * y;
    sxx += w * x * x;
    sxy += w * x * y;
    ++usable;
  }
  if (usable < 2) return std::nullopt;
  const double denom = sw * sxx - sx * sx;
  if (!(denom > 0.0)) return std::nullopt;
  const double slope = (sw * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / sw;
  if (!(slope < 0.0) || !std::isfinite(intercept)) return std::nullopt;
  return IntensityFit{std::exp(intercept), -slope};
}

/// Realized volatility of log-mid returns per sqrt(second), converted to
/// price units at the latest mid. nullopt below `min_returns` returns.
inline std::optional<double> realized_volatility(const std::deque<EstimatorWindow::MidSample>& mids,
                                                 std::size_t min_returns) {
  double sum_sq = 0.0;
  double elapsed = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 1; i < mids.size(); ++i) {
    const double dt = static_cast<double>(mids[i].ts_ns - mids[i - 1].ts_ns) * 1e-9;
    if (dt <= 0.0) continue;
    const double r = std::log(mids[i].mid / mids[i - 1].mid);
    sum_sq += r * r;
    elapsed += dt;
    ++n;
  }
  if (n < min_returns || n == 0 || !(elapsed > 0.0)) return std::nullopt;
  return std::sqrt(sum_sq / elapsed) * mids.back().mid;
}

/// Mean positive part of the markout losses; nullopt below `min_samples`.
inline std::optional<double> mean_markout_loss(const std::deque<double>& losses, std::size_t min_samples) {
  if (losses.size() < min_samples || losses.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : losses) s += std::max(x, 0.0);
  return s / static_cast<double>(losses.size());
}

/// Which sub-estimators had enough data to override the defaults.
struct EstimateStatus {
  bool sigma = false;
  bool intensity_bid = false;
  bool intensity_ask = false;
  bool adverse_bid = false;
  bool adverse_ask = false;

  bool intensities_ready() const noexcept { return intensity_bid && intensity_ask; }
};

struct MarketEstimate {
  MarketParams params;
  EstimateStatus status;
};

inline MarketEstimate estimate_market_params_detailed(const EstimatorWindow& window, const MarketParams& defaults) {
  const auto& cfg = window.config();
  MarketEstimate out{defaults, {}};
  if (auto s = realized_volatility(window.mids(), cfg.min_returns)) {
    out.params.sigma = *s;
    out.status.sigma = true;
  }
  if (auto f = fit_intensity(window.tallies(Side::bid), cfg.min_fills)) {
    out.params.A_bid = f->A;
    out.params.kappa_bid = f->kappa;
    out.status.intensity_bid = true;
  }
  if (auto f = fit_intensity(window.tallies(Side::ask), cfg.min_fills)) {
    out.params.A_ask = f->A;
    out.params.kappa_ask = f->kappa;
    out.status.intensity_ask = true;
  }
  if (auto c = mean_markout_loss(window.markouts(Side::bid), cfg.min_markouts)) {
    out.params.c_bid = *c;
    out.status.adverse_bid = true;
  }
  if (auto c = mean_markout_loss(window.markouts(Side::ask), cfg.min_markouts)) {
    out.params.c_ask = *c;
    out.status.adverse_ask = true;
  }
  return out;
}

/// Rolling estimate of the local market parameters. Sub-estimators without
/// enough data keep the corresponding field of `defaults`.
inline MarketParams estimate_market_params(const EstimatorWindow& window, const MarketParams& defaults) {
  return estimate_market_params_detailed(window, defaults).params;
}

}  // namespace fbas
