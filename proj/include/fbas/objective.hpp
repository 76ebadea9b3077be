#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fbas/errors.hpp"
#include "fbas/market_model.hpp"

namespace fbas {

/// Weights on the four reward coordinates. The scalar reward of a feature
/// vector phi is dot(z, phi).
struct ObjectiveVector {
  double pnl = 1.0;
  double q = 0.0;
  double q2 = 0.0;
  double adv = 0.0;

  double dot(const FeatureVector& f) const noexcept { return pnl * f.pnl + q * f.q_next + q2 * f.q2_next + adv * f.adv; }
  ObjectiveVector scaled(double s) const noexcept { return {s * pnl, s * q, s * q2, s * adv}; }
  std::array<double, 4> as_array() const { return {pnl, q, q2, adv}; }
  friend bool operator==(const ObjectiveVector&, const ObjectiveVector&) = default;
};

/// The admissible set: pnl weight pinned to one, inventory penalty at least
/// lambda_min, non-positive adverse weight and implied target within q_max.
struct ObjectiveConstraints {
  double lambda_min = 1e-6;
  double q_max = 10.0;

  void validate() const {
    if (!(lambda_min > 0.0) || !(q_max > 0.0)) throw ConfigError("objective constraints need lambda_min > 0 and Q_max > 0");
  }
};

struct ImpliedTarget {
  double lambda;
  double theta;
};

/// Objective of the reward dW - lambda (q' - theta)^2 - nu adv, dropping the
/// action-independent constant.
inline ObjectiveVector target_objective(double theta, double lambda, double nu) {
  if (!(lambda >= 0.0) || !(nu >= 0.0)) throw InvalidParameter("target_objective: penalties must be >= 0");
  return {1.0, 2.0 * lambda * theta, -lambda, -nu};
}

inline ImpliedTarget implied_target(const ObjectiveVector& z) {
  if (!(z.q2 < 0.0)) throw DegenerateObjective("implied_target: z_q2 must be negative");
  return {-z.q2, z.q / (-2.0 * z.q2)};
}

inline double implied_theta(const ObjectiveVector& z) { return implied_target(z).theta; }

inline bool in_constraint_set(const ObjectiveVector& z, const ObjectiveConstraints& c) noexcept {
  return z.pnl == 1.0 && z.q2 <= -c.lambda_min && z.adv <= 0.0 && std::abs(z.q / (-2.0 * z.q2)) <= c.q_max;
}

/// Sequential clamp onto the admissible set: pin pnl, clamp the risk weight,
/// clamp the adverse weight, then shrink z_q until |theta| <= q_max.
inline ObjectiveVector project_objective(ObjectiveVector z, const ObjectiveConstraints& c) {
  z.pnl = 1.0;
  z.q2 = std::min(z.q2, -c.lambda_min);
  z.adv = std::min(z.adv, 0.0);
  if (std::abs(z.q / (-2.0 * z.q2)) > c.q_max) {
    z.q = std::copysign(c.q_max * 2.0 * (-z.q2), z.q);
    // The rescaled z_q can land one ulp outside; step back inside.
    while (std::abs(z.q / (-2.0 * z.q2)) > c.q_max) z.q = std::nextafter(z.q, 0.0);
  }
  return z;
}

inline ObjectiveVector mix_with_prior(const ObjectiveVector& z_hat, const ObjectiveVector& z_prior, double mix_beta) {
  if (!(mix_beta >= 0.0 && mix_beta <= 1.0)) throw InvalidParameter("mix_with_prior: mix_beta must lie in [0, 1]");
  if (mix_beta == 0.0) return z_prior;
  if (mix_beta == 1.0) return z_hat;
  const double a = 1.0 - mix_beta;
  return {a * z_prior.pnl + mix_beta * z_hat.pnl, a * z_prior.q + mix_beta * z_hat.q,
          a * z_prior.q2 + mix_beta * z_hat.q2, a * z_prior.adv + mix_beta * z_hat.adv};
}

inline ObjectiveVector smooth_objective(const ObjectiveVector& z_prev, const ObjectiveVector& z_new, double alpha_z,
                                        const ObjectiveConstraints& c) {
  if (!(alpha_z >= 0.0 && alpha_z <= 1.0)) throw InvalidParameter("smooth_objective: alpha_z must lie in [0, 1]");
  ObjectiveVector blended;
  if (alpha_z == 1.0) {
    blended = z_new;
  } else if (alpha_z == 0.0) {
    blended = z_prev;
  } else {
    const double a = 1.0 - alpha_z;
    blended = {a * z_prev.pnl + alpha_z * z_new.pnl, a * z_prev.q + alpha_z * z_new.q,
               a * z_prev.q2 + alpha_z * z_new.q2, a * z_prev.adv + alpha_z * z_new.adv};
  }
  return project_objective(blended, c);
}

// ---------------------------------------------------------------------------
// Realized rewards and the backward rows they are regressed on.

/// Fill indicators of one decision step together with the quoted distances.
struct StepFills {
  bool bid = false;
  bool ask = false;
  double size = 1.0;
  double delta_bid = 0.0;
  double delta_ask = 0.0;

  bool any() const noexcept { return bid || ask; }
};

/// Markout-horizon reward of a step's fills. Fees and impact are not part of
/// the label.
inline double markout_reward(const StepFills& f, double mid_now, double mid_at_H) {
  const double dm = mid_at_H - mid_now;
  double r = 0.0;
  if (f.bid) r += f.size * (f.delta_bid + dm);
  if (f.ask) r += f.size * (f.delta_ask - dm);
  return r;
}

/// Fill-conditional row: realized spread capture, next inventory, risk-scaled
/// squared next inventory, adverse-cost proxy.
struct BackwardRow {
  double b0 = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double b3 = 0.0;
};

inline BackwardRow backward_row(const StepFills& f, double q_next, const MarketParams& xi, const FeatureConfig& cfg) {
  BackwardRow b;
  if (f.bid) {
    b.b0 += f.size * f.delta_bid;
    b.b3 += xi.c_bid;
  }
  if (f.ask) {
    b.b0 += f.size * f.delta_ask;
    b.b3 += xi.c_ask;
  }
  b.b1 = q_next;
  b.b2 = cfg.risk_scale * q_next * q_next;
  return b;
}

struct RewardObservation {
  double time = 0.0;  // decision step at which the fills happened
  BackwardRow row;
  double label = 0.0;
  std::vector<double> embedding;
};

struct KernelQuery {
  std::span<const double> embedding;
  double bandwidth;
};

/// Normalized weights proportional to exp(-(now - t_i)/ell), optionally times
/// a Gaussian kernel in embedding space. Empty window gives no weights.
inline std::vector<double> window_weights(std::span<const RewardObservation> window, double now, double ell,
                                          std::optional<KernelQuery> kernel = std::nullopt) {
  if (!(ell > 0.0)) throw InvalidParameter("window_weights: ell must be positive");
  if (kernel && !(kernel->bandwidth > 0.0)) throw InvalidParameter("window_weights: bandwidth must be positive");
  std::vector<double> logw(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) {
    double lw = -(now - window[i].time) / ell;
    if (kernel) {
      const auto& e = window[i].embedding;
      if (e.size() != kernel->embedding.size())
        throw InvalidParameter("window_weights: observation embedding has the wrong dimension");
      double d2 = 0.0;
      for (std::size_t k = 0; k < e.size(); ++k) {
        const double d = kernel->embedding[k] - e[k];
        d2 += d * d;
      }
      lw -= d2 / (2.0 * kernel->bandwidth * kernel->bandwidth);
    }
    logw[i] = lw;
  }
  if (logw.empty()) return logw;
  const double top = *std::max_element(logw.begin(), logw.end());
  double total = 0.0;
  for (double& w : logw) {
    w = std::exp(w - top);
    total += w;
  }
  for (double& w : logw) w /= total;
  return logw;
}

/// Residual ridge estimate with the pnl weight pinned to one:
/// z_rest = (C + ridge_lambda I)^{-1} u over x_i = (b1, b2, b3) and
/// y_i = r_i - b0_i.
inline ObjectiveVector ridge_estimate(std::span<const RewardObservation> window, std::span<const double> weights,
                                      double ridge_lambda) {
  if (!(ridge_lambda > 0.0)) throw InvalidParameter("ridge_estimate: ridge_lambda must be positive");
  if (weights.size() != window.size()) throw InvalidParameter("ridge_estimate: weight count mismatch");
  if (window.empty()) return {1.0, 0.0, 0.0, 0.0};
  Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
  Eigen::Vector3d u = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < window.size(); ++i) {
    const auto& r = window[i].row;
    const Eigen::Vector3d x(r.b1, r.b2, r.b3);
    const double y = window[i].label - r.b0;
    C.noalias() += weights[i] * x * x.transpose();
    u.noalias() += weights[i] * y * x;
  }
  C.diagonal().array() += ridge_lambda;
  const Eigen::Vector3d z = C.ldlt().solve(u);
  return {1.0, z[0], z[1], z[2]};
}

/// Unregularized forward-backward estimate sum_i w_i r_i b_i.
inline ObjectiveVector fb_estimate(std::span<const RewardObservation> window, std::span<const double> weights) {
  if (weights.size() != window.size()) throw InvalidParameter("fb_estimate: weight count mismatch");
  ObjectiveVector z{0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < window.size(); ++i) {
    const double s = weights[i] * window[i].label;
    const auto& r = window[i].row;
    z.pnl += s * r.b0;
    z.q += s * r.b1;
    z.q2 += s * r.b2;
    z.adv += s * r.b3;
  }
  return z;
}

// ---------------------------------------------------------------------------
// Rolling adapter

enum class ObjectiveEstimator { ridge, fb };

struct AdapterConfig {
  ObjectiveEstimator estimator = ObjectiveEstimator::ridge;
  std::size_t markout_steps = 10;   // H
  std::size_t window_steps = 2000;  // H_roll
  double decay_steps = 500.0;       // ell
  double ridge_lambda = 1e-3;
  double mix_beta = 0.5;
  double alpha_z = 0.05;
  double kernel_bandwidth = 0.0;  // <= 0 disables the regime kernel
  std::size_t min_observations = 50;
  double lambda0 = 1e-3;  // prior inventory penalty
  double nu0 = 1.0;       // prior adverse-selection penalty
  ObjectiveConstraints constraints{};

  ObjectiveVector z_prior() const { return target_objective(0.0, lambda0, nu0); }

  void validate() const {
    constraints.validate();
    if (markout_steps == 0 || window_steps < markout_steps) throw ConfigError("adapter: need 0 < H <= H_roll");
    if (!(decay_steps > 0.0)) throw ConfigError("adapter: decay length must be positive");
    if (!(ridge_lambda > 0.0)) throw ConfigError("adapter: ridge_lambda must be positive");
    if (!(mix_beta >= 0.0 && mix_beta <= 1.0)) throw ConfigError("adapter: mix_beta must lie in [0, 1]");
    if (!(alpha_z >= 0.0 && alpha_z <= 1.0)) throw ConfigError("adapter: alpha_z must lie in [0, 1]");
    if (!(lambda0 >= constraints.lambda_min) || !(nu0 >= 0.0))
      throw ConfigError("adapter: prior needs lambda0 >= lambda_min and nu0 >= 0");
  }
};

/// A fill step whose markout label has just been computed.
struct MaturedFill {
  std::int64_t step;
  StepFills fills;
  double mid_at_fill;
  double mid_at_H;
};

/// Objective state after one update.
struct AdapterState {
  ObjectiveVector z_hat;     // raw estimate (prior while warming up)
  ObjectiveVector z_mixed;   // projected prior mix
  ObjectiveVector z;         // smoothed objective fed to the solver
  std::size_t window_size = 0;
  bool live = false;         // window reached min_observations
};

/// Rolling window of markout-labelled fills producing the smoothed objective.
///
/// Fill steps are held as pending until `markout_steps` decisions have passed,
/// then labelled and moved into the window. At decision t the window holds
/// fills from steps in [t - window_steps, t - markout_steps].
class ObjectiveAdapter {
 public:
  explicit ObjectiveAdapter(AdapterConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    z_smooth_ = project_objective(cfg_.z_prior(), cfg_.constraints);
  }

  const AdapterConfig& config() const noexcept { return cfg_; }

  void record_fills(std::int64_t step, const StepFills& fills, const BackwardRow& row, double mid,
                    std::vector<double> embedding = {}) {
    if (!fills.any()) return;
    pending_.push_back({step, fills, row, mid, std::move(embedding)});
  }

  /// Labels every pending fill whose markout horizon has elapsed at `step`.
  std::vector<MaturedFill> mature(std::int64_t step, double mid_now) {
    std::vector<MaturedFill> out;
    const auto H = static_cast<std::int64_t>(cfg_.markout_steps);
    while (!pending_.empty() && step - pending_.front().step >= H) {
      auto& p = pending_.front();
      RewardObservation obs;
      obs.time = static_cast<double>(p.step);
      obs.row = p.row;
      obs.label = markout_reward(p.fills, p.mid, mid_now);
      obs.embedding = std::move(p.embedding);
      window_.push_back(std::move(obs));
      out.push_back({p.step, p.fills, p.mid, mid_now});
      pending_.pop_front();
    }
    return out;
  }

  AdapterState update(std::int64_t step, std::span<const double> embedding_now = {}) {
    const double oldest = static_cast<double>(step) - static_cast<double>(cfg_.window_steps);
    const auto expired = std::find_if(window_.begin(), window_.end(),
                                      [oldest](const RewardObservation& o) { return o.time >= oldest; });
    window_.erase(window_.begin(), expired);

    AdapterState s;
    s.window_size = window_.size();
    s.live = window_.size() >= cfg_.min_observations && window_.size() > 0;
    const ObjectiveVector prior = cfg_.z_prior();
    if (s.live) {
      const std::span<const RewardObservation> obs(window_);
      std::vector<double> w;
      if (cfg_.kernel_bandwidth > 0.0 && !embedding_now.empty()) {
        std::vector<RewardObservation> standardized(obs.begin(), obs.end());
        std::vector<double> query(embedding_now.begin(), embedding_now.end());
        standardize(standardized, query);
        w = window_weights(standardized, static_cast<double>(step), cfg_.decay_steps,
                           KernelQuery{query, cfg_.kernel_bandwidth});
      } else {
        w = window_weights(obs, static_cast<double>(step), cfg_.decay_steps);
      }
      s.z_hat = cfg_.estimator == ObjectiveEstimator::ridge ? ridge_estimate(obs, w, cfg_.ridge_lambda)
                                                            : fb_estimate(obs, w);
      s.z_mixed = project_objective(mix_with_prior(s.z_hat, prior, cfg_.mix_beta), cfg_.constraints);
    } else {
      s.z_hat = prior;
      s.z_mixed = project_objective(prior, cfg_.constraints);
    }
    z_smooth_ = smooth_objective(z_smooth_, s.z_mixed, cfg_.alpha_z, cfg_.constraints);
    s.z = z_smooth_;
    return s;
  }

  const ObjectiveVector& current() const noexcept { return z_smooth_; }
  const std::vector<RewardObservation>& window() const noexcept { return window_; }
  std::size_t pending() const noexcept { return pending_.size(); }

 private:
  struct Pending {
    std::int64_t step;
    StepFills fills;
    BackwardRow row;
    double mid;
    std::vector<double> embedding;
  };

  // Per-coordinate z-scores over the window and the query point.
  static void standardize(std::vector<RewardObservation>& obs, std::vector<double>& query) {
    const std::size_t d = query.size();
    for (std::size_t k = 0; k < d; ++k) {
      double mean = query[k];
      for (const auto& o : obs) mean += o.embedding.at(k);
      mean /= static_cast<double>(obs.size() + 1);
      double var = (query[k] - mean) * (query[k] - mean);
      for (const auto& o : obs) var += (o.embedding[k] - mean) * (o.embedding[k] - mean);
      var /= static_cast<double>(obs.size() + 1);
      const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
      query[k] = (query[k] - mean) / sd;
      for (auto& o : obs) o.embedding[k] = (o.embedding[k] - mean) / sd;
    }
  }

  AdapterConfig cfg_;
  std::deque<Pending> pending_;
  std::vector<RewardObservation> window_;
  ObjectiveVector z_smooth_;
};

}  // namespace fbas
