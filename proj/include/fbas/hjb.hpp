#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fbas/errors.hpp"
#include "fbas/market_model.hpp"
#include "fbas/objective.hpp"

namespace fbas {

/// Integer inventory states q_min..q_max in units of the order size.
struct InventoryGrid {
  int q_min = -10;
  int q_max = 10;

  std::size_t size() const noexcept { return static_cast<std::size_t>(q_max - q_min + 1); }
  std::size_t index(int q) const noexcept { return static_cast<std::size_t>(q - q_min); }
  int state(std::size_t i) const noexcept { return q_min + static_cast<int>(i); }
  bool contains(int q) const noexcept { return q >= q_min && q <= q_max; }

  /// The bid is withdrawn at the top of the grid and the ask at the bottom,
  /// so the transition never leaves the grid.
  SideGates gates(int q) const noexcept { return {q < q_max, q > q_min}; }

  void validate() const {
    if (q_min > q_max) throw ConfigError("inventory grid is empty");
  }
};

/// Finite set of (delta_bid, delta_ask) pairs ordered lexicographically.
class ActionGrid {
 public:
  ActionGrid() = default;
  explicit ActionGrid(std::vector<QuoteAction> actions) : actions_(std::move(actions)) {
    std::stable_sort(actions_.begin(), actions_.end(), [](const QuoteAction& a, const QuoteAction& b) {
      return a.delta_bid < b.delta_bid || (a.delta_bid == b.delta_bid && a.delta_ask < b.delta_ask);
    });
  }

  /// Cartesian product of the per-side levels.
  static ActionGrid product(std::span<const double> bid_levels, std::span<const double> ask_levels) {
    std::vector<QuoteAction> a;
    a.reserve(bid_levels.size() * ask_levels.size());
    for (double b : bid_levels)
      for (double s : ask_levels) a.push_back({b, s});
    return ActionGrid(std::move(a));
  }

  /// n_bid x n_ask equally spaced levels on [delta_min, delta_max].
  static ActionGrid uniform(double delta_min, double delta_max, std::size_t n_bid, std::size_t n_ask) {
    return product(levels(delta_min, delta_max, n_bid), levels(delta_min, delta_max, n_ask));
  }

  static std::vector<double> levels(double lo, double hi, std::size_t n) {
    if (n == 0) throw ConfigError("action grid needs at least one level per side");
    if (n == 1) return {lo};
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return out;
  }

  std::size_t size() const noexcept { return actions_.size(); }
  bool empty() const noexcept { return actions_.empty(); }
  const QuoteAction& operator[](std::size_t i) const { return actions_[i]; }
  std::span<const QuoteAction> actions() const noexcept { return actions_; }

  void validate() const {
    if (actions_.empty()) throw ConfigError("action grid is empty");
    for (const auto& a : actions_)
      if (!std::isfinite(a.delta_bid) || !std::isfinite(a.delta_ask) || a.delta_bid < 0.0 || a.delta_ask < 0.0)
        throw ConfigError("action grid distances must be finite and non-negative");
  }

 private:
  std::vector<QuoteAction> actions_;
};

struct HjbSettings {
  int horizon_steps = 10;       // N
  double dt = 1.0;              // seconds per HJB step
  double discount_beta = 1.0;   // in (0, 1]
  FeatureConfig features{};

  void validate() const {
    if (horizon_steps < 0) throw ConfigError("HJB horizon must be >= 0");
    if (!(dt > 0.0)) throw ConfigError("HJB dt must be positive");
    if (!(discount_beta > 0.0 && discount_beta <= 1.0)) throw ConfigError("discount_beta must lie in (0, 1]");
    if (!(features.order_size > 0.0) || !(features.risk_scale >= 0.0)) throw ConfigError("feature scaling out of range");
  }
};

/// One layer U_n of expected discounted feature occupancy per grid state.
struct VectorValueFunction {
  int layer = 0;
  std::vector<FeatureVector> values;
};

struct HJBSolution {
  InventoryGrid grid;
  std::vector<VectorValueFunction> layers;        // U_0..U_N
  std::vector<std::vector<std::size_t>> policy;   // policy[n-1][i]: greedy action of layer n
  std::vector<std::vector<double>> scalar;        // V_n = U_n . z

  int horizon() const noexcept { return static_cast<int>(layers.size()) - 1; }
  const std::vector<double>& final_values() const { return scalar.back(); }
};

/// F = phi(q, a) + beta E[U_prev(q')]; the continuation uses the four fill
/// outcomes, with the both-fill outcome staying at q. Sides are gated at the
/// grid edges in addition to `gates`.
inline FeatureVector forward_features(int q, const QuoteAction& action, std::span<const FeatureVector> U_prev,
                                      const InventoryGrid& grid, const MarketParams& xi, const HjbSettings& s,
                                      SideGates gates = {}) {
  const SideGates edge = grid.gates(q);
  gates.bid = gates.bid && edge.bid;
  gates.ask = gates.ask && edge.ask;
  const FillProbabilities p = fill_probabilities(action, xi, s.dt, gates);
  FeatureVector F = expected_features(p, static_cast<double>(q), action, xi, s.features);
  const TransitionDistribution t = transition_distribution(p.p_bid, p.p_ask);
  const std::size_t i = grid.index(q);
  F += (s.discount_beta * (t.p00 + t.p11)) * U_prev[i];
  if (t.p10 > 0.0) F += (s.discount_beta * t.p10) * U_prev[i + 1];
  if (t.p01 > 0.0) F += (s.discount_beta * t.p01) * U_prev[i - 1];
  return F;
}

/// Index of the row maximizing F . z; the lowest index wins ties.
inline std::size_t select_action(std::span<const FeatureVector> F_row, const ObjectiveVector& z) {
  if (F_row.empty()) throw InfeasibleState("select_action: no feasible action");
  std::size_t best = 0;
  double best_value = z.dot(F_row[0]);
  for (std::size_t i = 1; i < F_row.size(); ++i) {
    const double v = z.dot(F_row[i]);
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  return best;
}

inline std::vector<double> scalar_value(std::span<const FeatureVector> U, const ObjectiveVector& z) {
  std::vector<double> out(U.size());
  for (std::size_t i = 0; i < U.size(); ++i) out[i] = z.dot(U[i]);
  return out;
}

/// Finite-horizon vector Bellman recursion with reusable workspace.
///
/// The greedy action of each state is found with the scalar action value
/// regrouped as c_a + p10_a Y_q + p01_a Z_q, where c_a collects everything
/// that depends on the action only and Y_q, Z_q the state-dependent
/// coefficients of the two single-fill outcomes (terms constant in the action
/// are dropped). The chosen action's feature vector is then formed explicitly,
/// so U_n is the exact vector recursion and V_n = U_n . z.
class HjbSolver {
 public:
  struct FinalLayer {
    std::span<const FeatureVector> U;
    std::span<const double> V;
    std::span<const std::size_t> policy;  // empty when the horizon is 0
  };

  /// Solves and keeps every layer.
  HJBSolution solve(const MarketParams& xi, const ObjectiveVector& z, const InventoryGrid& grid,
                    const ActionGrid& actions, const HjbSettings& s) {
    HJBSolution out;
    out.grid = grid;
    run(xi, z, grid, actions, s, &out);
    return out;
  }

  /// Solves and exposes only layer N. The spans stay valid until the next call.
  FinalLayer solve_final(const MarketParams& xi, const ObjectiveVector& z, const InventoryGrid& grid,
                         const ActionGrid& actions, const HjbSettings& s) {
    const int N = run(xi, z, grid, actions, s, nullptr);
    return {U_cur_, V_cur_, N > 0 ? std::span<const std::size_t>(policy_) : std::span<const std::size_t>()};
  }

 private:
  // Per-action coefficients for one combination of side gates.
  struct Variant {
    std::vector<double> c, p10, p01, stay;
    std::vector<FillProbabilities> p;
    std::vector<FeatureVector> base;  // features at q = 0
  };

  static std::size_t variant_index(SideGates g) noexcept { return (g.bid ? 1u : 0u) | (g.ask ? 2u : 0u); }

  void prepare(const MarketParams& xi, const ObjectiveVector& z, const ActionGrid& actions, const HjbSettings& s) {
    const std::size_t A = actions.size();
    for (std::size_t g = 0; g < 4; ++g) {
      const SideGates gates{(g & 1u) != 0, (g & 2u) != 0};
      auto& var = variants_[g];
      var.c.resize(A);
      var.p10.resize(A);
      var.p01.resize(A);
      var.stay.resize(A);
      var.p.resize(A);
      var.base.resize(A);
      for (std::size_t a = 0; a < A; ++a) {
        const FillProbabilities p = fill_probabilities(actions[a], xi, s.dt, gates);
        const TransitionDistribution t = transition_distribution(p.p_bid, p.p_ask);
        const FeatureVector f0 = expected_features(p, 0.0, actions[a], xi, s.features);
        var.p[a] = p;
        var.base[a] = f0;
        var.p10[a] = t.p10;
        var.p01[a] = t.p01;
        var.stay[a] = t.p00 + t.p11;
        var.c[a] = z.dot(f0);
      }
    }
  }

  int run(const MarketParams& xi, const ObjectiveVector& z, const InventoryGrid& grid, const ActionGrid& actions,
          const HjbSettings& s, HJBSolution* keep) {
    xi.validate();
    grid.validate();
    actions.validate();
    s.validate();
    const int N = s.horizon_steps;
    const std::size_t S = grid.size();
    const std::size_t A = actions.size();
    const double v = s.features.order_size;
    const double q2_coef = 2.0 * z.q2 * s.features.risk_scale * v * v;
    const double beta = s.discount_beta;

    prepare(xi, z, actions, s);
    U_prev_.assign(S, FeatureVector{});
    V_prev_.assign(S, 0.0);
    U_cur_ = U_prev_;
    V_cur_ = V_prev_;
    policy_.assign(S, 0);
    if (keep) {
      keep->layers.assign(1, VectorValueFunction{0, U_prev_});
      keep->scalar.assign(1, V_prev_);
      keep->policy.clear();
    }

    for (int n = 1; n <= N; ++n) {
      for (std::size_t i = 0; i < S; ++i) {
        const int q = grid.state(i);
        const SideGates g = grid.gates(q);
        const Variant& var = variants_[variant_index(g)];
        const double qd = static_cast<double>(q);
        const double Y = g.bid ? beta * (V_prev_[i + 1] - V_prev_[i]) + q2_coef * qd : 0.0;
        const double Zc = g.ask ? beta * (V_prev_[i - 1] - V_prev_[i]) - q2_coef * qd : 0.0;

        const double* c = var.c.data();
        const double* p10 = var.p10.data();
        const double* p01 = var.p01.data();
        std::size_t best = 0;
        double best_score = c[0] + p10[0] * Y + p01[0] * Zc;
        for (std::size_t a = 1; a < A; ++a) {
          const double score = c[a] + p10[a] * Y + p01[a] * Zc;
          if (score > best_score) {
            best_score = score;
            best = a;
          }
        }

        const FillProbabilities& p = var.p[best];
        const FeatureVector& f0 = var.base[best];
        FeatureVector F{f0.pnl, v * (qd + p.p_bid - p.p_ask),
                        s.features.risk_scale * v * v * inventory_second_moment(qd, p.p_bid, p.p_ask), f0.adv};
        F += (beta * var.stay[best]) * U_prev_[i];
        if (var.p10[best] > 0.0) F += (beta * var.p10[best]) * U_prev_[i + 1];
        if (var.p01[best] > 0.0) F += (beta * var.p01[best]) * U_prev_[i - 1];
        U_cur_[i] = F;
        V_cur_[i] = z.dot(F);
        policy_[i] = best;
      }
      if (keep) {
        keep->layers.push_back(VectorValueFunction{n, U_cur_});
        keep->scalar.push_back(V_cur_);
        keep->policy.push_back(policy_);
      }
      if (n < N) {
        std::swap(U_prev_, U_cur_);
        std::swap(V_prev_, V_cur_);
      }
    }
    return N;
  }

  std::array<Variant, 4> variants_;
  std::vector<FeatureVector> U_prev_, U_cur_;
  std::vector<double> V_prev_, V_cur_;
  std::vector<std::size_t> policy_;
};

/// Receding-horizon solve: xi and z are held fixed over all N layers.
inline HJBSolution solve_finite_horizon(const MarketParams& xi, const ObjectiveVector& z, const InventoryGrid& grid,
                                        const ActionGrid& actions, const HjbSettings& s) {
  HjbSolver solver;
  return solver.solve(xi, z, grid, actions, s);
}

}  // namespace fbas
