#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "haml/eval.hpp"
#include "haml/game.hpp"

namespace haml {

// ---- Distribution helpers ----------------------------------------------------

// KL(p || q) with the 0 log 0 = 0 convention; +infinity when q puts zero mass
// where p does not.
inline double kl_divergence(const Eigen::Ref<const Vec>& p, const Eigen::Ref<const Vec>& q) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    if (q(i) <= 0.0) return std::numeric_limits<double>::infinity();
    total += p(i) * std::log(p(i) / q(i));
  }
  return total;
}

inline double total_variation(const Eigen::Ref<const Vec>& p, const Eigen::Ref<const Vec>& q) {
  return 0.5 * (p - q).lpNorm<1>();
}

// ---- Drift functionals ---------------------------------------------------------

enum class HadfKind { trivial, kl_penalty, clip_relu, squared_l2 };
enum class KlDirection { old_to_new, new_to_old };

// Drift functional selector. All kinds are non-negative, vanish when the
// candidate row equals the current one, and have zero directional derivatives
// there, so they penalize only genuine movement.
struct HadfSpec {
  HadfKind kind = HadfKind::trivial;
  double tau = 1.0;        // penalty coefficient, >= 0
  double epsilon = 0.2;    // clip radius, in (0, 1)
  KlDirection kl_direction = KlDirection::new_to_old;
};

inline void validate_hadf(const HadfSpec& h) {
  if (!(h.tau >= 0.0)) throw ConfigError("tau: must be >= 0");
  if (!(h.epsilon > 0.0 && h.epsilon < 1.0)) throw ConfigError("epsilon: must lie in (0, 1)");
}

// ---- State weightings ----------------------------------------------------------

enum class WeightKind { beta, rho_normalized, uniform };

// Recipe for a strictly positive probability vector over states. The `beta`
// kind aliases an already-resolved sampling distribution and is only valid
// where one is in scope (the nu slot of an engine run).
struct StateWeighting {
  WeightKind kind = WeightKind::rho_normalized;
};

inline Vec resolve_weighting(const StateWeighting& w, const MarkovGame& g, const EvalBundle& eval,
                             const Vec* beta = nullptr) {
  switch (w.kind) {
    case WeightKind::uniform:
      return Vec::Constant(g.n_states, 1.0 / g.n_states);
    case WeightKind::rho_normalized:
      return eval.rho_normalized();
    case WeightKind::beta:
      if (beta == nullptr)
        throw ConfigError("weighting: kind beta is only usable where a sampling distribution is already resolved");
      return *beta;
  }
  throw ConfigError("weighting: unknown kind");
}

// Ordered agents whose rows in `policy` have already been replaced this sweep.
struct Predecessors {
  const JointPolicy* policy = nullptr;
  std::vector<int> agents;

  bool empty() const { return agents.empty(); }
};

namespace detail {

// Enumerates predecessor action tuples with their product probability under
// the updated rows; no predecessors yields the single empty tuple with weight 1.
template <typename Fn>
inline void for_each_predecessor_action(const MarkovGame& g, const Predecessors& preds, int s, Fn&& fn) {
  const std::size_t m = preds.agents.size();
  std::vector<int> tuple(m, 0);
  while (true) {
    double w = 1.0;
    for (std::size_t k = 0; k < m; ++k)
      w *= preds.policy->agents[static_cast<std::size_t>(preds.agents[k])].table(s, tuple[k]);
    if (w != 0.0) fn(tuple, w);
    std::size_t pos = m;
    while (pos > 0) {
      --pos;
      if (++tuple[pos] < g.action_counts[static_cast<std::size_t>(preds.agents[pos])]) break;
      tuple[pos] = 0;
      if (pos == 0) return;
    }
    if (m == 0) return;
  }
}

inline void check_candidate_row(const Eigen::Ref<const Vec>& row) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    if (!(row(i) >= 0.0) || !std::isfinite(row(i)))
      throw ValidationError("candidate: row leaves the simplex (negative or non-finite entry)");
    sum += row(i);
  }
  if (std::abs(sum - 1.0) > kStochasticTol)
    throw ValidationError("candidate: row leaves the simplex (sum " + std::to_string(sum) + ")");
}

}  // namespace detail

// Drift of one candidate row at state s, measuring how far the row moved from
// agent's current row. The clip kind additionally depends on the advantage
// landscape and on the predecessors' updated rows.
inline double drift_state(const HadfSpec& hadf, const MarkovGame& g, const EvalBundle& eval,
                          const JointPolicy& pi, int agent, const Eigen::Ref<const Vec>& candidate_row, int s,
                          const Predecessors& preds = {}) {
  validate_hadf(hadf);
  detail::check_candidate_row(candidate_row);
  const Vec old_row = pi.agents[static_cast<std::size_t>(agent)].table.row(s).transpose();
  switch (hadf.kind) {
    case HadfKind::trivial:
      return 0.0;
    case HadfKind::kl_penalty:
      return hadf.tau * (hadf.kl_direction == KlDirection::new_to_old ? kl_divergence(candidate_row, old_row)
                                                                      : kl_divergence(old_row, candidate_row));
    case HadfKind::squared_l2:
      return hadf.tau * (candidate_row - old_row).squaredNorm();
    case HadfKind::clip_relu: {
      const int A = g.action_counts[static_cast<std::size_t>(agent)];
      for (int b = 0; b < A; ++b)
        if (old_row(b) == 0.0 && candidate_row(b) > 0.0)
          throw ValidationError("candidate: probability ratio undefined where the current row has zero mass");
      double total = 0.0;
      detail::for_each_predecessor_action(g, preds, s, [&](const std::vector<int>& tuple, double w) {
        for (int b = 0; b < A; ++b) {
          if (old_row(b) == 0.0) continue;
          const double ratio = candidate_row(b) / old_row(b);
          const double clipped = std::clamp(ratio, 1.0 - hadf.epsilon, 1.0 + hadf.epsilon);
          std::vector<int> block = preds.agents;
          block.push_back(agent);
          std::vector<int> block_actions = tuple;
          block_actions.push_back(b);
          const double adv = multi_agent_advantage(g, eval, pi, s, {}, {}, block, block_actions);
          total += w * old_row(b) * std::max(0.0, (ratio - clipped) * adv);
        }
      });
      return total;
    }
  }
  throw ConfigError("hadf: unknown kind");
}

// nu-weighted expectation of the per-state drift over a full candidate table.
inline double drift_expected(const HadfSpec& hadf, const MarkovGame& g, const EvalBundle& eval,
                             const JointPolicy& pi, int agent, const Mat& candidate_table, const Vec& nu,
                             const Predecessors& preds = {}) {
  double total = 0.0;
  for (int s = 0; s < g.n_states; ++s)
    total += nu(s) * drift_state(hadf, g, eval, pi, agent, candidate_table.row(s).transpose(), s, preds);
  return total;
}

// Finite-difference directional-derivative magnitude of the drift at the
// current row: |D(old + step * dir) - D(old)| / step. Directions must be
// tangent to the simplex and small enough that old +/- step * dir stays on it.
inline double gateaux_residual(const HadfSpec& hadf, const MarkovGame& g, const EvalBundle& eval,
                               const JointPolicy& pi, int agent, int s, const Vec& direction, double step,
                               const Predecessors& preds = {}) {
  if (!(step > 0.0)) throw ConfigError("step: must be positive");
  if (std::abs(direction.sum()) > kStochasticTol)
    throw ValidationError("direction: must sum to zero to stay on the simplex");
  const Vec old_row = pi.agents[static_cast<std::size_t>(agent)].table.row(s).transpose();
  const Vec forward = old_row + step * direction;
  const Vec backward = old_row - step * direction;
  for (Eigen::Index i = 0; i < old_row.size(); ++i)
    if (forward(i) < 0.0 || forward(i) > 1.0 || backward(i) < 0.0 || backward(i) > 1.0)
      throw ValidationError("direction: step leaves the simplex");
  const double at_old = drift_state(hadf, g, eval, pi, agent, old_row, s, preds);
  const double at_forward = drift_state(hadf, g, eval, pi, agent, forward, s, preds);
  return std::abs(at_forward - at_old) / step;
}

}  // namespace haml
