#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "haml/drift.hpp"
#include "haml/eval.hpp"
#include "haml/game.hpp"

namespace haml {

enum class NeighborhoodKind { unconstrained, per_state_kl, expected_kl, per_state_tv };

// Trust region around an agent's current table. KL kinds measure
// KL(current row || candidate row); the expected kind averages the per-state
// divergence under a positive state weighting instead of bounding every state.
struct NeighborhoodSpec {
  NeighborhoodKind kind = NeighborhoodKind::unconstrained;
  double delta = 0.1;
  StateWeighting weighting{WeightKind::rho_normalized};  // expected_kl only
};

inline void validate_neighborhood(const NeighborhoodSpec& n) {
  if (n.kind != NeighborhoodKind::unconstrained && !(n.delta > 0.0))
    throw ConfigError("delta: must be positive");
  if (n.kind == NeighborhoodKind::expected_kl && n.weighting.kind == WeightKind::beta)
    throw ConfigError("weighting: expected_kl cannot alias the sampling distribution");
}

// Membership test for a full candidate table. An undefined divergence
// (candidate removes mass the current row has) counts as outside.
inline bool contains(const NeighborhoodSpec& n, const MarkovGame& g, const EvalBundle& eval,
                     const JointPolicy& pi, int agent, const Mat& candidate_table) {
  validate_neighborhood(n);
  const Mat& old_table = pi.agents[static_cast<std::size_t>(agent)].table;
  switch (n.kind) {
    case NeighborhoodKind::unconstrained:
      return true;
    case NeighborhoodKind::per_state_kl: {
      for (int s = 0; s < g.n_states; ++s) {
        const double d = kl_divergence(old_table.row(s).transpose(), candidate_table.row(s).transpose());
        if (!(d <= n.delta)) return false;
      }
      return true;
    }
    case NeighborhoodKind::expected_kl: {
      const Vec w = resolve_weighting(n.weighting, g, eval);
      double total = 0.0;
      for (int s = 0; s < g.n_states; ++s) {
        const double d = kl_divergence(old_table.row(s).transpose(), candidate_table.row(s).transpose());
        if (std::isinf(d)) return false;
        total += w(s) * d;
      }
      return total <= n.delta;
    }
    case NeighborhoodKind::per_state_tv: {
      for (int s = 0; s < g.n_states; ++s)
        if (!(total_variation(old_table.row(s).transpose(), candidate_table.row(s).transpose()) <= n.delta))
          return false;
      return true;
    }
  }
  throw ConfigError("neighborhood: unknown kind");
}

// Radius delta' > 0 such that every table whose rows all stay within
// total-variation delta' of the current rows is contained. Conservative for
// the KL kinds: a chi-squared bound needs the smallest positive probability
// p_min across rows, giving delta' = min(p_min / 4, sqrt(delta * p_min / 8)).
inline double closed_ball_witness(const NeighborhoodSpec& n, const JointPolicy& pi, int agent) {
  validate_neighborhood(n);
  switch (n.kind) {
    case NeighborhoodKind::unconstrained:
      return 1.0;
    case NeighborhoodKind::per_state_tv:
      return n.delta;
    case NeighborhoodKind::per_state_kl:
    case NeighborhoodKind::expected_kl: {
      const Mat& table = pi.agents[static_cast<std::size_t>(agent)].table;
      double p_min = 1.0;
      for (Eigen::Index s = 0; s < table.rows(); ++s)
        for (Eigen::Index a = 0; a < table.cols(); ++a)
          if (table(s, a) > 0.0) p_min = std::min(p_min, table(s, a));
      return std::min(p_min / 4.0, std::sqrt(n.delta * p_min / 8.0));
    }
  }
  throw ConfigError("neighborhood: unknown kind");
}

}  // namespace haml
