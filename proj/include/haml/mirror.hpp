#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "haml/drift.hpp"
#include "haml/eval.hpp"
#include "haml/game.hpp"

namespace haml {

// Everything needed to score one agent's candidate rows during a sequential
// update sweep: the frozen evaluation of the pre-sweep policy, the agents
// already updated this sweep (with their new rows), the drift functional, and
// the resolved state distributions nu (drift weight) and beta (sampling
// weight). Advantage tables are precomputed so candidate scoring is table math.
struct HamoContext {
  const MarkovGame* game = nullptr;
  const EvalBundle* eval = nullptr;
  const JointPolicy* pi_old = nullptr;
  int agent = 0;
  Predecessors preds;
  HadfSpec hadf;
  Vec nu;
  Vec beta;

  struct StateCache {
    std::vector<double> weight;   // predecessor tuple probability under the new rows
    std::vector<Vec> q_block;     // per tuple: q of (predecessors, agent) pinned, agent action varying
    std::vector<double> q_preds;  // per tuple: q of predecessors pinned alone
    double q_base = 0.0;          // fully marginalized q (the state value up to roundoff)
    Vec adv_row;                  // expected advantage of each candidate action
  };
  std::vector<StateCache> cache;
};

// Builds the context and its per-state advantage tables.
inline HamoContext make_hamo_context(const MarkovGame& g, const EvalBundle& eval, const JointPolicy& pi_old,
                                     int agent, const Predecessors& preds, const HadfSpec& hadf, const Vec& nu,
                                     const Vec& beta) {
  validate_hadf(hadf);
  HamoContext ctx;
  ctx.game = &g;
  ctx.eval = &eval;
  ctx.pi_old = &pi_old;
  ctx.agent = agent;
  ctx.preds = preds;
  ctx.hadf = hadf;
  ctx.nu = nu;
  ctx.beta = beta;
  const int A = g.action_counts[static_cast<std::size_t>(agent)];
  ctx.cache.resize(static_cast<std::size_t>(g.n_states));
  for (int s = 0; s < g.n_states; ++s) {
    auto& sc = ctx.cache[static_cast<std::size_t>(s)];
    sc.q_base = multi_agent_q(g, eval, pi_old, s, {}, {});
    sc.adv_row = Vec::Zero(A);
    detail::for_each_predecessor_action(g, ctx.preds, s, [&](const std::vector<int>& tuple, double w) {
      std::vector<int> block = ctx.preds.agents;
      block.push_back(agent);
      Vec q_block(A);
      for (int b = 0; b < A; ++b) {
        std::vector<int> block_actions = tuple;
        block_actions.push_back(b);
        q_block(b) = multi_agent_q(g, eval, pi_old, s, block, block_actions);
      }
      const double q_preds = multi_agent_q(g, eval, pi_old, s, ctx.preds.agents, tuple);
      sc.adv_row += w * (q_block.array() - q_preds).matrix();
      sc.weight.push_back(w);
      sc.q_block.push_back(std::move(q_block));
      sc.q_preds.push_back(q_preds);
    });
  }
  return ctx;
}

// Expected advantage of each of the agent's actions at state s, the
// predecessors drawn from their updated rows. Linear coefficient of the
// candidate row in the mirror objective.
inline const Vec& expected_advantage_row(const HamoContext& ctx, int s) {
  return ctx.cache[static_cast<std::size_t>(s)].adv_row;
}

namespace detail {

// Drift of a candidate row evaluated from the context's cached advantage
// tables; agrees with drift_state up to summation order.
inline double drift_state_cached(const HamoContext& ctx, const Eigen::Ref<const Vec>& candidate_row, int s) {
  const auto& sc = ctx.cache[static_cast<std::size_t>(s)];
  const Vec old_row = ctx.pi_old->agents[static_cast<std::size_t>(ctx.agent)].table.row(s).transpose();
  switch (ctx.hadf.kind) {
    case HadfKind::trivial:
      return 0.0;
    case HadfKind::kl_penalty:
      return ctx.hadf.tau * (ctx.hadf.kl_direction == KlDirection::new_to_old
                                 ? kl_divergence(candidate_row, old_row)
                                 : kl_divergence(old_row, candidate_row));
    case HadfKind::squared_l2:
      return ctx.hadf.tau * (candidate_row - old_row).squaredNorm();
    case HadfKind::clip_relu: {
      double total = 0.0;
      for (Eigen::Index b = 0; b < old_row.size(); ++b)
        if (old_row(b) == 0.0 && candidate_row(b) > 0.0)
          throw ValidationError("candidate: probability ratio undefined where the current row has zero mass");
      for (std::size_t p = 0; p < sc.weight.size(); ++p)
        for (Eigen::Index b = 0; b < old_row.size(); ++b) {
          if (old_row(b) == 0.0) continue;
          const double ratio = candidate_row(b) / old_row(b);
          const double clipped = std::clamp(ratio, 1.0 - ctx.hadf.epsilon, 1.0 + ctx.hadf.epsilon);
          const double adv = sc.q_block[p](b) - sc.q_base;
          total += sc.weight[p] * old_row(b) * std::max(0.0, (ratio - clipped) * adv);
        }
      return total;
    }
  }
  throw ConfigError("hadf: unknown kind");
}

// Subgradient of the cached drift in the candidate row.
inline Vec drift_grad_cached(const HamoContext& ctx, const Eigen::Ref<const Vec>& candidate_row, int s) {
  const auto& sc = ctx.cache[static_cast<std::size_t>(s)];
  const Vec old_row = ctx.pi_old->agents[static_cast<std::size_t>(ctx.agent)].table.row(s).transpose();
  Vec grad = Vec::Zero(old_row.size());
  switch (ctx.hadf.kind) {
    case HadfKind::trivial:
      return grad;
    case HadfKind::kl_penalty:
      for (Eigen::Index b = 0; b < old_row.size(); ++b) {
        if (ctx.hadf.kl_direction == KlDirection::new_to_old) {
          if (candidate_row(b) > 0.0 && old_row(b) > 0.0)
            grad(b) = ctx.hadf.tau * (std::log(candidate_row(b) / old_row(b)) + 1.0);
        } else {
          if (candidate_row(b) > 0.0 && old_row(b) > 0.0)
            grad(b) = -ctx.hadf.tau * old_row(b) / candidate_row(b);
        }
      }
      return grad;
    case HadfKind::squared_l2:
      return 2.0 * ctx.hadf.tau * (candidate_row - old_row);
    case HadfKind::clip_relu: {
      for (std::size_t p = 0; p < sc.weight.size(); ++p)
        for (Eigen::Index b = 0; b < old_row.size(); ++b) {
          if (old_row(b) == 0.0) continue;
          const double ratio = candidate_row(b) / old_row(b);
          const bool outside = ratio < 1.0 - ctx.hadf.epsilon || ratio > 1.0 + ctx.hadf.epsilon;
          if (!outside) continue;
          const double clipped = std::clamp(ratio, 1.0 - ctx.hadf.epsilon, 1.0 + ctx.hadf.epsilon);
          const double adv = sc.q_block[p](b) - sc.q_base;
          if ((ratio - clipped) * adv > 0.0) grad(b) += sc.weight[p] * adv;
        }
      return grad;
    }
  }
  throw ConfigError("hadf: unknown kind");
}

}  // namespace detail

// Per-state mirror objective: expected advantage of the candidate row under
// the updated predecessors, minus the drift scaled by nu(s) / beta(s). Zero
// whenever the candidate equals the agent's current row.
inline double hamo_state(const HamoContext& ctx, const Mat& candidate_table, int s) {
  detail::check_candidate_row(candidate_table.row(s).transpose());
  const auto& sc = ctx.cache[static_cast<std::size_t>(s)];
  const double advantage = candidate_table.row(s) * sc.adv_row;
  const double penalty = (ctx.nu(s) / ctx.beta(s)) * detail::drift_state_cached(ctx, candidate_table.row(s).transpose(), s);
  return advantage - penalty;
}

// beta-weighted total of the per-state objective; the nu / beta prefactor
// cancels into a pure nu-weighted drift expectation.
inline double expected_hamo(const HamoContext& ctx, const Mat& candidate_table) {
  double total = 0.0;
  for (int s = 0; s < ctx.game->n_states; ++s) total += ctx.beta(s) * hamo_state(ctx, candidate_table, s);
  return total;
}

// Clipped-ratio surrogate at state s: expectation, over predecessor actions
// from the updated rows and the agent's action from its current row, of
// min(ratio * adv, clipped ratio * adv) with the block advantage of
// (predecessors, agent) jointly. Fixing pred_actions skips the outer
// expectation. The clip radius comes from the context's drift spec.
inline double happo_objective(const HamoContext& ctx, const Mat& candidate_table, int s,
                              const std::optional<std::vector<int>>& pred_actions = std::nullopt) {
  detail::check_candidate_row(candidate_table.row(s).transpose());
  const auto& sc = ctx.cache[static_cast<std::size_t>(s)];
  const Vec old_row = ctx.pi_old->agents[static_cast<std::size_t>(ctx.agent)].table.row(s).transpose();
  const double eps = ctx.hadf.epsilon;
  for (Eigen::Index b = 0; b < old_row.size(); ++b)
    if (old_row(b) == 0.0 && candidate_table(s, b) > 0.0)
      throw ValidationError("candidate: probability ratio undefined where the current row has zero mass");

  std::optional<std::size_t> fixed_index;
  if (pred_actions.has_value()) {
    std::size_t index = 0;
    bool found = false;
    detail::for_each_predecessor_action(*ctx.game, ctx.preds, s, [&](const std::vector<int>& tuple, double) {
      if (!found && tuple == *pred_actions) found = true;
      if (!found) ++index;
    });
    if (!found) throw ValidationError("pred_actions: tuple has zero probability or is out of range");
    fixed_index = index;
  }

  double total = 0.0;
  for (std::size_t p = 0; p < sc.weight.size(); ++p) {
    if (fixed_index.has_value() && p != *fixed_index) continue;
    const double w = fixed_index.has_value() ? 1.0 : sc.weight[p];
    for (Eigen::Index b = 0; b < old_row.size(); ++b) {
      if (old_row(b) == 0.0) continue;
      const double ratio = candidate_table(s, b) / old_row(b);
      const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
      const double adv = sc.q_block[p](b) - sc.q_base;
      total += w * old_row(b) * std::min(ratio * adv, clipped * adv);
    }
  }
  return total;
}

// The clipped surrogate equals the candidate's expected block advantage minus
// the clip drift; returns the absolute difference of the two sides.
inline double happo_identity_residual(const HamoContext& ctx, const Mat& candidate_table, int s) {
  const auto& sc = ctx.cache[static_cast<std::size_t>(s)];
  const double objective = happo_objective(ctx, candidate_table, s);
  double expected_adv = 0.0;
  for (std::size_t p = 0; p < sc.weight.size(); ++p)
    for (Eigen::Index b = 0; b < candidate_table.cols(); ++b)
      expected_adv += sc.weight[p] * candidate_table(s, b) * (sc.q_block[p](b) - sc.q_base);
  HadfSpec clip = ctx.hadf;
  clip.kind = HadfKind::clip_relu;
  const double drift =
      drift_state(clip, *ctx.game, *ctx.eval, *ctx.pi_old, ctx.agent, candidate_table.row(s).transpose(), s, ctx.preds);
  return std::abs(objective - (expected_adv - drift));
}

}  // namespace haml
