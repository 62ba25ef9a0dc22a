#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "haml/mirror.hpp"
#include "haml/neighborhood.hpp"
#include "haml/rng.hpp"

namespace haml {

// ---- Update-order sampling -----------------------------------------------------

enum class PermKind { uniform, fixed_cycle, fixed_list };

// How the per-sweep agent ordering is chosen. Uniform draws give every
// ordering positive probability; the fixed kinds replay a deterministic
// schedule. Either way the ordering is a pure function of (seed, iteration).
struct PermutationSpec {
  PermKind kind = PermKind::uniform;
  std::uint64_t seed = 0;
  std::vector<std::vector<int>> schedule;  // fixed_list only
};

inline void validate_permutations(const PermutationSpec& p, int n_agents) {
  if (p.kind == PermKind::fixed_list) {
    if (p.schedule.empty()) throw ConfigError("permutations.schedule: must be non-empty for fixed_list");
    for (const auto& perm : p.schedule) {
      if (static_cast<int>(perm.size()) != n_agents)
        throw ConfigError("permutations.schedule: every entry needs one index per agent");
      std::vector<bool> seen(static_cast<std::size_t>(n_agents), false);
      for (int i : perm) {
        if (i < 0 || i >= n_agents || seen[static_cast<std::size_t>(i)])
          throw ConfigError("permutations.schedule: entries must be permutations of 0..n-1");
        seen[static_cast<std::size_t>(i)] = true;
      }
    }
  }
}

inline std::vector<int> draw_permutation(const PermutationSpec& spec, int n_agents, std::uint64_t run_seed,
                                         int iteration) {
  switch (spec.kind) {
    case PermKind::uniform: {
      auto rng = make_rng(derive_seed(derive_seed(run_seed, spec.seed), static_cast<std::uint64_t>(iteration)));
      return random_permutation(rng, n_agents);
    }
    case PermKind::fixed_cycle: {
      std::vector<int> perm(static_cast<std::size_t>(n_agents));
      for (int i = 0; i < n_agents; ++i) perm[static_cast<std::size_t>(i)] = (i + iteration) % n_agents;
      return perm;
    }
    case PermKind::fixed_list:
      return spec.schedule[static_cast<std::size_t>(iteration) % spec.schedule.size()];
  }
  throw ConfigError("permutations.kind: unknown kind");
}

// ---- Configuration ---------------------------------------------------------------

enum class SolverKind { closed_form_greedy, exp_gradient };

struct SolverSpec {
  SolverKind kind = SolverKind::closed_form_greedy;
  int steps = 60;                    // exp_gradient ascent steps per state
  double learning_rate = 1.0;        // initial multiplicative-weights step size
  double backtracking_factor = 0.5;  // step shrink on objective decrease
};

struct EngineConfig {
  std::vector<HadfSpec> hadf;                  // per agent; size 1 broadcasts
  std::vector<NeighborhoodSpec> neighborhood;  // per agent; size 1 broadcasts
  StateWeighting beta{WeightKind::rho_normalized};
  StateWeighting nu{WeightKind::beta};
  PermutationSpec permutations;
  SolverSpec solver;
  int iterations = 1;
  double stop_gap = 0.0;
  bool timings = false;
};

namespace detail {

template <typename T>
inline const T& per_agent(const std::vector<T>& items, int agent) {
  return items.size() == 1 ? items.front() : items[static_cast<std::size_t>(agent)];
}

}  // namespace detail

// Throws ConfigError naming the offending field.
inline void validate_engine_config(const EngineConfig& cfg, const MarkovGame& g) {
  if (cfg.iterations < 1) throw ConfigError("iterations: must be >= 1");
  if (!(cfg.stop_gap >= 0.0)) throw ConfigError("stop_gap: must be >= 0");
  if (cfg.hadf.empty()) throw ConfigError("hadf: at least one drift spec required");
  if (cfg.hadf.size() != 1 && static_cast<int>(cfg.hadf.size()) != g.n_agents)
    throw ConfigError("hadf: provide one spec or one per agent");
  if (cfg.neighborhood.empty()) throw ConfigError("neighborhood: at least one spec required");
  if (cfg.neighborhood.size() != 1 && static_cast<int>(cfg.neighborhood.size()) != g.n_agents)
    throw ConfigError("neighborhood: provide one spec or one per agent");
  for (const auto& h : cfg.hadf) validate_hadf(h);
  for (const auto& n : cfg.neighborhood) validate_neighborhood(n);
  if (cfg.beta.kind == WeightKind::beta)
    throw ConfigError("beta: the sampling distribution cannot alias itself");
  validate_permutations(cfg.permutations, g.n_agents);
  if (cfg.solver.kind == SolverKind::exp_gradient) {
    if (cfg.solver.steps < 1) throw ConfigError("solver.steps: must be >= 1");
    if (!(cfg.solver.learning_rate > 0.0)) throw ConfigError("solver.learning_rate: must be positive");
    if (!(cfg.solver.backtracking_factor > 0.0 && cfg.solver.backtracking_factor < 1.0))
      throw ConfigError("solver.backtracking_factor: must lie in (0, 1)");
  } else {
    for (int i = 0; i < g.n_agents; ++i) {
      const HadfSpec& h = detail::per_agent(cfg.hadf, i);
      const NeighborhoodSpec& n = detail::per_agent(cfg.neighborhood, i);
      if (n.kind != NeighborhoodKind::unconstrained)
        throw ConfigError("solver.kind: closed_form_greedy needs an unconstrained neighborhood");
      if (h.kind == HadfKind::kl_penalty) {
        if (h.kl_direction != KlDirection::new_to_old)
          throw ConfigError("solver.kind: the closed-form penalty update needs the new-to-old divergence");
        if (!(h.tau > 0.0)) throw ConfigError("tau: the closed-form penalty update needs tau > 0");
      } else if (h.kind != HadfKind::trivial) {
        throw ConfigError("solver.kind: closed_form_greedy supports only trivial or kl_penalty drifts");
      }
    }
  }
}

// ---- Inner maximization -----------------------------------------------------------

// A row is replaced only when its best advantage clears this margin; keeping
// the current row on ties makes exact equilibria fixed points instead of
// letting solver roundoff shuffle equivalent rows.
constexpr double kImprovementMargin = 1e-13;

namespace detail {

inline Mat greedy_candidate(const HamoContext& ctx) {
  const MarkovGame& g = *ctx.game;
  const Mat& old_table = ctx.pi_old->agents[static_cast<std::size_t>(ctx.agent)].table;
  Mat table = old_table;
  for (int s = 0; s < g.n_states; ++s) {
    const Vec& adv = expected_advantage_row(ctx, s);
    int best = 0;
    for (Eigen::Index b = 1; b < adv.size(); ++b)
      if (adv(b) > adv(best)) best = static_cast<int>(b);
    if (adv(best) > kImprovementMargin) {
      table.row(s).setZero();
      table(s, best) = 1.0;
    }
  }
  return table;
}

inline Mat softmax_penalty_candidate(const HamoContext& ctx) {
  const MarkovGame& g = *ctx.game;
  Mat table = ctx.pi_old->agents[static_cast<std::size_t>(ctx.agent)].table;
  for (int s = 0; s < g.n_states; ++s) {
    const Vec& adv = expected_advantage_row(ctx, s);
    const double scale = ctx.beta(s) / (ctx.nu(s) * ctx.hadf.tau);
    const Vec scaled = adv * scale;
    const double shift = scaled.maxCoeff();
    Vec row = table.row(s).transpose();
    double total = 0.0;
    for (Eigen::Index b = 0; b < row.size(); ++b) {
      row(b) *= std::exp(scaled(b) - shift);
      total += row(b);
    }
    if (!(total > 0.0) || !std::isfinite(total))
      throw RuntimeFailure("solver: penalty update produced a non-finite row");
    table.row(s) = (row / total).transpose();
  }
  return table;
}

// Per-state objective the candidate search maximizes: proportional to the
// per-state mirror value (divided by beta(s) > 0, which preserves the argmax).
inline double solver_objective(const HamoContext& ctx, const Eigen::Ref<const Vec>& row, int s) {
  const double advantage = row.dot(expected_advantage_row(ctx, s));
  return advantage - (ctx.nu(s) / ctx.beta(s)) * drift_state_cached(ctx, row, s);
}

inline Mat exp_gradient_candidate(const HamoContext& ctx, const SolverSpec& solver) {
  const MarkovGame& g = *ctx.game;
  const Mat& old_table = ctx.pi_old->agents[static_cast<std::size_t>(ctx.agent)].table;
  Mat table = old_table;
  for (int s = 0; s < g.n_states; ++s) {
    Vec row = old_table.row(s).transpose();
    double value = solver_objective(ctx, row, s);
    double lr = solver.learning_rate;
    const Vec& adv = expected_advantage_row(ctx, s);
    for (int step = 0; step < solver.steps && lr > 1e-14; ++step) {
      const Vec grad = adv - (ctx.nu(s) / ctx.beta(s)) * drift_grad_cached(ctx, row, s);
      double shift = -std::numeric_limits<double>::infinity();
      for (Eigen::Index b = 0; b < row.size(); ++b)
        if (row(b) > 0.0) shift = std::max(shift, lr * grad(b));
      Vec trial = row;
      double total = 0.0;
      for (Eigen::Index b = 0; b < row.size(); ++b) {
        trial(b) = row(b) > 0.0 ? row(b) * std::exp(lr * grad(b) - shift) : 0.0;
        total += trial(b);
      }
      if (!(total > 0.0) || !std::isfinite(total)) throw RuntimeFailure("solver: ascent produced a non-finite row");
      trial /= total;
      const double trial_value = solver_objective(ctx, trial, s);
      if (trial_value >= value) {
        row = trial;
        value = trial_value;
      } else {
        lr *= solver.backtracking_factor;
      }
    }
    table.row(s) = row.transpose();
  }
  return table;
}

}  // namespace detail

// Best candidate table for the context's agent within the neighborhood. The
// closed-form solver is exact for the combinations it accepts; the ascent
// solver backtracks on the per-state objective and then shrinks the whole
// step toward the current table until the neighborhood accepts it, so the
// result never scores below the current table.
inline AgentPolicy inner_maximize(const HamoContext& ctx, const NeighborhoodSpec& neighborhood,
                                  const SolverSpec& solver) {
  const Mat& old_table = ctx.pi_old->agents[static_cast<std::size_t>(ctx.agent)].table;
  Mat candidate;
  if (solver.kind == SolverKind::closed_form_greedy) {
    candidate = ctx.hadf.kind == HadfKind::kl_penalty ? detail::softmax_penalty_candidate(ctx)
                                                      : detail::greedy_candidate(ctx);
  } else {
    candidate = detail::exp_gradient_candidate(ctx, solver);
  }
  const Mat proposed = candidate;
  double scale = 1.0;
  while (!contains(neighborhood, *ctx.game, *ctx.eval, *ctx.pi_old, ctx.agent, candidate)) {
    scale *= 0.5;
    if (scale < 1e-12) return {old_table};
    candidate = old_table + scale * (proposed - old_table);
  }
  return {candidate};
}

// ---- Sequential step and run loop ---------------------------------------------------

// One iteration's record. Wall time is only measured when timings are enabled
// so that default output files stay byte-identical across repeated runs.
struct IterationRecord {
  int k = 0;
  std::vector<int> permutation;
  double j_before = 0.0;
  double j_after = 0.0;
  Vec v_before;
  Vec v_after;
  double nash_gap_after = 0.0;
  std::vector<double> agent_hamo;    // expected mirror value of each accepted update
  std::vector<double> agent_drift;   // nu-weighted drift of each accepted update
  std::vector<int> agent_fallbacks;  // rows reverted by the per-state guard
  int fallbacks_total = 0;
  double wall_ms = 0.0;
};

// One sweep: freeze the evaluation, draw an ordering, and let each agent in
// turn maximize its mirror objective given the already-updated predecessors.
// Any candidate row scoring below the agent's current row at some state is
// reverted there, so the per-state mirror value never regresses and the state
// values improve monotonically.
inline std::pair<JointPolicy, IterationRecord> haml_step(const MarkovGame& g, const JointPolicy& pi,
                                                         const EngineConfig& cfg, std::uint64_t run_seed, int k) {
  const auto start = std::chrono::steady_clock::now();
  const EvalBundle eval = evaluate(g, pi);
  const Vec beta = resolve_weighting(cfg.beta, g, eval);
  const Vec nu = resolve_weighting(cfg.nu, g, eval, &beta);

  IterationRecord rec;
  rec.k = k;
  rec.permutation = draw_permutation(cfg.permutations, g.n_agents, run_seed, k);
  rec.j_before = eval.j;
  rec.v_before = eval.v;
  rec.agent_hamo.assign(static_cast<std::size_t>(g.n_agents), 0.0);
  rec.agent_drift.assign(static_cast<std::size_t>(g.n_agents), 0.0);
  rec.agent_fallbacks.assign(static_cast<std::size_t>(g.n_agents), 0);

  JointPolicy updated = pi;
  Predecessors preds;
  preds.policy = &updated;
  for (int agent : rec.permutation) {
    const HamoContext ctx = make_hamo_context(g, eval, pi, agent, preds, detail::per_agent(cfg.hadf, agent), nu, beta);
    AgentPolicy candidate = inner_maximize(ctx, detail::per_agent(cfg.neighborhood, agent), cfg.solver);
    const Mat& old_table = pi.agents[static_cast<std::size_t>(agent)].table;
    for (int s = 0; s < g.n_states; ++s) {
      if (hamo_state(ctx, candidate.table, s) < hamo_state(ctx, old_table, s)) {
        candidate.table.row(s) = old_table.row(s);
        ++rec.agent_fallbacks[static_cast<std::size_t>(agent)];
      }
    }
    rec.fallbacks_total += rec.agent_fallbacks[static_cast<std::size_t>(agent)];
    rec.agent_hamo[static_cast<std::size_t>(agent)] = expected_hamo(ctx, candidate.table);
    rec.agent_drift[static_cast<std::size_t>(agent)] = 0.0;
    for (int s = 0; s < g.n_states; ++s)
      rec.agent_drift[static_cast<std::size_t>(agent)] +=
          nu(s) * detail::drift_state_cached(ctx, candidate.table.row(s).transpose(), s);
    updated.agents[static_cast<std::size_t>(agent)] = std::move(candidate);
    preds.agents.push_back(agent);
  }

  const EvalBundle after = evaluate(g, updated);
  rec.j_after = after.j;
  rec.v_after = after.v;
  rec.nash_gap_after = nash_gap(g, updated);
  if (cfg.timings) {
    rec.wall_ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(std::chrono::steady_clock::now() - start)
            .count();
  }
  return {std::move(updated), std::move(rec)};
}

struct RunResult {
  std::vector<IterationRecord> records;
  JointPolicy final_policy;
};

// Runs up to cfg.iterations sweeps, stopping early once the equilibrium gap
// falls to cfg.stop_gap. Deterministic given (game, pi0, cfg, seed).
inline RunResult run(const MarkovGame& g, const JointPolicy& pi0, const EngineConfig& cfg, std::uint64_t seed) {
  validate_engine_config(cfg, g);
  validate_policy(g, pi0);
  RunResult result;
  result.final_policy = pi0;
  for (int k = 0; k < cfg.iterations; ++k) {
    auto [next, rec] = haml_step(g, result.final_policy, cfg, seed, k);
    result.final_policy = std::move(next);
    result.records.push_back(std::move(rec));
    if (result.records.back().nash_gap_after <= cfg.stop_gap) break;
  }
  return result;
}

}  // namespace haml
