#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "haml/engine.hpp"
#include "haml/eval.hpp"
#include "haml/game.hpp"
#include "haml/rng.hpp"

namespace haml {

// ---- Naive simultaneous best response -----------------------------------------

// Every agent independently goes greedy against the others' CURRENT rows and
// all updates land at once. No sequential coordination: on games that reward
// miscoordination this provably collapses to the worst joint action.
inline JointPolicy naive_simultaneous_step(const MarkovGame& g, const JointPolicy& pi) {
  const EvalBundle eval = evaluate(g, pi);
  JointPolicy next = pi;
  for (int i = 0; i < g.n_agents; ++i) {
    Mat table = pi.agents[static_cast<std::size_t>(i)].table;
    for (int s = 0; s < g.n_states; ++s) {
      const int A = g.action_counts[static_cast<std::size_t>(i)];
      Vec adv(A);
      for (int b = 0; b < A; ++b) adv(b) = multi_agent_q(g, eval, pi, s, {i}, {b}) - eval.v(s);
      int best = 0;
      for (int b = 1; b < A; ++b)
        if (adv(b) > adv(best)) best = b;
      if (adv(best) > kImprovementMargin) {
        table.row(s).setZero();
        table(s, best) = 1.0;
      }
    }
    next.agents[static_cast<std::size_t>(i)] = {std::move(table)};
  }
  return next;
}

// ---- Policy-space optima --------------------------------------------------------

struct SharedOptimum {
  double p_star = 0.0;  // probability of action 0 shared by every agent
  double j_star = 0.0;
};

namespace detail {

inline double shared_policy_value(const MarkovGame& g, double p) {
  JointPolicy pi;
  pi.agents.reserve(static_cast<std::size_t>(g.n_agents));
  for (int i = 0; i < g.n_agents; ++i) {
    Mat table(g.n_states, 2);
    for (int s = 0; s < g.n_states; ++s) {
      table(s, 0) = p;
      table(s, 1) = 1.0 - p;
    }
    pi.agents.push_back({std::move(table)});
  }
  return evaluate(g, pi).j;
}

}  // namespace detail

// Best value attainable when all agents are forced to play one identical
// binary-action policy, parameterized by p = P(action 0). Grid scan brackets
// the maximizer, golden-section refines it to 1e-10.
inline SharedOptimum shared_policy_optimum(const MarkovGame& g, int grid_resolution = 1001) {
  for (int c : g.action_counts)
    if (c != 2) throw ConfigError("action_counts: the shared-policy scan needs binary actions for every agent");
  if (grid_resolution < 3) throw ConfigError("grid_resolution: must be >= 3");

  int best_index = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  const double h = 1.0 / (grid_resolution - 1);
  for (int k = 0; k < grid_resolution; ++k) {
    const double value = detail::shared_policy_value(g, k * h);
    if (value > best_value) {
      best_value = value;
      best_index = k;
    }
  }
  double lo = std::max(0.0, (best_index - 1) * h);
  double hi = std::min(1.0, (best_index + 1) * h);

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = detail::shared_policy_value(g, x1);
  double f2 = detail::shared_policy_value(g, x2);
  while (hi - lo > 1e-10) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = detail::shared_policy_value(g, x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = detail::shared_policy_value(g, x1);
    }
  }
  SharedOptimum out;
  out.p_star = 0.5 * (lo + hi);
  out.j_star = detail::shared_policy_value(g, out.p_star);
  if (best_value > out.j_star) {  // grid endpoint can beat the refined interior point
    out.p_star = best_index * h;
    out.j_star = best_value;
  }
  return out;
}

struct BruteForceResult {
  JointPolicy policy;
  double j = -std::numeric_limits<double>::infinity();
};

// Exact optimum over all per-state deterministic joint policies by full
// enumeration; refuses instances with more than 10^7 candidates.
inline BruteForceResult brute_force_optimum(const MarkovGame& g) {
  const long long joint = joint_action_count(g.action_counts);
  double total = 1.0;
  for (int s = 0; s < g.n_states; ++s) total *= static_cast<double>(joint);
  if (total > 1e7) throw RuntimeFailure("brute force: candidate count exceeds 10^7");

  BruteForceResult best;
  const auto joints = enumerate_joint_actions(g.action_counts);
  std::vector<int> assignment(static_cast<std::size_t>(g.n_states), 0);  // joint action per state
  while (true) {
    std::vector<std::vector<int>> actions(static_cast<std::size_t>(g.n_agents),
                                          std::vector<int>(static_cast<std::size_t>(g.n_states), 0));
    for (int s = 0; s < g.n_states; ++s) {
      const auto& tuple = joints[static_cast<std::size_t>(assignment[static_cast<std::size_t>(s)])];
      for (int i = 0; i < g.n_agents; ++i) actions[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)] = tuple[static_cast<std::size_t>(i)];
    }
    JointPolicy pi = dirac_joint_policy(g, actions);
    const double j = evaluate(g, pi).j;
    if (j > best.j) {
      best.j = j;
      best.policy = std::move(pi);
    }
    int pos = g.n_states;
    while (pos > 0) {
      --pos;
      if (++assignment[static_cast<std::size_t>(pos)] < joint) break;
      assignment[static_cast<std::size_t>(pos)] = 0;
      if (pos == 0) return best;
    }
  }
}

// ---- Trajectory sampling --------------------------------------------------------

struct TrajectoryStep {
  int state = 0;
  std::vector<int> actions;  // one per agent
  int joint = 0;
  double reward = 0.0;
  int next_state = 0;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
};

// Seeded rollouts of the joint policy. Trajectory b uses the derived seed
// (seed, b), so batches are reproducible and extendable.
inline std::vector<Trajectory> sample_trajectories(const MarkovGame& g, const JointPolicy& pi, int horizon,
                                                   int batch, std::uint64_t seed) {
  if (horizon < 1) throw ConfigError("horizon: must be >= 1");
  if (batch < 1) throw ConfigError("batch: must be >= 1");
  validate_policy(g, pi);
  std::vector<Trajectory> out(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    auto rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    auto sample_index = [&rng](const auto& weights, int count) {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      double u = unit(rng);
      for (int i = 0; i < count - 1; ++i) {
        u -= weights(i);
        if (u < 0.0) return i;
      }
      return count - 1;
    };
    Trajectory traj;
    traj.steps.reserve(static_cast<std::size_t>(horizon));
    int state = sample_index(g.initial, g.n_states);
    for (int t = 0; t < horizon; ++t) {
      TrajectoryStep step;
      step.state = state;
      step.actions.resize(static_cast<std::size_t>(g.n_agents));
      for (int i = 0; i < g.n_agents; ++i) {
        const auto row = pi.agents[static_cast<std::size_t>(i)].table.row(state);
        step.actions[static_cast<std::size_t>(i)] = sample_index(row, g.action_counts[static_cast<std::size_t>(i)]);
      }
      step.joint = encode_joint(step.actions, g.action_counts);
      step.reward = g.rewards(state, step.joint);
      const auto next_row = g.transitions[static_cast<std::size_t>(state)].row(step.joint);
      step.next_state = sample_index(next_row, g.n_states);
      state = step.next_state;
      traj.steps.push_back(std::move(step));
    }
    out[static_cast<std::size_t>(b)] = std::move(traj);
  }
  return out;
}

// Pearson chi-squared statistic comparing observed first-step action counts of
// one agent against the policy row at the observed states. Sanity diagnostic.
inline double trajectory_action_chisq(const MarkovGame& g, const JointPolicy& pi,
                                      const std::vector<Trajectory>& trajectories, int agent) {
  const int A = g.action_counts[static_cast<std::size_t>(agent)];
  Mat observed = Mat::Zero(g.n_states, A);
  Vec visits = Vec::Zero(g.n_states);
  for (const auto& traj : trajectories)
    for (const auto& step : traj.steps) {
      observed(step.state, step.actions[static_cast<std::size_t>(agent)]) += 1.0;
      visits(step.state) += 1.0;
    }
  double stat = 0.0;
  for (int s = 0; s < g.n_states; ++s) {
    if (visits(s) == 0.0) continue;
    for (int a = 0; a < A; ++a) {
      const double expected = visits(s) * pi.agents[static_cast<std::size_t>(agent)].table(s, a);
      if (expected > 0.0) {
        const double diff = observed(s, a) - expected;
        stat += diff * diff / expected;
      }
    }
  }
  return stat;
}

// Empirical state-visit frequencies over all sampled steps.
inline Vec empirical_state_visits(const MarkovGame& g, const std::vector<Trajectory>& trajectories) {
  Vec counts = Vec::Zero(g.n_states);
  double total = 0.0;
  for (const auto& traj : trajectories)
    for (const auto& step : traj.steps) {
      counts(step.state) += 1.0;
      total += 1.0;
    }
  if (total > 0.0) counts /= total;
  return counts;
}

// ---- Sequential advantage actor-critic -----------------------------------------

// Tabular softmax parameterization: one logit table per agent.
struct SoftmaxPolicyParams {
  std::vector<Mat> logits;  // [agent](state, action)
};

inline Mat softmax_policy_table(const Mat& logits) {
  Mat table(logits.rows(), logits.cols());
  for (Eigen::Index s = 0; s < logits.rows(); ++s) {
    const double shift = logits.row(s).maxCoeff();
    double total = 0.0;
    for (Eigen::Index a = 0; a < logits.cols(); ++a) {
      table(s, a) = std::exp(logits(s, a) - shift);
      total += table(s, a);
    }
    table.row(s) /= total;
  }
  return table;
}

inline JointPolicy softmax_policy(const SoftmaxPolicyParams& params) {
  JointPolicy pi;
  pi.agents.reserve(params.logits.size());
  for (const Mat& logits : params.logits) pi.agents.push_back({softmax_policy_table(logits)});
  return pi;
}

inline SoftmaxPolicyParams zero_logits(const MarkovGame& g) {
  SoftmaxPolicyParams params;
  params.logits.reserve(static_cast<std::size_t>(g.n_agents));
  for (int i = 0; i < g.n_agents; ++i) params.logits.push_back(Mat::Zero(g.n_states, g.action_counts[i]));
  return params;
}

enum class Haa2cMode { exact, monte_carlo };
enum class CriticKind { exact, fitted };

struct Haa2cConfig {
  Haa2cMode mode = Haa2cMode::exact;
  int mini_epochs = 4;
  double learning_rate = 0.1;
  double gae_lambda = 1.0;   // monte_carlo only
  int batch = 32;            // monte_carlo only
  int horizon = 32;          // monte_carlo only
  CriticKind critic = CriticKind::exact;
  PermutationSpec permutations;
  std::uint64_t seed = 0;
};

inline void validate_haa2c(const Haa2cConfig& cfg, const MarkovGame& g) {
  if (cfg.mini_epochs < 1) throw ConfigError("mini_epochs: must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate: must be positive");
  if (!(cfg.gae_lambda >= 0.0 && cfg.gae_lambda <= 1.0)) throw ConfigError("gae_lambda: must lie in [0, 1]");
  if (cfg.batch < 1) throw ConfigError("batch: must be >= 1");
  if (cfg.horizon < 1) throw ConfigError("horizon: must be >= 1");
  validate_permutations(cfg.permutations, g.n_agents);
}

namespace detail {

// Exact surrogate for one agent given the running per-joint-action multiplier
// table m (advantage times the predecessor probability ratios): the state
// weighting times the old joint distribution times the candidate's own ratio.
inline double haa2c_objective_exact(const MarkovGame& g, const Vec& state_weight, const JointPolicy& pi_old,
                                    const std::vector<std::vector<int>>& joints, const Mat& m, int agent,
                                    const Mat& cand_table) {
  double total = 0.0;
  for (int s = 0; s < g.n_states; ++s)
    for (int ja = 0; ja < g.joint_actions(); ++ja) {
      const auto& tuple = joints[static_cast<std::size_t>(ja)];
      const double p_old = pi_old.joint_prob(s, tuple);
      if (p_old == 0.0) continue;
      const int b = tuple[static_cast<std::size_t>(agent)];
      const double own_old = pi_old.agents[static_cast<std::size_t>(agent)].table(s, b);
      total += state_weight(s) * p_old * m(s, ja) * (cand_table(s, b) / own_old);
    }
  return total;
}

// Gradient of the exact surrogate in the agent's logits, via the softmax
// Jacobian d pi(c) / d theta(b) = pi(c) (1[b = c] - pi(b)).
inline Mat haa2c_gradient_exact(const MarkovGame& g, const Vec& state_weight, const JointPolicy& pi_old,
                                const std::vector<std::vector<int>>& joints, const Mat& m, int agent,
                                const Mat& cand_table) {
  const int A = g.action_counts[static_cast<std::size_t>(agent)];
  Mat grad = Mat::Zero(g.n_states, A);
  for (int s = 0; s < g.n_states; ++s) {
    Vec coeff = Vec::Zero(A);  // d objective / d cand_table(s, c)
    for (int ja = 0; ja < g.joint_actions(); ++ja) {
      const auto& tuple = joints[static_cast<std::size_t>(ja)];
      const double p_old = pi_old.joint_prob(s, tuple);
      if (p_old == 0.0) continue;
      const int c = tuple[static_cast<std::size_t>(agent)];
      const double own_old = pi_old.agents[static_cast<std::size_t>(agent)].table(s, c);
      coeff(c) += state_weight(s) * p_old * m(s, ja) / own_old;
    }
    for (int b = 0; b < A; ++b) {
      double total = 0.0;
      for (int c = 0; c < A; ++c)
        total += coeff(c) * cand_table(s, c) * ((b == c ? 1.0 : 0.0) - cand_table(s, b));
      grad(s, b) = total;
    }
  }
  return grad;
}

}  // namespace detail

// Ratio-form surrogate for one agent: expectation under the normalized
// visitation and the OLD joint action distribution of the cascaded
// predecessor ratios, the candidate's own ratio, and the joint advantage.
// Built from scratch (no running multiplier) so it can cross-check a sweep.
inline double haa2c_surrogate(const MarkovGame& g, const EvalBundle& eval, const JointPolicy& pi_old,
                              const JointPolicy& pi_new, const std::vector<int>& predecessors, int agent,
                              const Mat& cand_table) {
  const auto joints = enumerate_joint_actions(g.action_counts);
  const Vec state_weight = eval.rho_normalized();
  double total = 0.0;
  for (int s = 0; s < g.n_states; ++s)
    for (int ja = 0; ja < g.joint_actions(); ++ja) {
      const auto& tuple = joints[static_cast<std::size_t>(ja)];
      const double p_old = pi_old.joint_prob(s, tuple);
      if (p_old == 0.0) continue;
      double ratio = 1.0;
      for (int p : predecessors) {
        const int a = tuple[static_cast<std::size_t>(p)];
        ratio *= pi_new.agents[static_cast<std::size_t>(p)].table(s, a) /
                 pi_old.agents[static_cast<std::size_t>(p)].table(s, a);
      }
      const int own = tuple[static_cast<std::size_t>(agent)];
      ratio *= cand_table(s, own) / pi_old.agents[static_cast<std::size_t>(agent)].table(s, own);
      total += state_weight(s) * p_old * ratio * (eval.q(s, ja) - eval.v(s));
    }
  return total;
}

// Generalized advantage estimates for one trajectory against a state-value
// baseline; the tail bootstraps with the baseline at the final next state.
inline std::vector<double> gae_advantages(const MarkovGame& g, const Trajectory& traj, const Vec& baseline,
                                          double lambda) {
  const std::size_t T = traj.steps.size();
  std::vector<double> adv(T, 0.0);
  double running = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    const auto& step = traj.steps[t];
    const double delta = step.reward + g.gamma * baseline(step.next_state) - baseline(step.state);
    running = delta + g.gamma * lambda * running;
    adv[t] = running;
  }
  return adv;
}

// Per-state running average of empirical discounted returns-to-go; states the
// batch never visits keep a zero estimate.
inline Vec fitted_critic(const MarkovGame& g, const std::vector<Trajectory>& trajectories) {
  Vec sums = Vec::Zero(g.n_states);
  Vec counts = Vec::Zero(g.n_states);
  for (const auto& traj : trajectories) {
    double ret = 0.0;
    std::vector<double> returns(traj.steps.size());
    for (std::size_t t = traj.steps.size(); t-- > 0;) {
      ret = traj.steps[t].reward + g.gamma * ret;
      returns[t] = ret;
    }
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      sums(traj.steps[t].state) += returns[t];
      counts(traj.steps[t].state) += 1.0;
    }
  }
  Vec v = Vec::Zero(g.n_states);
  for (int s = 0; s < g.n_states; ++s)
    if (counts(s) > 0.0) v(s) = sums(s) / counts(s);
  return v;
}

// Sampled surrogate for one agent over weighted trajectories: discounted sum,
// over transitions, of the cascaded ratio times the GAE advantage, scaled by
// (1 - gamma) to match the exact surrogate's normalized state weighting.
// Weights default to 1 / batch when omitted.
inline double haa2c_objective_mc(const MarkovGame& g, const std::vector<Trajectory>& trajectories,
                                 const std::vector<std::vector<double>>& advantages,
                                 const JointPolicy& pi_old, const JointPolicy& pi_new,
                                 const std::vector<int>& predecessors, int agent, const Mat& cand_table,
                                 const std::vector<double>* weights = nullptr) {
  double total = 0.0;
  for (std::size_t b = 0; b < trajectories.size(); ++b) {
    const double w = weights != nullptr ? (*weights)[b] : 1.0 / static_cast<double>(trajectories.size());
    double discount = 1.0;
    double contribution = 0.0;
    for (std::size_t t = 0; t < trajectories[b].steps.size(); ++t) {
      const auto& step = trajectories[b].steps[t];
      double ratio = 1.0;
      for (int p : predecessors) {
        const int a = step.actions[static_cast<std::size_t>(p)];
        ratio *= pi_new.agents[static_cast<std::size_t>(p)].table(step.state, a) /
                 pi_old.agents[static_cast<std::size_t>(p)].table(step.state, a);
      }
      const int own = step.actions[static_cast<std::size_t>(agent)];
      ratio *= cand_table(step.state, own) / pi_old.agents[static_cast<std::size_t>(agent)].table(step.state, own);
      contribution += discount * ratio * advantages[b][t];
      discount *= g.gamma;
    }
    total += w * contribution;
  }
  return (1.0 - g.gamma) * total;
}

// Gradient of the sampled surrogate in the agent's logits. The surrogate is
// linear in the candidate table, so collect per-(state, action) coefficients
// from the samples and push them through the softmax Jacobian.
inline Mat haa2c_gradient_mc(const MarkovGame& g, const std::vector<Trajectory>& trajectories,
                             const std::vector<std::vector<double>>& advantages, const JointPolicy& pi_old,
                             const JointPolicy& pi_new, const std::vector<int>& predecessors, int agent,
                             const Mat& cand_table, const std::vector<double>* weights = nullptr) {
  const int A = g.action_counts[static_cast<std::size_t>(agent)];
  Mat coeff = Mat::Zero(g.n_states, A);
  for (std::size_t b = 0; b < trajectories.size(); ++b) {
    const double w = weights != nullptr ? (*weights)[b] : 1.0 / static_cast<double>(trajectories.size());
    double discount = 1.0;
    for (std::size_t t = 0; t < trajectories[b].steps.size(); ++t) {
      const auto& step = trajectories[b].steps[t];
      double ratio = 1.0;
      for (int p : predecessors) {
        const int a = step.actions[static_cast<std::size_t>(p)];
        ratio *= pi_new.agents[static_cast<std::size_t>(p)].table(step.state, a) /
                 pi_old.agents[static_cast<std::size_t>(p)].table(step.state, a);
      }
      const int own = step.actions[static_cast<std::size_t>(agent)];
      coeff(step.state, own) += (1.0 - g.gamma) * w * discount * ratio * advantages[b][t] /
                                pi_old.agents[static_cast<std::size_t>(agent)].table(step.state, own);
      discount *= g.gamma;
    }
  }
  Mat grad = Mat::Zero(g.n_states, A);
  for (int s = 0; s < g.n_states; ++s)
    for (int b = 0; b < A; ++b) {
      double total = 0.0;
      for (int c = 0; c < A; ++c)
        total += coeff(s, c) * cand_table(s, c) * ((b == c ? 1.0 : 0.0) - cand_table(s, b));
      grad(s, b) = total;
    }
  return grad;
}

struct Haa2cReport {
  std::vector<int> permutation;
  double j_before = 0.0;
  double j_after = 0.0;
  std::vector<double> objective_gain;  // per agent, in update order position
};

// One sequential policy-gradient sweep. Agents update in a sampled order; each
// runs mini-epochs of ascent on its surrogate, then folds its probability
// ratio into the running multiplier so later agents optimize against the
// already-updated predecessors. Exact mode enumerates the surrogate and
// backtracks the step size so the objective never decreases within a sweep;
// Monte-Carlo mode estimates it from seeded rollouts with GAE advantages.
inline Haa2cReport haa2c_step(const MarkovGame& g, SoftmaxPolicyParams& params, const Haa2cConfig& cfg,
                              int iteration) {
  validate_haa2c(cfg, g);
  const JointPolicy pi_old = softmax_policy(params);
  validate_policy(g, pi_old);
  const EvalBundle eval = evaluate(g, pi_old);
  const auto joints = enumerate_joint_actions(g.action_counts);

  Haa2cReport report;
  report.j_before = eval.j;
  report.permutation = draw_permutation(cfg.permutations, g.n_agents, cfg.seed, iteration);

  std::vector<Trajectory> trajectories;
  std::vector<std::vector<double>> advantages;
  Mat m;  // exact mode: per (state, joint action) multiplier
  if (cfg.mode == Haa2cMode::exact) {
    m = Mat(g.n_states, g.joint_actions());
    for (int s = 0; s < g.n_states; ++s)
      for (int ja = 0; ja < g.joint_actions(); ++ja) m(s, ja) = eval.q(s, ja) - eval.v(s);
  } else {
    trajectories = sample_trajectories(g, pi_old, cfg.horizon, cfg.batch,
                                       derive_seed(cfg.seed, static_cast<std::uint64_t>(iteration)));
    const Vec baseline = cfg.critic == CriticKind::exact ? eval.v : fitted_critic(g, trajectories);
    advantages.reserve(trajectories.size());
    for (const auto& traj : trajectories) advantages.push_back(gae_advantages(g, traj, baseline, cfg.gae_lambda));
  }

  const Vec state_weight = eval.rho_normalized();
  JointPolicy pi_new = pi_old;
  std::vector<int> done;  // agents already updated, in order
  report.objective_gain.assign(static_cast<std::size_t>(g.n_agents), 0.0);

  for (int agent : report.permutation) {
    Mat& logits = params.logits[static_cast<std::size_t>(agent)];
    auto objective = [&](const Mat& cand) {
      if (cfg.mode == Haa2cMode::exact)
        return detail::haa2c_objective_exact(g, state_weight, pi_old, joints, m, agent, cand);
      return haa2c_objective_mc(g, trajectories, advantages, pi_old, pi_new, done, agent, cand);
    };
    const double before = objective(softmax_policy_table(logits));
    double value = before;
    double lr = cfg.learning_rate;
    for (int epoch = 0; epoch < cfg.mini_epochs; ++epoch) {
      const Mat table = softmax_policy_table(logits);
      Mat grad;
      if (cfg.mode == Haa2cMode::exact) {
        grad = detail::haa2c_gradient_exact(g, state_weight, pi_old, joints, m, agent, table);
      } else {
        grad = haa2c_gradient_mc(g, trajectories, advantages, pi_old, pi_new, done, agent, table);
      }
      if (cfg.mode == Haa2cMode::exact) {
        bool accepted = false;
        for (int tries = 0; tries < 40 && !accepted; ++tries) {
          const Mat trial = logits + lr * grad;
          const double trial_value = objective(softmax_policy_table(trial));
          if (trial_value >= value) {
            logits = trial;
            value = trial_value;
            accepted = true;
          } else {
            lr *= 0.5;
          }
        }
        if (!accepted) break;  // no acceptable step remains at this scale
      } else {
        logits += lr * grad;
      }
    }
    const Mat final_table = softmax_policy_table(logits);
    report.objective_gain[static_cast<std::size_t>(done.size())] = objective(final_table) - before;
    if (cfg.mode == Haa2cMode::exact) {
      for (int s = 0; s < g.n_states; ++s)
        for (int ja = 0; ja < g.joint_actions(); ++ja) {
          const int b = joints[static_cast<std::size_t>(ja)][static_cast<std::size_t>(agent)];
          m(s, ja) *= final_table(s, b) / pi_old.agents[static_cast<std::size_t>(agent)].table(s, b);
        }
    }
    pi_new.agents[static_cast<std::size_t>(agent)] = {final_table};
    done.push_back(agent);
  }

  report.j_after = evaluate(g, pi_new).j;
  return report;
}

}  // namespace haml
