#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "haml/game.hpp"

namespace haml {

// Exact evaluation of a joint policy.
struct EvalBundle {
  Vec v;     // state values
  Mat q;     // (state, joint_action) action values
  Vec rho;   // discounted state visitation, sums to 1 / (1 - gamma)
  double j;  // value under the initial distribution

  double gamma = 0.0;

  // Visitation rescaled to a probability distribution; strictly positive
  // because the initial distribution is.
  Vec rho_normalized() const { return (1.0 - gamma) * rho; }
};

namespace detail {

// Per-state joint action distribution induced by a product policy.
inline Vec joint_distribution(const MarkovGame& g, const JointPolicy& pi, int s,
                              const std::vector<std::vector<int>>& joints) {
  const int joint = g.joint_actions();
  Vec dist(joint);
  for (int a = 0; a < joint; ++a) dist(a) = pi.joint_prob(s, joints[static_cast<std::size_t>(a)]);
  return dist;
}

}  // namespace detail

// Direct linear-solve evaluation: state values from (I - gamma P_pi) v = r_pi,
// action values from the one-step lookahead, visitation from the transposed
// system rho = d + gamma P_pi^T rho.
inline EvalBundle evaluate(const MarkovGame& g, const JointPolicy& pi) {
  const int S = g.n_states;
  const int joint = g.joint_actions();
  const auto joints = enumerate_joint_actions(g.action_counts);

  Mat p_pi(S, S);
  Vec r_pi(S);
  for (int s = 0; s < S; ++s) {
    const Vec dist = detail::joint_distribution(g, pi, s, joints);
    r_pi(s) = dist.dot(g.rewards.row(s));
    p_pi.row(s) = (g.transitions[static_cast<std::size_t>(s)].transpose() * dist).transpose();
  }

  EvalBundle out;
  out.gamma = g.gamma;
  const Mat system = Mat::Identity(S, S) - g.gamma * p_pi;
  Eigen::PartialPivLU<Mat> lu(system);
  out.v = lu.solve(r_pi);
  out.rho = system.transpose().partialPivLu().solve(g.initial);
  out.q = Mat(S, joint);
  for (int s = 0; s < S; ++s)
    out.q.row(s) = g.rewards.row(s) + g.gamma * (g.transitions[static_cast<std::size_t>(s)] * out.v).transpose();
  out.j = g.initial.dot(out.v);
  return out;
}

namespace detail {

inline void check_agent_subset(const MarkovGame& g, const std::vector<int>& agents) {
  std::vector<bool> seen(static_cast<std::size_t>(g.n_agents), false);
  for (int i : agents) {
    if (i < 0 || i >= g.n_agents) throw ValidationError("agents: index out of range");
    if (seen[static_cast<std::size_t>(i)]) throw ValidationError("agents: duplicate agent in subset");
    seen[static_cast<std::size_t>(i)] = true;
  }
}

}  // namespace detail

// Expectation of q(s, .) with the listed agents pinned to `actions` and every
// other agent drawn from its component of pi. An empty subset gives v(s); the
// full set gives q(s, a) itself.
inline double multi_agent_q(const MarkovGame& g, const EvalBundle& eval, const JointPolicy& pi, int s,
                            const std::vector<int>& agents, const std::vector<int>& actions) {
  detail::check_agent_subset(g, agents);
  if (agents.size() != actions.size()) throw ValidationError("actions: one action per listed agent required");
  const auto joints = enumerate_joint_actions(g.action_counts);
  std::vector<int> pinned(static_cast<std::size_t>(g.n_agents), -1);
  for (std::size_t k = 0; k < agents.size(); ++k) {
    const int i = agents[k];
    if (actions[k] < 0 || actions[k] >= g.action_counts[static_cast<std::size_t>(i)])
      throw ValidationError("actions: out of range for agent " + std::to_string(i));
    pinned[static_cast<std::size_t>(i)] = actions[k];
  }
  double total = 0.0;
  for (int a = 0; a < g.joint_actions(); ++a) {
    const std::vector<int>& tuple = joints[static_cast<std::size_t>(a)];
    double w = 1.0;
    for (int i = 0; i < g.n_agents && w != 0.0; ++i) {
      const int pin = pinned[static_cast<std::size_t>(i)];
      if (pin >= 0) {
        if (tuple[static_cast<std::size_t>(i)] != pin) w = 0.0;
      } else {
        w *= pi.agents[static_cast<std::size_t>(i)].table(s, tuple[static_cast<std::size_t>(i)]);
      }
    }
    if (w != 0.0) total += w * eval.q(s, a);
  }
  return total;
}

// Advantage of the `agents` block taking `actions`, conditioned on the
// `predecessors` block already holding `pred_actions`; both expectations are
// over the remaining agents' components of pi.
inline double multi_agent_advantage(const MarkovGame& g, const EvalBundle& eval, const JointPolicy& pi, int s,
                                    const std::vector<int>& predecessors, const std::vector<int>& pred_actions,
                                    const std::vector<int>& agents, const std::vector<int>& actions) {
  std::vector<int> joint_set = predecessors;
  joint_set.insert(joint_set.end(), agents.begin(), agents.end());
  std::vector<int> joint_acts = pred_actions;
  joint_acts.insert(joint_acts.end(), actions.begin(), actions.end());
  return multi_agent_q(g, eval, pi, s, joint_set, joint_acts) -
         multi_agent_q(g, eval, pi, s, predecessors, pred_actions);
}

// Residual of the sequential decomposition: the block advantage of an ordered
// agent set must equal the sum of each agent's advantage conditioned on the
// actions of the agents before it.
inline double check_advantage_decomposition(const MarkovGame& g, const EvalBundle& eval, const JointPolicy& pi,
                                            int s, const std::vector<int>& agents,
                                            const std::vector<int>& actions) {
  const double block = multi_agent_advantage(g, eval, pi, s, {}, {}, agents, actions);
  double sum = 0.0;
  std::vector<int> preds;
  std::vector<int> pred_acts;
  for (std::size_t k = 0; k < agents.size(); ++k) {
    sum += multi_agent_advantage(g, eval, pi, s, preds, pred_acts, {agents[k]}, {actions[k]});
    preds.push_back(agents[k]);
    pred_acts.push_back(actions[k]);
  }
  return std::abs(block - sum);
}

struct BestResponse {
  int agent = 0;
  AgentPolicy policy;  // deterministic rows
  double value = 0.0;  // exact value of the response against the fixed others
};

// Value-iteration tolerance chosen so the final sup-norm error is below 1e-12.
inline double value_iteration_tol(double gamma) {
  return gamma > 0.0 ? 1e-12 * (1.0 - gamma) / gamma : 0.0;
}

// Exact best response of one agent against the others' fixed policy components:
// marginalize the others out into a single-agent problem, run value iteration
// to the sup-norm tolerance (a single sweep when gamma = 0), extract the greedy
// deterministic policy (lowest action index on ties), then evaluate it exactly.
inline BestResponse best_response(const MarkovGame& g, const JointPolicy& pi, int agent) {
  if (agent < 0 || agent >= g.n_agents) throw ValidationError("agent: index out of range");
  const int S = g.n_states;
  const int A = g.action_counts[static_cast<std::size_t>(agent)];
  const auto joints = enumerate_joint_actions(g.action_counts);

  // Induced single-agent model, others marginalized under pi.
  std::vector<Mat> p_marg(static_cast<std::size_t>(S), Mat::Zero(A, S));
  Mat r_marg = Mat::Zero(S, A);
  for (int s = 0; s < S; ++s)
    for (int ja = 0; ja < g.joint_actions(); ++ja) {
      const std::vector<int>& tuple = joints[static_cast<std::size_t>(ja)];
      double w = 1.0;
      for (int i = 0; i < g.n_agents; ++i)
        if (i != agent) w *= pi.agents[static_cast<std::size_t>(i)].table(s, tuple[static_cast<std::size_t>(i)]);
      if (w == 0.0) continue;
      const int b = tuple[static_cast<std::size_t>(agent)];
      r_marg(s, b) += w * g.rewards(s, ja);
      p_marg[static_cast<std::size_t>(s)].row(b) += w * g.transitions[static_cast<std::size_t>(s)].row(ja);
    }

  Vec v = Vec::Zero(S);
  const double tol = value_iteration_tol(g.gamma);
  const int max_sweeps = g.gamma > 0.0 ? 1000000 : 1;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    Vec next(S);
    for (int s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int b = 0; b < A; ++b)
        best = std::max(best, r_marg(s, b) + g.gamma * p_marg[static_cast<std::size_t>(s)].row(b).dot(v));
      next(s) = best;
    }
    const double change = (next - v).lpNorm<Eigen::Infinity>();
    v = next;
    if (change <= tol) break;
  }

  BestResponse out;
  out.agent = agent;
  out.policy.table = Mat::Zero(S, A);
  for (int s = 0; s < S; ++s) {
    int best_b = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (int b = 0; b < A; ++b) {
      const double val = r_marg(s, b) + g.gamma * p_marg[static_cast<std::size_t>(s)].row(b).dot(v);
      if (val > best_val) {
        best_val = val;
        best_b = b;
      }
    }
    out.policy.table(s, best_b) = 1.0;
  }

  JointPolicy response = pi;
  response.agents[static_cast<std::size_t>(agent)] = out.policy;
  out.value = evaluate(g, response).j;
  return out;
}

// Largest unilateral improvement any agent can gain by deviating to its best
// response. Non-negative up to solver roundoff; zero exactly at equilibria.
inline double nash_gap(const MarkovGame& g, const JointPolicy& pi) {
  const double j = evaluate(g, pi).j;
  double gap = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < g.n_agents; ++i) gap = std::max(gap, best_response(g, pi, i).value - j);
  return gap;
}

}  // namespace haml
