// Reference implementations used only by tests. Each deliberately avoids the
// code path it checks: series summation instead of linear solves, recursive
// marginalization instead of joint-index scans, finite differences instead of
// analytic gradients.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "haml/eval.hpp"
#include "haml/game.hpp"

namespace haml::oracle {

inline Mat policy_transition(const MarkovGame& g, const JointPolicy& pi) {
  const auto joints = enumerate_joint_actions(g.action_counts);
  Mat p = Mat::Zero(g.n_states, g.n_states);
  for (int s = 0; s < g.n_states; ++s)
    for (int ja = 0; ja < g.joint_actions(); ++ja)
      p.row(s) += pi.joint_prob(s, joints[static_cast<std::size_t>(ja)]) *
                  g.transitions[static_cast<std::size_t>(s)].row(ja);
  return p;
}

inline Vec policy_reward(const MarkovGame& g, const JointPolicy& pi) {
  const auto joints = enumerate_joint_actions(g.action_counts);
  Vec r = Vec::Zero(g.n_states);
  for (int s = 0; s < g.n_states; ++s)
    for (int ja = 0; ja < g.joint_actions(); ++ja)
      r(s) += pi.joint_prob(s, joints[static_cast<std::size_t>(ja)]) * g.rewards(s, ja);
  return r;
}

// Truncated geometric series for the state values; the tail is bounded by
// gamma^terms * max |r| / (1 - gamma).
inline Vec series_values(const MarkovGame& g, const JointPolicy& pi, int terms = 2000) {
  const Mat p = policy_transition(g, pi);
  const Vec r = policy_reward(g, pi);
  Vec v = Vec::Zero(g.n_states);
  Vec term = r;
  double factor = 1.0;
  for (int t = 0; t < terms; ++t) {
    v += factor * term;
    term = p * term;
    factor *= g.gamma;
    if (factor == 0.0) break;
  }
  return v;
}

// Truncated series for the discounted visitation row vector d^T sum gamma^t P^t.
inline Vec series_visitation(const MarkovGame& g, const JointPolicy& pi, int terms = 2000) {
  const Mat p = policy_transition(g, pi);
  Vec rho = Vec::Zero(g.n_states);
  Vec term = g.initial;
  double factor = 1.0;
  for (int t = 0; t < terms; ++t) {
    rho += factor * term;
    term = p.transpose() * term;
    factor *= g.gamma;
    if (factor == 0.0) break;
  }
  return rho;
}

// Recursive marginalization of q over the complement of the pinned agents.
inline double recursive_marginal_q(const MarkovGame& g, const EvalBundle& eval, const JointPolicy& pi, int s,
                                   const std::vector<int>& agents, const std::vector<int>& actions) {
  std::vector<int> tuple(static_cast<std::size_t>(g.n_agents), -1);
  for (std::size_t k = 0; k < agents.size(); ++k) tuple[static_cast<std::size_t>(agents[k])] = actions[k];
  std::function<double(int)> expand = [&](int agent) -> double {
    if (agent == g.n_agents) return eval.q(s, encode_joint(tuple, g.action_counts));
    if (tuple[static_cast<std::size_t>(agent)] >= 0) return expand(agent + 1);
    double total = 0.0;
    for (int a = 0; a < g.action_counts[static_cast<std::size_t>(agent)]; ++a) {
      tuple[static_cast<std::size_t>(agent)] = a;
      total += pi.agents[static_cast<std::size_t>(agent)].table(s, a) * expand(agent + 1);
    }
    tuple[static_cast<std::size_t>(agent)] = -1;
    return total;
  };
  return expand(0);
}

// Central finite difference of a scalar function of one matrix entry.
inline double central_difference(const std::function<double(const Mat&)>& f, Mat at, Eigen::Index r,
                                 Eigen::Index c, double h) {
  Mat hi = at;
  Mat lo = at;
  hi(r, c) += h;
  lo(r, c) -= h;
  return (f(hi) - f(lo)) / (2.0 * h);
}

}  // namespace haml::oracle
