#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "haml/common.hpp"
#include "haml/rng.hpp"

namespace haml {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr double kStochasticTol = 1e-12;

// ---- Joint action encoding -------------------------------------------------
//
// A joint action is one action index per agent, packed into a single integer
// with mixed-radix positional encoding. Agent 0 is the most significant digit.

inline long long joint_action_count(const std::vector<int>& action_counts) {
  long long total = 1;
  for (int c : action_counts) {
    if (c < 1) throw ValidationError("action_counts: every agent needs at least one action");
    total *= c;
  }
  return total;
}

inline int encode_joint(const std::vector<int>& actions, const std::vector<int>& action_counts) {
  if (actions.size() != action_counts.size())
    throw ValidationError("encode_joint: one action per agent required");
  int index = 0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const int a = actions[i];
    if (a < 0 || a >= action_counts[i])
      throw ValidationError("encode_joint: action out of range for agent " + std::to_string(i));
    index = index * action_counts[i] + a;
  }
  return index;
}

inline std::vector<int> decode_joint(int index, const std::vector<int>& action_counts) {
  std::vector<int> actions(action_counts.size());
  for (std::size_t i = action_counts.size(); i-- > 0;) {
    actions[i] = index % action_counts[i];
    index /= action_counts[i];
  }
  return actions;
}

// All joint actions decoded once; row j is the action tuple with joint index j.
inline std::vector<std::vector<int>> enumerate_joint_actions(const std::vector<int>& action_counts) {
  const long long total = joint_action_count(action_counts);
  std::vector<std::vector<int>> out(static_cast<std::size_t>(total));
  for (long long j = 0; j < total; ++j) out[static_cast<std::size_t>(j)] = decode_joint(static_cast<int>(j), action_counts);
  return out;
}

// ---- Model -----------------------------------------------------------------

// Finite cooperative stochastic game with a shared reward. One-shot matrix
// games are encoded with a single state and gamma = 0.
struct MarkovGame {
  int n_agents = 0;
  int n_states = 0;
  std::vector<int> action_counts;  // one entry per agent
  double gamma = 0.0;              // in [0, 1)
  Vec initial;                     // strictly positive, sums to 1
  std::vector<Mat> transitions;    // [state](joint_action, next_state), rows stochastic
  Mat rewards;                     // (state, joint_action)

  int joint_actions() const { return static_cast<int>(joint_action_count(action_counts)); }
};

// Per-agent table of action distributions; row s is the distribution at state s.
struct AgentPolicy {
  Mat table;  // (state, action), rows on the simplex
};

// Product policy: agents act independently given the state.
struct JointPolicy {
  std::vector<AgentPolicy> agents;

  int n_agents() const { return static_cast<int>(agents.size()); }

  double joint_prob(int state, const std::vector<int>& actions) const {
    double p = 1.0;
    for (std::size_t i = 0; i < agents.size(); ++i) p *= agents[i].table(state, actions[i]);
    return p;
  }
};

namespace detail {

inline void check_simplex_row(const char* what, int row_index, const Eigen::Ref<const Eigen::RowVectorXd>& row,
                              double tol = kStochasticTol) {
  for (Eigen::Index c = 0; c < row.size(); ++c) {
    if (!(row(c) >= 0.0) || !std::isfinite(row(c))) {
      std::ostringstream msg;
      msg << what << ": row " << row_index << " has a negative or non-finite entry at column " << c;
      throw ValidationError(msg.str());
    }
  }
  const double sum = row.sum();
  if (std::abs(sum - 1.0) > tol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << ": row " << row_index << " sums to " << sum << ", expected 1 within " << tol;
    throw ValidationError(msg.str());
  }
}

}  // namespace detail

// Checks every structural invariant; throws ValidationError naming the first
// violated one, including the row index and offending sum where applicable.
inline void validate_game(const MarkovGame& g) {
  if (g.n_agents < 1) throw ValidationError("n_agents: must be at least 1");
  if (g.n_states < 1) throw ValidationError("n_states: must be at least 1");
  if (static_cast<int>(g.action_counts.size()) != g.n_agents)
    throw ValidationError("action_counts: needs exactly one entry per agent");
  const long long joint = joint_action_count(g.action_counts);
  if (!(g.gamma >= 0.0 && g.gamma < 1.0)) throw ValidationError("gamma: must lie in [0, 1)");
  if (g.initial.size() != g.n_states) throw ValidationError("initial: needs one entry per state");
  for (int s = 0; s < g.n_states; ++s) {
    if (!(g.initial(s) > 0.0))
      throw ValidationError("initial: entry " + std::to_string(s) + " must be strictly positive");
  }
  {
    const double sum = g.initial.sum();
    if (std::abs(sum - 1.0) > kStochasticTol) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "initial: sums to " << sum << ", expected 1 within " << kStochasticTol;
      throw ValidationError(msg.str());
    }
  }
  if (static_cast<int>(g.transitions.size()) != g.n_states)
    throw ValidationError("transitions: needs one block per state");
  for (int s = 0; s < g.n_states; ++s) {
    const Mat& block = g.transitions[s];
    if (block.rows() != joint || block.cols() != g.n_states)
      throw ValidationError("transitions: block for state " + std::to_string(s) +
                            " must be (joint_actions x n_states)");
    for (int a = 0; a < joint; ++a) {
      std::ostringstream what;
      what << "transitions[" << s << "]";
      detail::check_simplex_row(what.str().c_str(), a, block.row(a));
    }
  }
  if (g.rewards.rows() != g.n_states || g.rewards.cols() != joint)
    throw ValidationError("rewards: must be (n_states x joint_actions)");
  for (int s = 0; s < g.n_states; ++s)
    for (int a = 0; a < joint; ++a)
      if (!std::isfinite(g.rewards(s, a)))
        throw ValidationError("rewards: non-finite entry at state " + std::to_string(s) + ", joint action " +
                              std::to_string(a));
}

// Policy shape/stochasticity check against a game; names the first violation.
inline void validate_policy(const MarkovGame& g, const JointPolicy& pi) {
  if (pi.n_agents() != g.n_agents) throw ValidationError("policy: needs one table per agent");
  for (int i = 0; i < g.n_agents; ++i) {
    const Mat& table = pi.agents[i].table;
    if (table.rows() != g.n_states || table.cols() != g.action_counts[i])
      throw ValidationError("policy: table for agent " + std::to_string(i) +
                            " must be (n_states x action_count)");
    for (int s = 0; s < g.n_states; ++s) {
      std::ostringstream what;
      what << "policy[" << i << "]";
      detail::check_simplex_row(what.str().c_str(), s, table.row(s));
    }
  }
}

// ---- Builders ----------------------------------------------------------------

// n-agent one-shot coordination game with binary actions. Reward 1 exactly on
// the two joint actions where one contiguous half of the agents plays 0 and
// the other half plays 1; reward 0 elsewhere. Any policy shared by all agents
// is capped far below the optimum, which needs heterogeneous behavior.
inline MarkovGame build_prop1_game(int n_agents) {
  if (n_agents < 2 || n_agents % 2 != 0)
    throw ConfigError("n_agents: the homogeneity trap game needs an even agent count >= 2");
  MarkovGame g;
  g.n_agents = n_agents;
  g.n_states = 1;
  g.action_counts.assign(static_cast<std::size_t>(n_agents), 2);
  g.gamma = 0.0;
  g.initial = Vec::Ones(1);
  const int joint = g.joint_actions();
  g.transitions = {Mat::Ones(joint, 1)};
  g.rewards = Mat::Zero(1, joint);
  std::vector<int> low_high(static_cast<std::size_t>(n_agents), 0);
  std::vector<int> high_low(static_cast<std::size_t>(n_agents), 1);
  for (int i = n_agents / 2; i < n_agents; ++i) {
    low_high[static_cast<std::size_t>(i)] = 1;
    high_low[static_cast<std::size_t>(i)] = 0;
  }
  g.rewards(0, encode_joint(low_high, g.action_counts)) = 1.0;
  g.rewards(0, encode_joint(high_low, g.action_counts)) = 1.0;
  return g;
}

// Two-agent one-shot game rewarding miscoordination (0 on both-0, 2 on the two
// mixed pairs, -1 on both-1). Simultaneous greedy updates from policies that
// lean toward action 0 send both agents to action 1, the global minimum.
inline MarkovGame build_prop2_game() {
  MarkovGame g;
  g.n_agents = 2;
  g.n_states = 1;
  g.action_counts = {2, 2};
  g.gamma = 0.0;
  g.initial = Vec::Ones(1);
  g.transitions = {Mat::Ones(4, 1)};
  g.rewards = Mat(1, 4);
  g.rewards << 0.0, 2.0, 2.0, -1.0;
  return g;
}

struct RandomGameSpec {
  int n_agents = 2;
  int n_states = 2;
  std::vector<int> action_counts;  // empty means 2 actions per agent
  double gamma = 0.9;
  double reward_lo = -1.0;
  double reward_hi = 1.0;
};

// Seeded random instance: transition rows are symmetric-Dirichlet draws,
// rewards are uniform in [reward_lo, reward_hi], the initial distribution is
// uniform. Deterministic function of (spec, seed).
inline MarkovGame random_game(const RandomGameSpec& spec, std::uint64_t seed) {
  MarkovGame g;
  g.n_agents = spec.n_agents;
  g.n_states = spec.n_states;
  g.action_counts = spec.action_counts.empty()
                        ? std::vector<int>(static_cast<std::size_t>(spec.n_agents), 2)
                        : spec.action_counts;
  g.gamma = spec.gamma;
  if (spec.reward_hi < spec.reward_lo) throw ConfigError("reward_range: hi must be >= lo");
  const int joint = static_cast<int>(joint_action_count(g.action_counts));
  g.initial = Vec::Constant(g.n_states, 1.0 / g.n_states);
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> reward(spec.reward_lo, spec.reward_hi);
  g.transitions.assign(static_cast<std::size_t>(g.n_states), Mat::Zero(joint, g.n_states));
  for (int s = 0; s < g.n_states; ++s)
    for (int a = 0; a < joint; ++a) {
      const std::vector<double> row = dirichlet_row(rng, g.n_states);
      for (int t = 0; t < g.n_states; ++t) g.transitions[static_cast<std::size_t>(s)](a, t) = row[static_cast<std::size_t>(t)];
    }
  g.rewards = Mat::Zero(g.n_states, joint);
  for (int s = 0; s < g.n_states; ++s)
    for (int a = 0; a < joint; ++a) g.rewards(s, a) = reward(rng);
  validate_game(g);
  return g;
}

inline JointPolicy uniform_joint_policy(const MarkovGame& g) {
  JointPolicy pi;
  pi.agents.reserve(static_cast<std::size_t>(g.n_agents));
  for (int i = 0; i < g.n_agents; ++i)
    pi.agents.push_back({Mat::Constant(g.n_states, g.action_counts[i], 1.0 / g.action_counts[i])});
  return pi;
}

// Deterministic policy; actions[i][s] is agent i's action at state s.
inline JointPolicy dirac_joint_policy(const MarkovGame& g, const std::vector<std::vector<int>>& actions) {
  if (static_cast<int>(actions.size()) != g.n_agents)
    throw ValidationError("actions: needs one row per agent");
  JointPolicy pi;
  pi.agents.reserve(static_cast<std::size_t>(g.n_agents));
  for (int i = 0; i < g.n_agents; ++i) {
    Mat table = Mat::Zero(g.n_states, g.action_counts[i]);
    if (static_cast<int>(actions[static_cast<std::size_t>(i)].size()) != g.n_states)
      throw ValidationError("actions: needs one action per state for agent " + std::to_string(i));
    for (int s = 0; s < g.n_states; ++s) {
      const int a = actions[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
      if (a < 0 || a >= g.action_counts[i])
        throw ValidationError("actions: out of range for agent " + std::to_string(i));
      table(s, a) = 1.0;
    }
    pi.agents.push_back({std::move(table)});
  }
  return pi;
}

// Seeded interior policy with symmetric-Dirichlet rows; every entry positive
// with probability one.
inline JointPolicy random_joint_policy(const MarkovGame& g, std::uint64_t seed, double alpha = 1.0) {
  auto rng = make_rng(seed);
  JointPolicy pi;
  pi.agents.reserve(static_cast<std::size_t>(g.n_agents));
  for (int i = 0; i < g.n_agents; ++i) {
    Mat table(g.n_states, g.action_counts[i]);
    for (int s = 0; s < g.n_states; ++s) {
      const std::vector<double> row = dirichlet_row(rng, g.action_counts[i], alpha);
      for (int a = 0; a < g.action_counts[i]; ++a) table(s, a) = row[static_cast<std::size_t>(a)];
    }
    pi.agents.push_back({std::move(table)});
  }
  return pi;
}

}  // namespace haml
