#include "haml/baselines.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "haml/eval.hpp"
#include "haml/game.hpp"

namespace haml {
namespace {

TEST(NaiveSimultaneous, CollapsesToWorstJointAction) {
  // Both agents lean 0.7 toward action 0, so each one's unilateral greedy
  // response is action 1; updating together lands on the -1 outcome.
  const MarkovGame g = build_prop2_game();
  JointPolicy pi = uniform_joint_policy(g);
  pi.agents[0].table.row(0) << 0.7, 0.3;
  pi.agents[1].table.row(0) << 0.7, 0.3;
  const JointPolicy next = naive_simultaneous_step(g, pi);
  EXPECT_EQ(next.agents[0].table(0, 1), 1.0);
  EXPECT_EQ(next.agents[1].table(0, 1), 1.0);
  EXPECT_NEAR(evaluate(g, next).j, -1.0, 1e-15);
}

TEST(NaiveSimultaneous, EquilibriumIsAFixedPoint) {
  const MarkovGame g = build_prop2_game();
  const JointPolicy ne = dirac_joint_policy(g, {{0}, {1}});
  const JointPolicy next = naive_simultaneous_step(g, ne);
  EXPECT_EQ(next.agents[0].table(0, 0), 1.0);
  EXPECT_EQ(next.agents[1].table(0, 1), 1.0);
}

TEST(SharedPolicy, HomogeneityTrapCeiling) {
  // Identical policies can reward only through the two mixed patterns, and
  // p = 1/2 maximizes 2 p^(n/2) (1-p)^(n/2), giving 2 / 2^n.
  for (int n : {4, 6}) {
    const MarkovGame g = build_prop1_game(n);
    const SharedOptimum opt = shared_policy_optimum(g);
    EXPECT_NEAR(opt.p_star, 0.5, 1e-6);
    EXPECT_NEAR(opt.j_star, 2.0 / std::pow(2.0, n), 1e-10);
  }
}

TEST(SharedPolicy, EndpointOptimumIsFound) {
  MarkovGame g;
  g.n_agents = 1;
  g.n_states = 1;
  g.action_counts = {2};
  g.gamma = 0.0;
  g.initial = Vec::Ones(1);
  g.transitions = {Mat::Ones(2, 1)};
  g.rewards = Mat(1, 2);
  g.rewards << 1.0, 0.0;
  const SharedOptimum opt = shared_policy_optimum(g);
  EXPECT_NEAR(opt.p_star, 1.0, 1e-6);
  EXPECT_NEAR(opt.j_star, 1.0, 1e-9);
}

TEST(SharedPolicy, RequiresBinaryActions) {
  RandomGameSpec spec;
  spec.n_agents = 2;
  spec.action_counts = {2, 3};
  const MarkovGame g = random_game(spec, 5);
  EXPECT_THROW(shared_policy_optimum(g), ConfigError);
}

TEST(BruteForce, FindsTrapGameOptima) {
  EXPECT_NEAR(brute_force_optimum(build_prop1_game(4)).j, 1.0, 1e-12);
  EXPECT_NEAR(brute_force_optimum(build_prop2_game()).j, 2.0, 1e-12);
  // The gap between the deterministic optimum and the shared-policy ceiling
  // is the whole point of the homogeneity trap: 1 versus 2 / 2^n.
  const MarkovGame g = build_prop1_game(6);
  EXPECT_NEAR(brute_force_optimum(g).j / shared_policy_optimum(g).j_star, std::pow(2.0, 6) / 2.0, 1e-6);
}

TEST(BruteForce, DominatesStochasticPolicies) {
  RandomGameSpec spec;
  spec.n_agents = 2;
  spec.n_states = 2;
  const MarkovGame g = random_game(spec, 77);
  const BruteForceResult best = brute_force_optimum(g);
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    EXPECT_GE(best.j + 1e-10, evaluate(g, random_joint_policy(g, seed)).j);
}

TEST(BruteForce, RefusesOversizedSearch) {
  RandomGameSpec spec;
  spec.n_agents = 12;
  spec.n_states = 2;
  const MarkovGame g = random_game(spec, 3);
  EXPECT_THROW(brute_force_optimum(g), RuntimeFailure);
}

TEST(Trajectories, SeededAndPrefixStable) {
  RandomGameSpec spec;
  spec.n_agents = 2;
  spec.n_states = 3;
  const MarkovGame g = random_game(spec, 13);
  const JointPolicy pi = random_joint_policy(g, 14);
  const auto a = sample_trajectories(g, pi, 5, 4, 99);
  const auto b = sample_trajectories(g, pi, 5, 4, 99);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].steps.size(), 5u);
    for (std::size_t t = 0; t < 5; ++t) {
      EXPECT_EQ(a[i].steps[t].state, b[i].steps[t].state);
      EXPECT_EQ(a[i].steps[t].actions, b[i].steps[t].actions);
      // Recorded fields are consistent with the model.
      EXPECT_EQ(a[i].steps[t].joint, encode_joint(a[i].steps[t].actions, g.action_counts));
      EXPECT_EQ(a[i].steps[t].reward, g.rewards(a[i].steps[t].state, a[i].steps[t].joint));
      if (t + 1 < 5) EXPECT_EQ(a[i].steps[t].next_state, a[i].steps[t + 1].state);
    }
  }
  // Growing the batch keeps earlier trajectories byte-identical.
  const auto c = sample_trajectories(g, pi, 5, 8, 99);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(c[i].steps[t].actions, a[i].steps[t].actions);
}

TEST(Trajectories, MatchPolicyFrequencies) {
  const MarkovGame g = build_prop2_game();
  JointPolicy pi = uniform_joint_policy(g);
  pi.agents[0].table.row(0) << 0.7, 0.3;
  const auto batch = sample_trajectories(g, pi, 1, 2000, 4);
  // Chi-squared with one effective degree of freedom; 25 is far in the tail.
  EXPECT_LT(trajectory_action_chisq(g, pi, batch, 0), 25.0);
  EXPECT_LT(trajectory_action_chisq(g, pi, batch, 1), 25.0);
  // Dirac rows reproduce exactly.
  const JointPolicy dirac = dirac_joint_policy(g, {{1}, {0}});
  const auto fixed = sample_trajectories(g, dirac, 3, 50, 5);
  EXPECT_EQ(trajectory_action_chisq(g, dirac, fixed, 0), 0.0);
  for (const auto& traj : fixed)
    for (const auto& step : traj.steps) EXPECT_EQ(step.actions, (std::vector<int>{1, 0}));
  const Vec visits = empirical_state_visits(g, fixed);
  EXPECT_NEAR(visits.sum(), 1.0, 1e-12);
}

TEST(Gae, LambdaOneIsReturnMinusBaseline) {
  MarkovGame g;
  g.n_agents = 1;
  g.n_states = 2;
  g.action_counts = {1};
  g.gamma = 0.5;
  g.initial = Vec::Constant(2, 0.5);
  g.transitions = {Mat::Ones(1, 2) * 0.5, Mat::Ones(1, 2) * 0.5};
  g.rewards = Mat(2, 1);
  g.rewards << 1.0, 2.0;
  Trajectory traj;
  traj.steps = {{0, {0}, 0, 1.0, 1}, {1, {0}, 0, 2.0, 0}};
  Vec baseline(2);
  baseline << 0.3, 0.9;
  const auto full = gae_advantages(g, traj, baseline, 1.0);
  // Discounted return plus bootstrapped tail, minus the baseline.
  EXPECT_NEAR(full[0], 1.0 + 0.5 * 2.0 + 0.25 * 0.3 - 0.3, 1e-15);
  EXPECT_NEAR(full[1], 2.0 + 0.5 * 0.3 - 0.9, 1e-15);
  // Lambda zero reduces to one-step temporal differences.
  const auto td = gae_advantages(g, traj, baseline, 0.0);
  EXPECT_NEAR(td[0], 1.0 + 0.5 * 0.9 - 0.3, 1e-15);
  EXPECT_NEAR(td[1], 2.0 + 0.5 * 0.3 - 0.9, 1e-15);
}

TEST(FittedCritic, AveragesReturnsToGo) {
  const MarkovGame g = build_prop2_game();
  Trajectory first;
  first.steps = {{0, {0, 1}, 1, 2.0, 0}};
  Trajectory second;
  second.steps = {{0, {1, 1}, 3, -1.0, 0}};
  const Vec v = fitted_critic(g, {first, second});
  EXPECT_NEAR(v(0), 0.5, 1e-15);
}

TEST(SoftmaxPolicies, TablesAreRowStochastic) {
  const MarkovGame g = build_prop2_game();
  SoftmaxPolicyParams params = zero_logits(g);
  EXPECT_NEAR(softmax_policy(params).agents[0].table(0, 0), 0.5, 1e-15);
  params.logits[0](0, 0) = 2.0;
  params.logits[0](0, 1) = -1.0;
  const Mat table = softmax_policy_table(params.logits[0]);
  EXPECT_NEAR(table.row(0).sum(), 1.0, 1e-15);
  EXPECT_NEAR(table(0, 0) / table(0, 1), std::exp(3.0), 1e-12);
  validate_policy(g, softmax_policy(params));
}

TEST(Haa2c, ValidationNamesField) {
  const MarkovGame g = build_prop2_game();
  Haa2cConfig cfg;
  cfg.mini_epochs = 0;
  EXPECT_THROW(validate_haa2c(cfg, g), ConfigError);
  cfg.mini_epochs = 1;
  cfg.learning_rate = 0.0;
  EXPECT_THROW(validate_haa2c(cfg, g), ConfigError);
  cfg.learning_rate = 0.1;
  cfg.gae_lambda = 1.5;
  EXPECT_THROW(validate_haa2c(cfg, g), ConfigError);
  cfg.gae_lambda = 1.0;
  EXPECT_NO_THROW(validate_haa2c(cfg, g));
}

TEST(Haa2c, CascadedMultiplierMatchesScratchSurrogate) {
  // Fold agent 0's ratio into the multiplier table, then the running form for
  // agent 1 must equal the from-scratch ratio surrogate.
  const MarkovGame g = build_prop2_game();
  JointPolicy pi_old = uniform_joint_policy(g);
  pi_old.agents[0].table.row(0) << 0.7, 0.3;
  pi_old.agents[1].table.row(0) << 0.6, 0.4;
  const EvalBundle eval = evaluate(g, pi_old);
  const auto joints = enumerate_joint_actions(g.action_counts);

  JointPolicy pi_new = pi_old;
  pi_new.agents[0].table.row(0) << 0.5, 0.5;

  Mat m(g.n_states, g.joint_actions());
  for (int s = 0; s < g.n_states; ++s)
    for (int ja = 0; ja < g.joint_actions(); ++ja) {
      m(s, ja) = eval.q(s, ja) - eval.v(s);
      const int b = joints[static_cast<std::size_t>(ja)][0];
      m(s, ja) *= pi_new.agents[0].table(s, b) / pi_old.agents[0].table(s, b);
    }

  Mat cand(1, 2);
  cand << 0.55, 0.45;
  const double running =
      detail::haa2c_objective_exact(g, eval.rho_normalized(), pi_old, joints, m, 1, cand);
  const double scratch = haa2c_surrogate(g, eval, pi_old, pi_new, {0}, 1, cand);
  EXPECT_NEAR(running, scratch, 1e-13);
}

TEST(Haa2c, ExactGradientMatchesFiniteDifferences) {
  const MarkovGame g = build_prop2_game();
  JointPolicy pi_old = uniform_joint_policy(g);
  pi_old.agents[0].table.row(0) << 0.7, 0.3;
  const EvalBundle eval = evaluate(g, pi_old);
  const auto joints = enumerate_joint_actions(g.action_counts);
  Mat m(g.n_states, g.joint_actions());
  for (int s = 0; s < g.n_states; ++s)
    for (int ja = 0; ja < g.joint_actions(); ++ja) m(s, ja) = eval.q(s, ja) - eval.v(s);

  Mat logits(1, 2);
  logits << 0.2, -0.1;
  const Mat table = softmax_policy_table(logits);
  const Mat grad = detail::haa2c_gradient_exact(g, eval.rho_normalized(), pi_old, joints, m, 0, table);
  const double h = 1e-6;
  for (int b = 0; b < 2; ++b) {
    Mat hi = logits;
    Mat lo = logits;
    hi(0, b) += h;
    lo(0, b) -= h;
    const double fd = (detail::haa2c_objective_exact(g, eval.rho_normalized(), pi_old, joints, m, 0,
                                                     softmax_policy_table(hi)) -
                       detail::haa2c_objective_exact(g, eval.rho_normalized(), pi_old, joints, m, 0,
                                                     softmax_policy_table(lo))) /
                      (2.0 * h);
    EXPECT_NEAR(grad(0, b), fd, 1e-6);
  }
}

TEST(Haa2c, SampledEstimatorIsExactlyUnbiasedAtGammaZero) {
  // Enumerate every length-1 trajectory with its exact probability as the
  // weight: the (1 - gamma)-scaled sampled surrogate then reproduces the
  // enumerated surrogate to machine precision.
  const MarkovGame g = build_prop2_game();
  JointPolicy pi_old = uniform_joint_policy(g);
  pi_old.agents[0].table.row(0) << 0.7, 0.3;
  pi_old.agents[1].table.row(0) << 0.6, 0.4;
  const EvalBundle eval = evaluate(g, pi_old);
  JointPolicy pi_new = pi_old;
  pi_new.agents[0].table.row(0) << 0.5, 0.5;
  Mat cand(1, 2);
  cand << 0.55, 0.45;

  const auto joints = enumerate_joint_actions(g.action_counts);
  std::vector<Trajectory> support;
  std::vector<double> weights;
  std::vector<std::vector<double>> advantages;
  for (int ja = 0; ja < g.joint_actions(); ++ja) {
    const auto& tuple = joints[static_cast<std::size_t>(ja)];
    Trajectory traj;
    traj.steps = {{0, tuple, ja, g.rewards(0, ja), 0}};
    weights.push_back(pi_old.joint_prob(0, tuple));
    advantages.push_back(gae_advantages(g, traj, eval.v, 0.37));
    support.push_back(std::move(traj));
  }
  const double sampled = haa2c_objective_mc(g, support, advantages, pi_old, pi_new, {0}, 1, cand, &weights);
  const double exact = haa2c_surrogate(g, eval, pi_old, pi_new, {0}, 1, cand);
  EXPECT_NEAR(sampled, exact, 1e-14);

  // The sampled gradient inherits the same identity through linearity.
  Mat logits(1, 2);
  logits << 0.1, -0.2;
  const Mat table = softmax_policy_table(logits);
  const Mat sampled_grad =
      haa2c_gradient_mc(g, support, advantages, pi_old, pi_new, {0}, 1, table, &weights);
  const double h = 1e-6;
  for (int b = 0; b < 2; ++b) {
    Mat hi = logits;
    Mat lo = logits;
    hi(0, b) += h;
    lo(0, b) -= h;
    const double fd = (haa2c_objective_mc(g, support, advantages, pi_old, pi_new, {0}, 1,
                                          softmax_policy_table(hi), &weights) -
                       haa2c_objective_mc(g, support, advantages, pi_old, pi_new, {0}, 1,
                                          softmax_policy_table(lo), &weights)) /
                      (2.0 * h);
    EXPECT_NEAR(sampled_grad(0, b), fd, 1e-6);
  }
}

TEST(Haa2c, ExactSweepNeverBacktracksAndImproves) {
  const MarkovGame g = build_prop2_game();
  SoftmaxPolicyParams params = zero_logits(g);
  Haa2cConfig cfg;
  cfg.learning_rate = 1.0;
  cfg.mini_epochs = 4;
  double j = evaluate(g, softmax_policy(params)).j;
  for (int k = 0; k < 60; ++k) {
    const Haa2cReport report = haa2c_step(g, params, cfg, k);
    EXPECT_NEAR(report.j_before, j, 1e-12);
    for (double gain : report.objective_gain) EXPECT_GE(gain, -1e-12);
    j = report.j_after;
  }
  // The sequential sweep steers the softmax toward the value-2 equilibrium.
  EXPECT_GT(j, 1.5);
}

TEST(Haa2c, MonteCarloSweepIsSeededAndFinite) {
  const MarkovGame g = build_prop2_game();
  Haa2cConfig cfg;
  cfg.mode = Haa2cMode::monte_carlo;
  cfg.batch = 64;
  cfg.horizon = 1;
  cfg.learning_rate = 0.2;
  cfg.seed = 9;
  SoftmaxPolicyParams a = zero_logits(g);
  SoftmaxPolicyParams b = zero_logits(g);
  const Haa2cReport ra = haa2c_step(g, a, cfg, 0);
  const Haa2cReport rb = haa2c_step(g, b, cfg, 0);
  EXPECT_EQ(ra.j_after, rb.j_after);
  EXPECT_TRUE(std::isfinite(ra.j_after));
  // The fitted critic variant is also deterministic under the same seed.
  cfg.critic = CriticKind::fitted;
  SoftmaxPolicyParams c = zero_logits(g);
  const Haa2cReport rc = haa2c_step(g, c, cfg, 0);
  EXPECT_TRUE(std::isfinite(rc.j_after));
}

}  // namespace
}  // namespace haml
