#include "haml/mirror.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "haml/drift.hpp"
#include "haml/eval.hpp"
#include "haml/game.hpp"

namespace haml {
namespace {

Vec row2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Mat table2(double a, double b) {
  Mat m(1, 2);
  m << a, b;
  return m;
}

// One agent, one state, rewards (1, -1): uniform-row advantages are (1, -1).
MarkovGame signed_bandit() {
  MarkovGame g;
  g.n_agents = 1;
  g.n_states = 1;
  g.action_counts = {2};
  g.gamma = 0.0;
  g.initial = Vec::Ones(1);
  g.transitions = {Mat::Ones(2, 1)};
  g.rewards = Mat(1, 2);
  g.rewards << 1.0, -1.0;
  return g;
}

HamoContext context_for(const MarkovGame& g, const EvalBundle& eval, const JointPolicy& pi, int agent,
                        const Predecessors& preds = {}, HadfSpec hadf = {}) {
  const Vec ones_like = eval.rho_normalized();
  return make_hamo_context(g, eval, pi, agent, preds, hadf, ones_like, ones_like);
}

TEST(HamoContext, AdvantageRowWithoutPredecessors) {
  const MarkovGame g = build_prop2_game();
  const JointPolicy pi = uniform_joint_policy(g);
  const EvalBundle eval = evaluate(g, pi);
  const HamoContext ctx = context_for(g, eval, pi, 0);
  const Vec& adv = expected_advantage_row(ctx, 0);
  EXPECT_NEAR(adv(0), 0.25, 1e-15);
  EXPECT_NEAR(adv(1), -0.25, 1e-15);
  EXPECT_NEAR(ctx.cache[0].q_base, eval.v(0), 1e-15);
}

TEST(HamoContext, AdvantageRowTracksUpdatedPredecessors) {
  // After agent 0 moves to (0.9, 0.1), agent 1's expected advantages flip to
  // 0.9 (-1, 1) + 0.1 (1.5, -1.5).
  const MarkovGame g = build_prop2_game();
  const JointPolicy pi = uniform_joint_policy(g);
  const EvalBundle eval = evaluate(g, pi);
  JointPolicy updated = pi;
  updated.agents[0].table.row(0) << 0.9, 0.1;
  Predecessors preds;
  preds.policy = &updated;
  preds.agents = {0};
  const HamoContext ctx = context_for(g, eval, pi, 1, preds);
  const Vec& adv = expected_advantage_row(ctx, 0);
  EXPECT_NEAR(adv(0), -0.75, 1e-12);
  EXPECT_NEAR(adv(1), 0.75, 1e-12);
  // Cached tuple tables carry the per-branch conditional values.
  ASSERT_EQ(ctx.cache[0].weight.size(), 2u);
  EXPECT_NEAR(ctx.cache[0].q_preds[0], 1.0, 1e-15);
  EXPECT_NEAR(ctx.cache[0].q_preds[1], 0.5, 1e-15);
}

TEST(HamoState, TrivialDriftIsPureAdvantage) {
  const MarkovGame g = build_prop2_game();
  const JointPolicy pi = uniform_joint_policy(g);
  const EvalBundle eval = evaluate(g, pi);
  const HamoContext ctx = context_for(g, eval, pi, 0);
  // Deterministic candidate on action 1 scores its advantage, -0.25.
  EXPECT_NEAR(hamo_state(ctx, table2(0.0, 1.0), 0), -0.25, 1e-15);
  EXPECT_NEAR(hamo_state(ctx, table2(1.0, 0.0), 0), 0.25, 1e-15);
  // The old row itself scores zero.
  EXPECT_NEAR(hamo_state(ctx, pi.agents[0].table, 0), 0.0, 1e-15);
}

TEST(HamoState, LeanedPolicyLandmark) {
  // Both agents at (0.7, 0.3): J stays 0.75 and the action-1 value rises to
  // 1.1, so the deterministic candidate scores 0.35.
  const MarkovGame g = build_prop2_game();
  JointPolicy pi = uniform_joint_policy(g);
  pi.agents[0].table.row(0) << 0.7, 0.3;
  pi.agents[1].table.row(0) << 0.7, 0.3;
  const EvalBundle eval = evaluate(g, pi);
  EXPECT_NEAR(eval.j, 0.75, 1e-15);
  EXPECT_NEAR(multi_agent_q(g, eval, pi, 0, {0}, {1}), 1.1, 1e-15);
  const HamoContext ctx = context_for(g, eval, pi, 0);
  EXPECT_NEAR(expected_hamo(ctx, table2(0.0, 1.0)), 0.35, 1e-12);
}

TEST(HamoState, PenaltyUsesNuOverBeta) {
  RandomGameSpec spec;
  spec.n_agents = 2;
  spec.n_states = 2;
  const MarkovGame g = random_game(spec, 71);
  const JointPolicy pi = random_joint_policy(g, 72);
  const EvalBundle eval = evaluate(g, pi);
  HadfSpec h;
  h.kind = HadfKind::squared_l2;
  h.tau = 1.0;
  Vec nu(2), beta(2);
  nu << 0.5, 0.5;
  beta << 0.25, 0.75;
  const HamoContext ctx = make_hamo_context(g, eval, pi, 0, {}, h, nu, beta);
  Mat cand = pi.agents[0].table;
  cand.row(0) << 0.9, 0.1;
  cand.row(1) << 0.3, 0.7;
  for (int s = 0; s < 2; ++s) {
    const double adv = cand.row(s) * expected_advantage_row(ctx, s);
    const double drift = drift_state(h, g, eval, pi, 0, cand.row(s).transpose(), s);
    EXPECT_NEAR(hamo_state(ctx, cand, s), adv - (nu(s) / beta(s)) * drift, 1e-12);
  }
  // expected_hamo is the beta-weighted total of the per-state scores.
  const double total = beta(0) * hamo_state(ctx, cand, 0) + beta(1) * hamo_state(ctx, cand, 1);
  EXPECT_NEAR(expected_hamo(ctx, cand), total, 1e-14);
}

TEST(HamoState, RejectsNonSimplexRow) {
  const MarkovGame g = build_prop2_game();
  const JointPolicy pi = uniform_joint_policy(g);
  const EvalBundle eval = evaluate(g, pi);
  const HamoContext ctx = context_for(g, eval, pi, 0);
  EXPECT_THROW(hamo_state(ctx, table2(0.7, 0.2), 0), ValidationError);
}

TEST(CachedDrift, AgreesWithDirectEvaluation) {
  const MarkovGame g = build_prop2_game();
  const JointPolicy pi = uniform_joint_policy(g);
  const EvalBundle eval = evaluate(g, pi);
  JointPolicy updated = pi;
  updated.agents[0].table.row(0) << 0.9, 0.1;
  Predecessors preds;
  preds.policy = &updated;
  preds.agents = {0};
  auto rng = make_rng(81);
  for (HadfKind kind : {HadfKind::trivial, HadfKind::kl_penalty, HadfKind::clip_relu, HadfKind::squared_l2}) {
    HadfSpec h;
    h.kind = kind;
    h.tau = 0.7;
    h.epsilon = 0.2;
    const HamoContext ctx = context_for(g, eval, pi, 1, preds, h);
    for (int trial = 0; trial < 10; ++trial) {
      const std::vector<double> draw = dirichlet_row(rng, 2);
      const Vec cand = row2(draw[0], draw[1]);
      EXPECT_NEAR(detail::drift_state_cached(ctx, cand, 0), drift_state(h, g, eval, pi, 1, cand, 0, preds),
                  1e-12);
    }
  }
}

TEST(CachedDrift, GradientMatchesFiniteDifferences) {
  const MarkovGame g = build_prop2_game();
  const JointPolicy pi = uniform_joint_policy(g);
  const EvalBundle eval = evaluate(g, pi);
  const Vec cand = row2(0.8, 0.2);  // ratios (1.6, 0.4), outside the clip band
  const double h_step = 1e-7;
  for (HadfKind kind : {HadfKind::kl_penalty, HadfKind::squared_l2, HadfKind::clip_relu}) {
    for (KlDirection dir : {KlDirection::new_to_old, KlDirection::old_to_new}) {
      HadfSpec h;
      h.kind = kind;
      h.tau = 1.3;
      h.epsilon = 0.2;
      h.kl_direction = dir;
      const HamoContext ctx = context_for(g, eval, pi, 0, {}, h);
      const Vec grad = detail::drift_grad_cached(ctx, cand, 0);
      for (int b = 0; b < 2; ++b) {
        Vec hi = cand;
        Vec lo = cand;
        hi(b) += h_step;
        lo(b) -= h_step;
        const double fd =
            (detail::drift_state_cached(ctx, hi, 0) - detail::drift_state_cached(ctx, lo, 0)) / (2.0 * h_step);
        EXPECT_NEAR(grad(b), fd, 1e-5);
      }
    }
  }
}

TEST(CachedDrift, ClipGradientWorkedInstance) {
  const MarkovGame g = signed_bandit();
  const JointPolicy pi = uniform_joint_policy(g);
  const EvalBundle eval = evaluate(g, pi);
  HadfSpec h;
  h.kind = HadfKind::clip_relu;
  h.epsilon = 0.2;
  const HamoContext ctx = context_for(g, eval, pi, 0, {}, h);
  const Vec grad = detail::drift_grad_cached(ctx, row2(0.8, 0.2), 0);
  EXPECT_NEAR(grad(0), 1.0, 1e-12);
  EXPECT_NEAR(grad(1), -1.0, 1e-12);
  // Inside the band the penalty is flat.
  EXPECT_EQ(detail::drift_grad_cached(ctx, row2(0.55, 0.45), 0).norm(), 0.0);
}

TEST(HamoState, ConcaveAlongSegments) {
  // Midpoint value dominates the chord for every drift kind, which is what
  // lets a backtracking ascent with projection keep per-state scores.
  const MarkovGame g = build_prop2_game();
  JointPolicy pi = uniform_joint_policy(g);
  pi.agents[0].table.row(0) << 0.6, 0.4;
  const EvalBundle eval = evaluate(g, pi);
  for (HadfKind kind : {HadfKind::trivial, HadfKind::kl_penalty, HadfKind::clip_relu, HadfKind::squared_l2}) {
    HadfSpec h;
    h.kind = kind;
    h.tau = 1.0;
    const HamoContext ctx = context_for(g, eval, pi, 0, {}, h);
    const Mat a = table2(0.9, 0.1);
    const Mat b = table2(0.2, 0.8);
    const Mat mid = 0.5 * (a + b);
    const double chord = 0.5 * (hamo_state(ctx, a, 0) + hamo_state(ctx, b, 0));
    EXPECT_GE(hamo_state(ctx, mid, 0), chord - 1e-12);
  }
}

TEST(HappoObjective, WorkedInstance) {
  // (0.5, 0.5) -> (0.8, 0.2) with eps 0.2 and advantages (1, -1): the clipped
  // surrogate gives 0.2, which is the 0.6 candidate advantage minus the 0.4
  // penalty.
  const MarkovGame g = signed_bandit();
  const JointPolicy pi = uniform_joint_policy(g);
  const EvalBundle eval = evaluate(g, pi);
  HadfSpec h;
  h.kind = HadfKind::clip_relu;
  h.epsilon = 0.2;
  const HamoContext ctx = context_for(g, eval, pi, 0, {}, h);
  const Mat cand = table2(0.8, 0.2);
  EXPECT_NEAR(happo_objective(ctx, cand, 0), 0.2, 1e-12);
  EXPECT_NEAR(drift_state(h, g, eval, pi, 0, cand.row(0).transpose(), 0), 0.4, 1e-12);
  EXPECT_LT(happo_identity_residual(ctx, cand, 0), 1e-10);
}

TEST(HappoObjective, IdentityHoldsWithPredecessors) {
  const MarkovGame g = build_prop2_game();
  const JointPolicy pi = uniform_joint_policy(g);
  const EvalBundle eval = evaluate(g, pi);
  JointPolicy updated = pi;
  updated.agents[0].table.row(0) << 0.9, 0.1;
  Predecessors preds;
  preds.policy = &updated;
  preds.agents = {0};
  HadfSpec h;
  h.kind = HadfKind::clip_relu;
  h.epsilon = 0.15;
  const HamoContext ctx = context_for(g, eval, pi, 1, preds, h);
  auto rng = make_rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    const std::vector<double> draw = dirichlet_row(rng, 2);
    EXPECT_LT(happo_identity_residual(ctx, table2(draw[0], draw[1]), 0), 1e-10);
  }
}

TEST(HappoObjective, FixedPredecessorTuple) {
  // Conditioning on each predecessor branch recovers the mixture.
  const MarkovGame g = build_prop2_game();
  const JointPolicy pi = uniform_joint_policy(g);
  const EvalBundle eval = evaluate(g, pi);
  JointPolicy updated = pi;
  updated.agents[0].table.row(0) << 0.9, 0.1;
  Predecessors preds;
  preds.policy = &updated;
  preds.agents = {0};
  HadfSpec h;
  h.kind = HadfKind::clip_relu;
  const HamoContext ctx = context_for(g, eval, pi, 1, preds, h);
  const Mat cand = table2(0.7, 0.3);
  const double on_zero = happo_objective(ctx, cand, 0, std::vector<int>{0});
  const double on_one = happo_objective(ctx, cand, 0, std::vector<int>{1});
  EXPECT_NEAR(0.9 * on_zero + 0.1 * on_one, happo_objective(ctx, cand, 0), 1e-13);
  EXPECT_THROW(happo_objective(ctx, cand, 0, std::vector<int>{5}), ValidationError);
}

TEST(HappoObjective, RejectsOffSupportCandidates) {
  const MarkovGame g = build_prop2_game();
  const JointPolicy pi = dirac_joint_policy(g, {{0}, {1}});
  const EvalBundle eval = evaluate(g, pi);
  HadfSpec h;
  h.kind = HadfKind::clip_relu;
  const HamoContext ctx = context_for(g, eval, pi, 0, {}, h);
  EXPECT_THROW(happo_objective(ctx, table2(0.5, 0.5), 0), ValidationError);
}

}  // namespace
}  // namespace haml
