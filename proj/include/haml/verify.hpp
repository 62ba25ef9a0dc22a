#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "haml/baselines.hpp"
#include "haml/engine.hpp"
#include "haml/results.hpp"

// Verification suites: each one binds an analytic claim about the update rule
// to a deterministic sweep with pinned tolerances. A suite reports one line
// per check; the harness treats "every suite passed" as the green light.

namespace haml {

// Sweep sizes. The defaults are the certified settings; smaller values are
// for quick iteration only.
struct VerifyOptions {
  std::optional<int> prop1_n;   // restrict the homogeneity suite to one size
  int lemma1_seeds = 100;
  int monotone_games = 100;
  int monotone_iterations = 100;
  int nash_games = 100;
  int nash_iterations = 500;
  int hadf_directions = 100;
  int happo_instances = 1000;
};

struct SuiteResult {
  std::string suite;
  bool passed = true;
  double seconds = 0.0;
  std::vector<std::string> lines;  // "PASS ..." / "FAIL ..." / indented notes
};

namespace detail {

class SuiteRun {
 public:
  explicit SuiteRun(std::string name) : start_(std::chrono::steady_clock::now()) {
    result_.suite = std::move(name);
  }

  void check(bool ok, const std::string& text) {
    result_.passed = result_.passed && ok;
    result_.lines.push_back(std::string(ok ? "PASS  " : "FAIL  ") + text);
  }

  void note(const std::string& text) { result_.lines.push_back("      " + text); }

  SuiteResult finish() {
    result_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return result_;
  }

 private:
  SuiteResult result_;
  std::chrono::steady_clock::time_point start_;
};

// Small seeded instance for exhaustive sweeps: at most three agents, states,
// and actions per agent, with a discount cycling through {0, 0.5, 0.9}.
inline MarkovGame small_game(std::uint64_t seed) {
  RandomGameSpec spec;
  const std::uint64_t h = splitmix64(seed + 0x5151);
  spec.n_agents = 1 + static_cast<int>(h % 3);
  spec.n_states = 1 + static_cast<int>((h >> 8) % 3);
  spec.action_counts.assign(static_cast<std::size_t>(spec.n_agents), 0);
  for (int i = 0; i < spec.n_agents; ++i)
    spec.action_counts[static_cast<std::size_t>(i)] = 2 + static_cast<int>((h >> (16 + 2 * i)) % 2);
  const double gammas[] = {0.0, 0.5, 0.9};
  spec.gamma = gammas[(h >> 4) % 3];
  return random_game(spec, derive_seed(seed, 0xA0));
}

// Interior policy: half random, half uniform, so every row entry is at least
// 1 / (2 * actions) and simplex-tangent finite-difference probes stay valid.
inline JointPolicy interior_policy(const MarkovGame& g, std::uint64_t seed) {
  JointPolicy pi = random_joint_policy(g, seed);
  for (int i = 0; i < g.n_agents; ++i) {
    Mat& table = pi.agents[static_cast<std::size_t>(i)].table;
    const double a = g.action_counts[static_cast<std::size_t>(i)];
    table = 0.5 * table + Mat::Constant(table.rows(), table.cols(), 0.5 / a);
  }
  return pi;
}

// Sum-zero direction with sup norm 1/2, so old +/- step * dir stays inside
// every interior row for any step below the minimum entry.
inline Vec simplex_direction(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vec u(k);
  for (int i = 0; i < k; ++i) u(i) = unit(rng);
  u.array() -= u.mean();
  const double sup = u.cwiseAbs().maxCoeff();
  if (sup < 1e-12) {
    u.setZero();
    u(0) = 0.5;
    u(k - 1) = -0.5;
    return u;
  }
  return 0.5 * u / sup;
}

// Single-agent two-action bandit with rewards (+1, -1): under the uniform
// policy the advantage row is exactly (+1, -1).
inline MarkovGame signed_bandit() {
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

inline EngineConfig greedy_config() {
  EngineConfig cfg;
  cfg.hadf = {HadfSpec{}};
  cfg.neighborhood = {NeighborhoodSpec{}};
  return cfg;
}

// The six drift / trust-region / solver combinations the improvement theorem
// is certified over.
inline std::vector<EngineConfig> monotone_configs() {
  std::vector<EngineConfig> out;
  out.push_back(greedy_config());
  {
    EngineConfig cfg = greedy_config();
    cfg.hadf[0].kind = HadfKind::kl_penalty;
    cfg.hadf[0].tau = 0.5;
    out.push_back(cfg);
  }
  {
    EngineConfig cfg = greedy_config();
    cfg.hadf[0].kind = HadfKind::kl_penalty;
    cfg.hadf[0].tau = 0.5;
    cfg.neighborhood[0].kind = NeighborhoodKind::per_state_kl;
    cfg.neighborhood[0].delta = 0.05;
    cfg.solver.kind = SolverKind::exp_gradient;
    out.push_back(cfg);
  }
  {
    EngineConfig cfg = greedy_config();
    cfg.hadf[0].kind = HadfKind::squared_l2;
    cfg.hadf[0].tau = 1.0;
    cfg.neighborhood[0].kind = NeighborhoodKind::per_state_tv;
    cfg.neighborhood[0].delta = 0.1;
    cfg.solver.kind = SolverKind::exp_gradient;
    out.push_back(cfg);
  }
  {
    EngineConfig cfg = greedy_config();
    cfg.hadf[0].kind = HadfKind::clip_relu;
    cfg.hadf[0].epsilon = 0.2;
    cfg.solver.kind = SolverKind::exp_gradient;
    out.push_back(cfg);
  }
  {
    EngineConfig cfg = greedy_config();
    cfg.hadf[0].kind = HadfKind::kl_penalty;
    cfg.hadf[0].tau = 0.7;
    cfg.hadf[0].kl_direction = KlDirection::old_to_new;
    cfg.neighborhood[0].kind = NeighborhoodKind::expected_kl;
    cfg.neighborhood[0].delta = 0.05;
    cfg.solver.kind = SolverKind::exp_gradient;
    out.push_back(cfg);
  }
  return out;
}

inline std::string csv_dump(const MarkovGame& g, const std::vector<IterationRecord>& records) {
  std::string text = result_csv_header(g.n_states, g.n_agents) + "\n";
  for (const auto& rec : records) text += result_csv_row(rec) + "\n";
  return text;
}

}  // namespace detail

// ---- Homogeneity trap ---------------------------------------------------------

// A policy shared by all n agents earns at most 2/2^n of the heterogeneous
// optimum on the two-pattern coordination game, while a greedy sweep from a
// lightly biased heterogeneous start reaches the optimum outright.
inline SuiteResult verify_prop1(const VerifyOptions& opts = {}) {
  detail::SuiteRun run("prop1");
  std::vector<int> sizes = opts.prop1_n.has_value() ? std::vector<int>{*opts.prop1_n}
                                                    : std::vector<int>{2, 4, 6};
  for (int n : sizes) {
    const MarkovGame g = build_prop1_game(n);
    const SharedOptimum shared = shared_policy_optimum(g);
    const BruteForceResult brute = brute_force_optimum(g);
    const double expected = std::pow(2.0, 1 - n);  // 2 / 2^n
    const double ratio = shared.j_star / brute.j;
    run.check(std::abs(brute.j - 1.0) <= 1e-12,
              "n=" + std::to_string(n) + ": brute-force optimum J* = " + format_real(brute.j) + " (expected 1)");
    run.check(std::abs(ratio - expected) <= 1e-9,
              "n=" + std::to_string(n) + ": shared/heterogeneous ratio " + format_real(ratio) + " expected " +
                  format_real(expected) + " (2/2^" + std::to_string(n) + "), |diff| <= 1e-9");

    // Heterogeneous escape: bias each half toward its pattern role; one
    // greedy sweep locks in a rewarded pattern.
    JointPolicy pi0 = uniform_joint_policy(g);
    for (int i = 0; i < n; ++i) {
      if (i < n / 2)
        pi0.agents[static_cast<std::size_t>(i)].table.row(0) << 0.6, 0.4;
      else
        pi0.agents[static_cast<std::size_t>(i)].table.row(0) << 0.4, 0.6;
    }
    EngineConfig cfg = detail::greedy_config();
    cfg.permutations.kind = PermKind::fixed_cycle;
    const auto [pi1, rec] = haml_step(g, pi0, cfg, 0, 0);
    run.check(rec.j_after >= 1.0 - 1e-9,
              "n=" + std::to_string(n) + ": heterogeneous greedy sweep reaches J = " + format_real(rec.j_after));
  }
  return run.finish();
}

// ---- Heterogeneity trap ---------------------------------------------------------

// From the shared lean toward action 0, simultaneous per-agent greedy updates
// land on the worst joint action while one sequential sweep finds the best.
inline SuiteResult verify_prop2(const VerifyOptions& = {}) {
  detail::SuiteRun run("prop2");
  const MarkovGame g = build_prop2_game();
  JointPolicy pi0 = uniform_joint_policy(g);
  pi0.agents[0].table.row(0) << 0.7, 0.3;
  pi0.agents[1].table.row(0) << 0.7, 0.3;
  const double j0 = evaluate(g, pi0).j;
  run.note("shared start pi_i(0) = 0.7, J = " + format_real(j0));

  const JointPolicy naive = naive_simultaneous_step(g, pi0);
  const double j_naive = evaluate(g, naive).j;
  run.check(j_naive == -1.0, "naive simultaneous step: J = " + format_real(j_naive) + " (expected -1 exactly)");

  EngineConfig cfg = detail::greedy_config();
  cfg.permutations.kind = PermKind::fixed_cycle;
  const auto [pi1, rec] = haml_step(g, pi0, cfg, 0, 0);
  run.check(std::abs(rec.j_after - 2.0) <= 1e-12,
            "greedy sequential sweep: J = " + format_real(rec.j_after) + " (expected 2)");
  run.check(rec.nash_gap_after <= 1e-12, "sweep endpoint gap = " + format_real(rec.nash_gap_after));
  run.check(j_naive < j0 && rec.j_after > j0,
            "paired outcome from one start: naive J = " + format_real(j_naive) + " and haml J = " +
                format_real(rec.j_after));
  return run.finish();
}

// ---- Advantage decomposition ----------------------------------------------------

// The block advantage of any ordered agent set equals the sum of per-agent
// advantages conditioned on the predecessors' actions, exhaustively over
// states, joint actions, and orderings.
inline SuiteResult verify_lemma1(const VerifyOptions& opts = {}) {
  detail::SuiteRun run("lemma1");
  double max_residual = 0.0;
  long long checks = 0;
  for (int seed = 0; seed < opts.lemma1_seeds; ++seed) {
    const MarkovGame g = detail::small_game(static_cast<std::uint64_t>(seed));
    const JointPolicy pi = random_joint_policy(g, derive_seed(static_cast<std::uint64_t>(seed), 1));
    const EvalBundle eval = evaluate(g, pi);
    const auto joints = enumerate_joint_actions(g.action_counts);
    std::vector<int> order(static_cast<std::size_t>(g.n_agents));
    for (int i = 0; i < g.n_agents; ++i) order[static_cast<std::size_t>(i)] = i;
    for (int s = 0; s < g.n_states; ++s)
      for (const auto& tuple : joints) {
        std::vector<int> perm = order;
        do {
          std::vector<int> actions(perm.size());
          for (std::size_t k = 0; k < perm.size(); ++k)
            actions[k] = tuple[static_cast<std::size_t>(perm[k])];
          max_residual = std::max(max_residual, check_advantage_decomposition(g, eval, pi, s, perm, actions));
          ++checks;
        } while (std::next_permutation(perm.begin(), perm.end()));
      }
  }
  run.check(max_residual <= 1e-10, "max residual " + format_real(max_residual) + " over " +
                                       std::to_string(opts.lemma1_seeds) + " games, " + std::to_string(checks) +
                                       " (state, joint action, ordering) triples, tolerance 1e-10");
  return run.finish();
}

// ---- Monotone improvement --------------------------------------------------------

// Every sweep of every certified configuration leaves the return and every
// state value no worse, up to 1e-9, from random games and starts.
inline SuiteResult verify_monotone(const VerifyOptions& opts = {}) {
  detail::SuiteRun run("monotone");
  const std::vector<EngineConfig> configs = detail::monotone_configs();
  double min_j_delta = std::numeric_limits<double>::infinity();
  double min_v_delta = std::numeric_limits<double>::infinity();
  long long sweeps = 0;
  for (int i = 0; i < opts.monotone_games; ++i) {
    RandomGameSpec spec;
    spec.n_agents = 2 + (i % 2);
    spec.n_states = 1 + ((i / 2) % 2);
    const double gammas[] = {0.0, 0.5, 0.9};
    spec.gamma = gammas[i % 3];
    const MarkovGame g = random_game(spec, derive_seed(0xB0, static_cast<std::uint64_t>(i)));
    const JointPolicy pi0 = random_joint_policy(g, derive_seed(0xB1, static_cast<std::uint64_t>(i)));
    for (std::size_t c = 0; c < configs.size(); ++c) {
      JointPolicy pi = pi0;
      for (int k = 0; k < opts.monotone_iterations; ++k) {
        auto [next, rec] = haml_step(g, pi, configs[c], static_cast<std::uint64_t>(i), k);
        min_j_delta = std::min(min_j_delta, rec.j_after - rec.j_before);
        min_v_delta = std::min(min_v_delta, (rec.v_after - rec.v_before).minCoeff());
        pi = std::move(next);
        ++sweeps;
      }
    }
  }
  run.check(min_j_delta >= -1e-9, "min J increment " + format_real(min_j_delta) + " over " +
                                      std::to_string(sweeps) + " sweeps (" + std::to_string(opts.monotone_games) +
                                      " games x " + std::to_string(opts.monotone_iterations) + " iterations x " +
                                      std::to_string(configs.size()) + " configurations), tolerance -1e-9");
  run.check(min_v_delta >= -1e-9,
            "min per-state V increment " + format_real(min_v_delta) + " over the same sweeps, tolerance -1e-9");
  return run.finish();
}

// ---- Equilibrium convergence -------------------------------------------------------

// The greedy exact solver drives the equilibrium gap below 1e-6 within the
// iteration budget on nearly all random two-agent games, and an exact
// equilibrium is a fixed point of the sweep. Convergence guarantees are
// asymptotic; the iteration budget makes this a finite surrogate, so a small
// failure quota is tolerated and failures are reported by seed.
inline SuiteResult verify_nash(const VerifyOptions& opts = {}) {
  detail::SuiteRun run("nash");
  EngineConfig cfg = detail::greedy_config();
  int successes = 0;
  int fixed_point_checks = 0;
  int fixed_point_violations = 0;
  std::string failures;
  for (int i = 0; i < opts.nash_games; ++i) {
    RandomGameSpec spec;
    spec.n_agents = 2;
    spec.n_states = 1 + (i % 3);
    spec.action_counts = {2 + (i % 2), 2 + ((i / 2) % 2)};
    const double gammas[] = {0.0, 0.5, 0.9};
    spec.gamma = gammas[(i / 3) % 3];
    const MarkovGame g = random_game(spec, derive_seed(0xC0, static_cast<std::uint64_t>(i)));
    JointPolicy pi = random_joint_policy(g, derive_seed(0xC1, static_cast<std::uint64_t>(i)));
    double gap = nash_gap(g, pi);
    for (int k = 0; k < opts.nash_iterations && gap > 1e-6; ++k) {
      auto [next, rec] = haml_step(g, pi, cfg, static_cast<std::uint64_t>(i), k);
      pi = std::move(next);
      gap = rec.nash_gap_after;
    }
    if (gap <= 1e-6) {
      ++successes;
    } else {
      failures += (failures.empty() ? "" : ", ") + std::to_string(i);
    }
    if (gap <= 1e-12) {
      // An exact equilibrium must be left untouched by a further sweep.
      ++fixed_point_checks;
      const auto [next, rec] = haml_step(g, pi, cfg, static_cast<std::uint64_t>(i), opts.nash_iterations);
      for (int a = 0; a < g.n_agents; ++a) {
        const Mat diff = next.agents[static_cast<std::size_t>(a)].table - pi.agents[static_cast<std::size_t>(a)].table;
        if (diff.cwiseAbs().maxCoeff() != 0.0) ++fixed_point_violations;
      }
    }
  }
  const int required = (opts.nash_games * 95 + 99) / 100;
  run.check(successes >= required, std::to_string(successes) + "/" + std::to_string(opts.nash_games) +
                                       " games reached gap <= 1e-6 within " + std::to_string(opts.nash_iterations) +
                                       " iterations (required " + std::to_string(required) + ")");
  run.note(failures.empty() ? "failure seeds: none" : "failure seeds: " + failures);
  run.check(fixed_point_violations == 0, "fixed point at gap <= 1e-12: " + std::to_string(fixed_point_checks) +
                                             " equilibria re-swept, " + std::to_string(fixed_point_violations) +
                                             " policies changed");
  return run.finish();
}

// ---- Drift functional axioms ------------------------------------------------------

// Every drift kind is zero at the current row (exactly), non-negative
// everywhere, and flat at the current row to first order; the clipped kind
// vanishes identically while all ratios stay inside the clip band.
inline SuiteResult verify_hadf(const VerifyOptions& opts = {}) {
  detail::SuiteRun run("hadf");
  struct Config {
    const char* label;
    HadfSpec spec;
  };
  std::vector<Config> configs;
  configs.push_back({"trivial", HadfSpec{}});
  {
    HadfSpec h;
    h.kind = HadfKind::kl_penalty;
    configs.push_back({"kl_penalty(new_to_old)", h});
    h.kl_direction = KlDirection::old_to_new;
    configs.push_back({"kl_penalty(old_to_new)", h});
  }
  {
    HadfSpec h;
    h.kind = HadfKind::clip_relu;
    h.epsilon = 0.2;
    configs.push_back({"clip_relu", h});
  }
  {
    HadfSpec h;
    h.kind = HadfKind::squared_l2;
    configs.push_back({"squared_l2", h});
  }

  constexpr int kGames = 4;
  std::vector<MarkovGame> games;
  std::vector<JointPolicy> policies;
  std::vector<EvalBundle> evals;
  for (int i = 0; i < kGames; ++i) {
    RandomGameSpec spec;
    spec.n_agents = 2;
    spec.n_states = 2;
    spec.action_counts = {2 + (i % 2), 2 + ((i / 2) % 2)};
    spec.gamma = (i % 2 == 0) ? 0.5 : 0.9;
    games.push_back(random_game(spec, derive_seed(0xD0, static_cast<std::uint64_t>(i))));
    policies.push_back(detail::interior_policy(games.back(), derive_seed(0xD1, static_cast<std::uint64_t>(i))));
    evals.push_back(evaluate(games.back(), policies.back()));
  }

  for (std::size_t ci = 0; ci < configs.size(); ++ci) {
    const auto& config = configs[ci];
    bool zero_at_old = true;
    double min_drift = std::numeric_limits<double>::infinity();
    double max_gateaux = 0.0;
    auto rng = make_rng(derive_seed(0xD2, static_cast<std::uint64_t>(ci)));
    for (int d = 0; d < opts.hadf_directions; ++d) {
      const int gi = d % kGames;
      const MarkovGame& g = games[static_cast<std::size_t>(gi)];
      const JointPolicy& pi = policies[static_cast<std::size_t>(gi)];
      const EvalBundle& eval = evals[static_cast<std::size_t>(gi)];
      const int agent = d % g.n_agents;
      const int s = d % g.n_states;
      const int a = g.action_counts[static_cast<std::size_t>(agent)];

      // Alternate between no predecessors and the other agent pre-updated.
      JointPolicy updated = pi;
      Predecessors preds;
      preds.policy = &updated;
      if (d % 2 == 1) {
        const int other = 1 - agent;
        updated.agents[static_cast<std::size_t>(other)].table =
            detail::interior_policy(g, derive_seed(0xD3, static_cast<std::uint64_t>(d)))
                .agents[static_cast<std::size_t>(other)]
                .table;
        preds.agents = {other};
      }

      const Vec old_row = pi.agents[static_cast<std::size_t>(agent)].table.row(s).transpose();
      if (drift_state(config.spec, g, eval, pi, agent, old_row, s, preds) != 0.0) zero_at_old = false;

      const Vec candidate =
          Eigen::Map<const Vec>(dirichlet_row(rng, a).data(), a);
      min_drift = std::min(min_drift, drift_state(config.spec, g, eval, pi, agent, candidate, s, preds));

      const Vec direction = detail::simplex_direction(rng, a);
      max_gateaux = std::max(
          max_gateaux, gateaux_residual(config.spec, g, eval, pi, agent, s, direction, 1e-5, preds));
    }
    const std::string label(config.label);
    run.check(zero_at_old, label + ": drift at the current row is 0 exactly, " +
                               std::to_string(opts.hadf_directions) + " rows");
    run.check(min_drift >= 0.0, label + ": min drift over random candidates " + format_real(min_drift) + " (>= 0)");
    run.check(max_gateaux <= 1e-4, label + ": max directional-derivative residual " + format_real(max_gateaux) +
                                       " at step 1e-5 over " + std::to_string(opts.hadf_directions) +
                                       " directions, tolerance 1e-4");
  }

  // Candidates whose ratios all stay inside (1 - eps, 1 + eps) incur exactly
  // zero clipped drift.
  HadfSpec clip;
  clip.kind = HadfKind::clip_relu;
  clip.epsilon = 0.2;
  bool in_band_zero = true;
  auto rng = make_rng(derive_seed(0xD4, 0));
  constexpr int kInBand = 50;
  for (int d = 0; d < kInBand; ++d) {
    const int gi = d % kGames;
    const MarkovGame& g = games[static_cast<std::size_t>(gi)];
    const JointPolicy& pi = policies[static_cast<std::size_t>(gi)];
    const int agent = d % g.n_agents;
    const int s = d % g.n_states;
    const Vec old_row = pi.agents[static_cast<std::size_t>(agent)].table.row(s).transpose();
    const Vec direction = detail::simplex_direction(rng, static_cast<int>(old_row.size()));
    double limit = std::numeric_limits<double>::infinity();
    for (Eigen::Index b = 0; b < old_row.size(); ++b)
      if (direction(b) != 0.0) limit = std::min(limit, clip.epsilon * 0.5 * old_row(b) / std::abs(direction(b)));
    const Vec candidate = old_row + limit * direction;
    if (drift_state(clip, games[static_cast<std::size_t>(gi)], evals[static_cast<std::size_t>(gi)], pi, agent,
                    candidate, s) != 0.0)
      in_band_zero = false;
  }
  run.check(in_band_zero,
            "clip_relu: drift is 0 exactly for " + std::to_string(kInBand) + " candidates inside the clip band");
  return run.finish();
}

// ---- Clipped-surrogate identity ----------------------------------------------------

// The clipped-ratio surrogate equals the candidate's expected block advantage
// minus the clipped drift, on a pinned worked instance and across random
// games, policies, candidates, predecessors, and clip radii.
inline SuiteResult verify_happo(const VerifyOptions& opts = {}) {
  detail::SuiteRun run("happo-identity");

  // Worked instance: uniform two-action bandit with advantages (+1, -1),
  // candidate (0.8, 0.2), clip radius 0.2. Both sides evaluate to 0.2 and the
  // clipped drift to 0.4.
  {
    const MarkovGame g = detail::signed_bandit();
    const JointPolicy pi = uniform_joint_policy(g);
    const EvalBundle eval = evaluate(g, pi);
    HadfSpec clip;
    clip.kind = HadfKind::clip_relu;
    clip.epsilon = 0.2;
    const Vec weight = eval.rho_normalized();
    const HamoContext ctx = make_hamo_context(g, eval, pi, 0, Predecessors{}, clip, weight, weight);
    Mat cand(1, 2);
    cand << 0.8, 0.2;
    const double objective = happo_objective(ctx, cand, 0);
    const double drift = drift_state(clip, g, eval, pi, 0, cand.row(0).transpose(), 0);
    run.check(std::abs(objective - 0.2) <= 1e-12,
              "worked instance: clipped surrogate = " + format_real(objective) + " (expected 0.2)");
    run.check(std::abs(drift - 0.4) <= 1e-12,
              "worked instance: clipped drift = " + format_real(drift) + " (expected 0.4)");
    run.check(happo_identity_residual(ctx, cand, 0) <= 1e-10,
              "worked instance: identity residual " + format_real(happo_identity_residual(ctx, cand, 0)));
  }

  double max_residual = 0.0;
  auto rng = make_rng(derive_seed(0xE0, 0));
  std::uniform_real_distribution<double> eps_draw(0.05, 0.45);
  for (int i = 0; i < opts.happo_instances; ++i) {
    RandomGameSpec spec;
    spec.n_agents = 2;
    spec.n_states = 1 + (i % 2);
    spec.action_counts = {2 + (i % 2), 2 + ((i / 2) % 2)};
    const double gammas[] = {0.0, 0.5, 0.9};
    spec.gamma = gammas[i % 3];
    const MarkovGame g = random_game(spec, derive_seed(0xE1, static_cast<std::uint64_t>(i)));
    const JointPolicy pi = detail::interior_policy(g, derive_seed(0xE2, static_cast<std::uint64_t>(i)));
    const EvalBundle eval = evaluate(g, pi);
    const int agent = i % 2;

    JointPolicy updated = pi;
    Predecessors preds;
    preds.policy = &updated;
    if (i % 2 == 1) {
      const int other = 1 - agent;
      updated.agents[static_cast<std::size_t>(other)].table =
          detail::interior_policy(g, derive_seed(0xE3, static_cast<std::uint64_t>(i)))
              .agents[static_cast<std::size_t>(other)]
              .table;
      preds.agents = {other};
    }

    HadfSpec clip;
    clip.kind = HadfKind::clip_relu;
    clip.epsilon = eps_draw(rng);
    const Vec weight = eval.rho_normalized();
    const HamoContext ctx = make_hamo_context(g, eval, pi, agent, preds, clip, weight, weight);

    const int a = g.action_counts[static_cast<std::size_t>(agent)];
    Mat cand(g.n_states, a);
    for (int s = 0; s < g.n_states; ++s) {
      const auto row = dirichlet_row(rng, a);
      for (int b = 0; b < a; ++b) cand(s, b) = row[static_cast<std::size_t>(b)];
    }
    for (int s = 0; s < g.n_states; ++s)
      max_residual = std::max(max_residual, happo_identity_residual(ctx, cand, s));
  }
  run.check(max_residual <= 1e-10, "max identity residual " + format_real(max_residual) + " over " +
                                       std::to_string(opts.happo_instances) + " random instances, tolerance 1e-10");
  return run.finish();
}

// ---- Sequential policy-gradient surrogate ---------------------------------------

// The enumerated surrogate's analytic logit gradient matches central finite
// differences, and the sampled estimator, enumerated over every length-1
// trajectory of a discount-free game, reproduces the enumerated surrogate to
// machine precision.
inline SuiteResult verify_haa2c(const VerifyOptions& = {}) {
  detail::SuiteRun run("haa2c");

  constexpr int kGradientGames = 25;
  double max_grad_err = 0.0;
  auto rng = make_rng(derive_seed(0xF0, 0));
  std::uniform_real_distribution<double> logit_draw(-1.0, 1.0);
  for (int i = 0; i < kGradientGames; ++i) {
    RandomGameSpec spec;
    spec.n_agents = 2;
    spec.n_states = 2;
    spec.action_counts = {2 + (i % 2), 2 + ((i / 2) % 2)};
    const double gammas[] = {0.0, 0.5, 0.9};
    spec.gamma = gammas[i % 3];
    const MarkovGame g = random_game(spec, derive_seed(0xF1, static_cast<std::uint64_t>(i)));
    SoftmaxPolicyParams params = zero_logits(g);
    for (auto& logits : params.logits)
      for (Eigen::Index r = 0; r < logits.rows(); ++r)
        for (Eigen::Index c = 0; c < logits.cols(); ++c) logits(r, c) = logit_draw(rng);
    const JointPolicy pi_old = softmax_policy(params);
    const EvalBundle eval = evaluate(g, pi_old);
    const auto joints = enumerate_joint_actions(g.action_counts);
    Mat m(g.n_states, g.joint_actions());
    for (int s = 0; s < g.n_states; ++s)
      for (int ja = 0; ja < g.joint_actions(); ++ja) m(s, ja) = eval.q(s, ja) - eval.v(s);

    for (int agent = 0; agent < g.n_agents; ++agent) {
      Mat logits = params.logits[static_cast<std::size_t>(agent)];
      for (Eigen::Index r = 0; r < logits.rows(); ++r)
        for (Eigen::Index c = 0; c < logits.cols(); ++c) logits(r, c) += 0.3 * logit_draw(rng);
      const Mat table = softmax_policy_table(logits);
      const Mat grad = detail::haa2c_gradient_exact(g, eval.rho_normalized(), pi_old, joints, m, agent, table);
      const double h = 1e-6;
      for (Eigen::Index r = 0; r < logits.rows(); ++r)
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
          Mat hi = logits;
          Mat lo = logits;
          hi(r, c) += h;
          lo(r, c) -= h;
          const double fd = (detail::haa2c_objective_exact(g, eval.rho_normalized(), pi_old, joints, m, agent,
                                                           softmax_policy_table(hi)) -
                             detail::haa2c_objective_exact(g, eval.rho_normalized(), pi_old, joints, m, agent,
                                                           softmax_policy_table(lo))) /
                            (2.0 * h);
          max_grad_err = std::max(max_grad_err, std::abs(grad(r, c) - fd) / std::max(1.0, std::abs(fd)));
        }
    }
  }
  run.check(max_grad_err <= 1e-6, "enumerated-mode gradient vs central differences: max relative error " +
                                      format_real(max_grad_err) + " over " + std::to_string(kGradientGames) +
                                      " two-state games, tolerance 1e-6");

  constexpr int kUnbiasedGames = 25;
  double max_bias = 0.0;
  for (int i = 0; i < kUnbiasedGames; ++i) {
    RandomGameSpec spec;
    spec.n_agents = 2;
    spec.n_states = 1 + (i % 3);
    spec.action_counts = {2 + (i % 2), 2};
    spec.gamma = 0.0;  // one-step horizon makes the support enumerable
    const MarkovGame g = random_game(spec, derive_seed(0xF2, static_cast<std::uint64_t>(i)));
    const JointPolicy pi_old = detail::interior_policy(g, derive_seed(0xF3, static_cast<std::uint64_t>(i)));
    const EvalBundle eval = evaluate(g, pi_old);
    const int agent = i % 2;
    const int other = 1 - agent;
    JointPolicy pi_new = pi_old;
    pi_new.agents[static_cast<std::size_t>(other)].table =
        detail::interior_policy(g, derive_seed(0xF4, static_cast<std::uint64_t>(i)))
            .agents[static_cast<std::size_t>(other)]
            .table;
    const std::vector<int> preds = {other};

    const int a = g.action_counts[static_cast<std::size_t>(agent)];
    Mat cand(g.n_states, a);
    for (int s = 0; s < g.n_states; ++s) {
      const auto row = dirichlet_row(rng, a);
      for (int b = 0; b < a; ++b) cand(s, b) = row[static_cast<std::size_t>(b)];
    }

    // Weighted support of every length-1 trajectory.
    const auto joints = enumerate_joint_actions(g.action_counts);
    std::vector<Trajectory> support;
    std::vector<double> weights;
    std::vector<std::vector<double>> advantages;
    const double lambdas[] = {0.0, 0.37, 1.0};
    const double lambda = lambdas[i % 3];
    for (int s = 0; s < g.n_states; ++s)
      for (int ja = 0; ja < g.joint_actions(); ++ja) {
        const auto& tuple = joints[static_cast<std::size_t>(ja)];
        const double p = g.initial(s) * pi_old.joint_prob(s, tuple);
        if (p == 0.0) continue;
        Trajectory traj;
        traj.steps = {{s, tuple, ja, g.rewards(s, ja), 0}};
        weights.push_back(p);
        advantages.push_back(gae_advantages(g, traj, eval.v, lambda));
        support.push_back(std::move(traj));
      }
    const double sampled = haa2c_objective_mc(g, support, advantages, pi_old, pi_new, preds, agent, cand, &weights);
    const double exact = haa2c_surrogate(g, eval, pi_old, pi_new, preds, agent, cand);
    max_bias = std::max(max_bias, std::abs(sampled - exact));
  }
  run.check(max_bias <= 1e-12, "sampled estimator vs enumerated surrogate on discount-free games: max |diff| " +
                                   format_real(max_bias) + " over " + std::to_string(kUnbiasedGames) +
                                   " instances, tolerance 1e-12");
  return run.finish();
}

// ---- Determinism ------------------------------------------------------------------

// Two runs from identical inputs serialize to identical bytes, and changing
// the seed changes the drawn orderings.
inline SuiteResult verify_determinism(const VerifyOptions& = {}) {
  detail::SuiteRun run("determinism");
  {
    const MarkovGame g = build_prop2_game();
    JointPolicy pi0 = uniform_joint_policy(g);
    pi0.agents[0].table.row(0) << 0.7, 0.3;
    EngineConfig cfg = detail::greedy_config();
    cfg.hadf[0].kind = HadfKind::kl_penalty;
    cfg.hadf[0].tau = 0.5;
    cfg.neighborhood[0].kind = NeighborhoodKind::per_state_kl;
    cfg.neighborhood[0].delta = 0.1;
    cfg.solver.kind = SolverKind::exp_gradient;
    cfg.iterations = 12;
    const std::string first = detail::csv_dump(g, haml::run(g, pi0, cfg, 11).records);
    const std::string second = detail::csv_dump(g, haml::run(g, pi0, cfg, 11).records);
    run.check(first == second, "penalized ascent on the miscoordination game, 12 iterations, seed 11: " +
                                   std::to_string(first.size()) + " CSV bytes identical across two runs");
  }
  {
    RandomGameSpec spec;
    spec.n_agents = 3;
    spec.n_states = 2;
    const MarkovGame g = random_game(spec, 77);
    const JointPolicy pi0 = random_joint_policy(g, 78);
    EngineConfig cfg = detail::greedy_config();
    cfg.iterations = 8;
    const std::string first = detail::csv_dump(g, haml::run(g, pi0, cfg, 5).records);
    const std::string second = detail::csv_dump(g, haml::run(g, pi0, cfg, 5).records);
    run.check(first == second, "greedy sweeps on a random three-agent game, 8 iterations, seed 5: " +
                                   std::to_string(first.size()) + " CSV bytes identical across two runs");
    const std::string reseeded = detail::csv_dump(g, haml::run(g, pi0, cfg, 6).records);
    run.check(reseeded != first, "seed 6 draws a different ordering sequence than seed 5");
  }
  return run.finish();
}

// ---- Registry ---------------------------------------------------------------------

inline const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names = {"prop1",  "prop2",          "lemma1", "monotone",   "nash",
                                                 "hadf",   "happo-identity", "haa2c",  "determinism"};
  return names;
}

inline SuiteResult run_verify_suite(const std::string& name, const VerifyOptions& opts = {}) {
  if (name == "prop1") return verify_prop1(opts);
  if (name == "prop2") return verify_prop2(opts);
  if (name == "lemma1") return verify_lemma1(opts);
  if (name == "monotone") return verify_monotone(opts);
  if (name == "nash") return verify_nash(opts);
  if (name == "hadf") return verify_hadf(opts);
  if (name == "happo-identity") return verify_happo(opts);
  if (name == "haa2c") return verify_haa2c(opts);
  if (name == "determinism") return verify_determinism(opts);
  std::string valid;
  for (const auto& n : verify_suite_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("suite: unknown suite '" + name + "' (valid: " + valid + ")");
}

}  // namespace haml
