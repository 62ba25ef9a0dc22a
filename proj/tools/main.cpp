#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "haml/config.hpp"
#include "haml/results.hpp"
#include "haml/verify.hpp"

namespace {

void info(const std::string& message) {
  if (haml::log_level() != haml::LogLevel::quiet) std::fprintf(stderr, "%s\n", message.c_str());
}

void debug(const std::string& message) {
  if (haml::log_level() == haml::LogLevel::debug) std::fprintf(stderr, "%s\n", message.c_str());
}

std::string resolve_output(const std::string& out_dir, const std::string& name) {
  const std::filesystem::path p(name);
  if (p.is_absolute()) return name;
  return (std::filesystem::path(out_dir) / p).string();
}

haml::IterationRecord snapshot_record(const haml::MarkovGame& g, int k, const std::vector<int>& permutation,
                                      double j_before, const haml::Vec& v_before, const haml::EvalBundle& after) {
  haml::IterationRecord rec;
  rec.k = k;
  rec.permutation = permutation;
  rec.j_before = j_before;
  rec.j_after = after.j;
  rec.v_before = v_before;
  rec.v_after = after.v;
  rec.agent_hamo.assign(static_cast<std::size_t>(g.n_agents), 0.0);
  rec.agent_drift.assign(static_cast<std::size_t>(g.n_agents), 0.0);
  rec.agent_fallbacks.assign(static_cast<std::size_t>(g.n_agents), 0);
  return rec;
}

std::vector<int> identity_order(int n_agents) {
  std::vector<int> order(static_cast<std::size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i) order[static_cast<std::size_t>(i)] = i;
  return order;
}

// ---- run --------------------------------------------------------------------------

struct RunArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
};

std::vector<haml::IterationRecord> run_haml_records(const haml::MarkovGame& g, const haml::JointPolicy& pi0,
                                                    const haml::ExperimentConfig& cfg, std::uint64_t master) {
  const haml::RunResult result = haml::run(g, pi0, cfg.engine, haml::derive_seed(master, haml::kSeedStreamEngine));
  return result.records;
}

std::vector<haml::IterationRecord> run_naive_records(const haml::MarkovGame& g, const haml::JointPolicy& pi0,
                                                     const haml::ExperimentConfig& cfg) {
  std::vector<haml::IterationRecord> records;
  haml::JointPolicy pi = pi0;
  haml::EvalBundle eval = haml::evaluate(g, pi);
  for (int k = 0; k < cfg.iterations; ++k) {
    haml::JointPolicy next = haml::naive_simultaneous_step(g, pi);
    const haml::EvalBundle after = haml::evaluate(g, next);
    haml::IterationRecord rec = snapshot_record(g, k, identity_order(g.n_agents), eval.j, eval.v, after);
    rec.nash_gap_after = haml::nash_gap(g, next);
    records.push_back(std::move(rec));
    pi = std::move(next);
    eval = after;
    if (records.back().nash_gap_after <= cfg.engine.stop_gap) break;
  }
  return records;
}

std::vector<haml::IterationRecord> run_haa2c_records(const haml::MarkovGame& g, const haml::JointPolicy& pi0,
                                                     const haml::ExperimentConfig& cfg, std::uint64_t master) {
  haml::SoftmaxPolicyParams params = haml::zero_logits(g);
  for (int i = 0; i < g.n_agents; ++i) {
    const haml::Mat& table = pi0.agents[static_cast<std::size_t>(i)].table;
    if ((table.array() <= 0.0).any())
      throw haml::ConfigError("initial_policy: the policy-gradient baseline needs a strictly positive start");
    params.logits[static_cast<std::size_t>(i)] = table.array().log().matrix();
  }
  haml::Haa2cConfig hcfg = cfg.haa2c;
  hcfg.seed = haml::derive_seed(master, haml::kSeedStreamHaa2c);

  std::vector<haml::IterationRecord> records;
  haml::EvalBundle eval = haml::evaluate(g, pi0);
  for (int k = 0; k < cfg.iterations; ++k) {
    const haml::Haa2cReport report = haml::haa2c_step(g, params, hcfg, k);
    const haml::EvalBundle after = haml::evaluate(g, haml::softmax_policy(params));
    haml::IterationRecord rec = snapshot_record(g, k, report.permutation, report.j_before, eval.v, after);
    rec.nash_gap_after = haml::nash_gap(g, haml::softmax_policy(params));
    records.push_back(std::move(rec));
    eval = after;
    debug("iteration " + std::to_string(k) + ": J = " + haml::format_real(after.j));
    if (records.back().nash_gap_after <= cfg.engine.stop_gap) break;
  }
  return records;
}

std::vector<haml::IterationRecord> run_shared_optimum_records(const haml::MarkovGame& g) {
  const haml::SharedOptimum shared = haml::shared_policy_optimum(g);
  haml::JointPolicy pi = haml::uniform_joint_policy(g);
  for (int i = 0; i < g.n_agents; ++i)
    for (int s = 0; s < g.n_states; ++s)
      pi.agents[static_cast<std::size_t>(i)].table.row(s) << shared.p_star, 1.0 - shared.p_star;
  const haml::EvalBundle eval = haml::evaluate(g, pi);
  haml::IterationRecord rec = snapshot_record(g, 0, identity_order(g.n_agents), eval.j, eval.v, eval);
  rec.nash_gap_after = haml::nash_gap(g, pi);
  return {rec};
}

int cmd_run(const RunArgs& args) {
  const haml::ExperimentConfig cfg = haml::load_experiment_config(args.config_path);
  const std::uint64_t master = args.seed.value_or(cfg.seed);
  const haml::MarkovGame g = haml::realize_game(cfg.game, master);
  const haml::JointPolicy pi0 = haml::realize_initial_policy(cfg.initial_policy, g, master);
  haml::validate_policy(g, pi0);
  info("game: " + std::to_string(g.n_agents) + " agents, " + std::to_string(g.n_states) + " states, seed " +
       std::to_string(master));

  std::vector<haml::IterationRecord> records;
  std::string algorithm;
  switch (cfg.algorithm) {
    case haml::Algorithm::haml:
      algorithm = "haml";
      records = run_haml_records(g, pi0, cfg, master);
      break;
    case haml::Algorithm::naive_a2c:
      algorithm = "naive_a2c";
      records = run_naive_records(g, pi0, cfg);
      break;
    case haml::Algorithm::haa2c:
      algorithm = "haa2c";
      records = run_haa2c_records(g, pi0, cfg, master);
      break;
    case haml::Algorithm::shared_optimum:
      algorithm = "shared_optimum";
      records = run_shared_optimum_records(g);
      break;
  }
  if (records.empty()) throw haml::RuntimeFailure("run produced no iterations");

  std::filesystem::create_directories(args.out_dir);
  const std::string csv_path = resolve_output(args.out_dir, cfg.output.csv);
  const std::string summary_path = resolve_output(args.out_dir, cfg.output.summary);
  haml::write_result_csv(csv_path, g.n_states, g.n_agents, records);

  haml::json summary;
  summary["schema_version"] = 1;
  summary["algorithm"] = algorithm;
  summary["final_j"] = records.back().j_after;
  summary["final_nash_gap"] = records.back().nash_gap_after;
  summary["iterations"] = records.size();
  summary["seed"] = master;
  summary["config"] = haml::detail::load_document(args.config_path);
  std::ofstream out(summary_path);
  if (!out) throw haml::RuntimeFailure("cannot write " + summary_path);
  out << summary.dump(2) << "\n";

  info("wrote " + csv_path + " and " + summary_path);
  std::printf("final J = %s\n", haml::format_real(records.back().j_after).c_str());
  std::printf("final nash_gap = %s\n", haml::format_real(records.back().nash_gap_after).c_str());
  std::printf("iterations = %zu\n", records.size());
  return 0;
}

// ---- verify -----------------------------------------------------------------------

struct VerifyArgs {
  std::string suite;
  haml::VerifyOptions opts;
  std::optional<int> games;
  std::optional<int> iterations;
  std::string report_path;
};

int cmd_verify(const VerifyArgs& args) {
  haml::VerifyOptions opts = args.opts;
  if (args.games.has_value()) {
    opts.monotone_games = *args.games;
    opts.nash_games = *args.games;
  }
  if (args.iterations.has_value()) {
    opts.monotone_iterations = *args.iterations;
    opts.nash_iterations = *args.iterations;
  }

  std::vector<std::string> suites;
  if (args.suite == "all")
    suites = haml::verify_suite_names();
  else
    suites = {args.suite};

  bool all_passed = true;
  std::vector<haml::SuiteResult> results;
  for (const auto& name : suites) {
    haml::SuiteResult result = haml::run_verify_suite(name, opts);
    std::printf("== %s\n", result.suite.c_str());
    for (const auto& line : result.lines) std::printf("%s\n", line.c_str());
    std::printf("%s: %s (%.2f s)\n", result.suite.c_str(), result.passed ? "PASS" : "FAIL", result.seconds);
    all_passed = all_passed && result.passed;
    results.push_back(std::move(result));
  }
  if (suites.size() > 1) std::printf("verify: %s\n", all_passed ? "all suites passed" : "FAILURES above");

  if (!args.report_path.empty()) {
    // The report carries no timings so reruns are byte-identical.
    haml::json report;
    report["schema_version"] = 1;
    report["passed"] = all_passed;
    report["suites"] = haml::json::array();
    for (const auto& result : results) {
      haml::json suite;
      suite["suite"] = result.suite;
      suite["passed"] = result.passed;
      suite["lines"] = result.lines;
      report["suites"].push_back(std::move(suite));
    }
    std::ofstream out(args.report_path);
    if (!out) throw haml::RuntimeFailure("cannot write " + args.report_path);
    out << report.dump(2) << "\n";
    info("wrote " + args.report_path);
  }
  return all_passed ? 0 : 1;
}

// ---- gen-game ---------------------------------------------------------------------

struct GenGameArgs {
  std::string builder;
  int n_agents = 2;
  std::optional<int> random_agents;
  int n_states = 2;
  std::vector<int> actions;
  double gamma = 0.9;
  double reward_lo = -1.0;
  double reward_hi = 1.0;
  std::uint64_t seed = 0;
  std::string out_path;
};

int cmd_gen_game(const GenGameArgs& args) {
  haml::MarkovGame g;
  if (!args.builder.empty()) {
    if (args.builder == "prop1")
      g = haml::build_prop1_game(args.n_agents);
    else if (args.builder == "prop2")
      g = haml::build_prop2_game();
    else
      throw haml::ConfigError("builder: unknown builder '" + args.builder + "'");
  } else {
    haml::RandomGameSpec spec;
    spec.n_agents = args.random_agents.value_or(2);
    spec.n_states = args.n_states;
    spec.action_counts = args.actions;
    spec.gamma = args.gamma;
    spec.reward_lo = args.reward_lo;
    spec.reward_hi = args.reward_hi;
    g = haml::random_game(spec, args.seed);
  }
  haml::save_game(g, args.out_path);
  info("wrote " + args.out_path);
  return 0;
}

// ---- eval -------------------------------------------------------------------------

struct EvalArgs {
  std::string game_path;
  std::string policy_path;
  std::string trajectory_path;
  int horizon = 32;
  int batch = 16;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& args) {
  const haml::MarkovGame g = haml::load_game(args.game_path);
  const haml::JointPolicy pi = haml::load_policy(args.policy_path, g);
  const haml::EvalBundle eval = haml::evaluate(g, pi);
  std::printf("j = %s\n", haml::format_real(eval.j).c_str());
  for (int s = 0; s < g.n_states; ++s)
    std::printf("v_%d = %s\n", s, haml::format_real(eval.v(s)).c_str());
  std::printf("nash_gap = %s\n", haml::format_real(haml::nash_gap(g, pi)).c_str());
  if (!args.trajectory_path.empty()) {
    const auto trajectories =
        haml::sample_trajectories(g, pi, args.horizon, args.batch,
                                  haml::derive_seed(args.seed, haml::kSeedStreamTrajectories));
    haml::write_trajectory_csv(args.trajectory_path, g.n_agents, trajectories);
    info("wrote " + args.trajectory_path);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact tabular sequential mirror-learning for cooperative Markov games"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run_cmd = app.add_subcommand("run", "execute an experiment config and write CSV + summary");
  run_cmd->add_option("--config", run_args.config_path, "experiment config file")->required();
  run_cmd->add_option("--seed", run_args.seed, "override the master seed");
  run_cmd->add_option("--out", run_args.out_dir, "directory for the output files (default .)");

  VerifyArgs verify_args;
  CLI::App* verify_cmd = app.add_subcommand("verify", "run a verification suite (or 'all')");
  verify_cmd->add_option("suite", verify_args.suite, "suite name or 'all'")->required();
  verify_cmd->add_option("--n", verify_args.opts.prop1_n, "prop1: single even agent count");
  verify_cmd->add_option("--seeds", verify_args.opts.lemma1_seeds, "lemma1: number of seeded games");
  verify_cmd->add_option("--games", verify_args.games, "monotone/nash: number of random games");
  verify_cmd->add_option("--iterations", verify_args.iterations, "monotone/nash: iteration budget");
  verify_cmd->add_option("--directions", verify_args.opts.hadf_directions, "hadf: directions per drift kind");
  verify_cmd->add_option("--instances", verify_args.opts.happo_instances, "happo-identity: random instances");
  verify_cmd->add_option("--out", verify_args.report_path, "write a timing-free JSON report here");

  GenGameArgs gen_args;
  CLI::App* gen_cmd = app.add_subcommand("gen-game", "write a game file from a builder or random draw");
  CLI::Option* builder_opt = gen_cmd->add_option("--builder", gen_args.builder, "prop1 | prop2");
  gen_cmd->add_option("--n", gen_args.n_agents, "prop1: agent count (even)");
  CLI::Option* agents_opt = gen_cmd->add_option("--agents", gen_args.random_agents, "random: agent count");
  gen_cmd->add_option("--states", gen_args.n_states, "random: state count");
  gen_cmd->add_option("--actions", gen_args.actions, "random: per-agent action counts");
  gen_cmd->add_option("--gamma", gen_args.gamma, "random: discount in [0, 1)");
  gen_cmd->add_option("--reward-lo", gen_args.reward_lo, "random: reward lower bound");
  gen_cmd->add_option("--reward-hi", gen_args.reward_hi, "random: reward upper bound");
  gen_cmd->add_option("--seed", gen_args.seed, "random: draw seed");
  gen_cmd->add_option("--out", gen_args.out_path, "output game file")->required();
  builder_opt->excludes(agents_opt);

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a policy file against a game file");
  eval_cmd->add_option("--game", eval_args.game_path, "game file")->required();
  eval_cmd->add_option("--policy", eval_args.policy_path, "policy file")->required();
  eval_cmd->add_option("--trajectories", eval_args.trajectory_path, "also write sampled rollouts to this CSV");
  eval_cmd->add_option("--horizon", eval_args.horizon, "rollout length (default 32)");
  eval_cmd->add_option("--batch", eval_args.batch, "rollout count (default 16)");
  eval_cmd->add_option("--seed", eval_args.seed, "rollout seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_args);
    if (verify_cmd->parsed()) return cmd_verify(verify_args);
    if (gen_cmd->parsed()) return cmd_gen_game(gen_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_args);
  } catch (const haml::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const haml::ParseError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const haml::ValidationError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 2;
  }
  return 0;
}
