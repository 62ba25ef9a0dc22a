#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "haml/baselines.hpp"
#include "haml/engine.hpp"
#include "haml/io.hpp"

namespace haml {

// ---- Enum names ------------------------------------------------------------------

namespace detail {

inline HadfKind parse_hadf_kind(const std::string& v) {
  if (v == "trivial") return HadfKind::trivial;
  if (v == "kl_penalty") return HadfKind::kl_penalty;
  if (v == "clip_relu") return HadfKind::clip_relu;
  if (v == "squared_l2") return HadfKind::squared_l2;
  throw ConfigError("hadf.kind: unknown value '" + v + "'");
}

inline NeighborhoodKind parse_neighborhood_kind(const std::string& v) {
  if (v == "unconstrained") return NeighborhoodKind::unconstrained;
  if (v == "per_state_kl") return NeighborhoodKind::per_state_kl;
  if (v == "expected_kl") return NeighborhoodKind::expected_kl;
  if (v == "per_state_tv") return NeighborhoodKind::per_state_tv;
  throw ConfigError("neighborhood.kind: unknown value '" + v + "'");
}

inline WeightKind parse_weight_kind(const std::string& v) {
  if (v == "beta") return WeightKind::beta;
  if (v == "rho_normalized") return WeightKind::rho_normalized;
  if (v == "uniform") return WeightKind::uniform;
  throw ConfigError("weighting: unknown value '" + v + "'");
}

inline PermKind parse_perm_kind(const std::string& v) {
  if (v == "uniform") return PermKind::uniform;
  if (v == "fixed_cycle") return PermKind::fixed_cycle;
  if (v == "fixed_list") return PermKind::fixed_list;
  throw ConfigError("permutations.kind: unknown value '" + v + "'");
}

inline SolverKind parse_solver_kind(const std::string& v) {
  if (v == "closed_form_greedy") return SolverKind::closed_form_greedy;
  if (v == "exp_gradient") return SolverKind::exp_gradient;
  throw ConfigError("solver.kind: unknown value '" + v + "'");
}

inline HadfSpec parse_hadf(const json& doc) {
  HadfSpec spec;
  if (doc.contains("kind")) spec.kind = parse_hadf_kind(doc["kind"].get<std::string>());
  if (doc.contains("tau")) spec.tau = doc["tau"].get<double>();
  if (doc.contains("epsilon")) spec.epsilon = doc["epsilon"].get<double>();
  if (doc.contains("kl_direction")) {
    const std::string v = doc["kl_direction"].get<std::string>();
    if (v == "old_to_new")
      spec.kl_direction = KlDirection::old_to_new;
    else if (v == "new_to_old")
      spec.kl_direction = KlDirection::new_to_old;
    else
      throw ConfigError("hadf.kl_direction: unknown value '" + v + "'");
  }
  validate_hadf(spec);
  return spec;
}

inline NeighborhoodSpec parse_neighborhood(const json& doc) {
  NeighborhoodSpec spec;
  if (doc.contains("kind")) spec.kind = parse_neighborhood_kind(doc["kind"].get<std::string>());
  if (doc.contains("delta")) spec.delta = doc["delta"].get<double>();
  if (doc.contains("weighting")) spec.weighting.kind = parse_weight_kind(doc["weighting"].get<std::string>());
  validate_neighborhood(spec);
  return spec;
}

inline PermutationSpec parse_permutations(const json& doc) {
  PermutationSpec spec;
  if (doc.contains("kind")) spec.kind = parse_perm_kind(doc["kind"].get<std::string>());
  if (doc.contains("seed")) spec.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("schedule")) spec.schedule = doc["schedule"].get<std::vector<std::vector<int>>>();
  return spec;
}

inline SolverSpec parse_solver(const json& doc) {
  SolverSpec spec;
  if (doc.contains("kind")) spec.kind = parse_solver_kind(doc["kind"].get<std::string>());
  if (doc.contains("steps")) spec.steps = doc["steps"].get<int>();
  if (doc.contains("learning_rate")) spec.learning_rate = doc["learning_rate"].get<double>();
  if (doc.contains("backtracking_factor")) spec.backtracking_factor = doc["backtracking_factor"].get<double>();
  return spec;
}

inline EngineConfig parse_engine(const json& doc) {
  EngineConfig cfg;
  if (doc.contains("hadf")) {
    if (doc["hadf"].is_array())
      for (const auto& h : doc["hadf"]) cfg.hadf.push_back(parse_hadf(h));
    else
      cfg.hadf = {parse_hadf(doc["hadf"])};
  } else {
    cfg.hadf = {HadfSpec{}};
  }
  if (doc.contains("neighborhood")) {
    if (doc["neighborhood"].is_array())
      for (const auto& n : doc["neighborhood"]) cfg.neighborhood.push_back(parse_neighborhood(n));
    else
      cfg.neighborhood = {parse_neighborhood(doc["neighborhood"])};
  } else {
    cfg.neighborhood = {NeighborhoodSpec{}};
  }
  if (doc.contains("beta")) cfg.beta.kind = parse_weight_kind(doc["beta"].get<std::string>());
  if (doc.contains("nu")) cfg.nu.kind = parse_weight_kind(doc["nu"].get<std::string>());
  if (doc.contains("permutations")) cfg.permutations = parse_permutations(doc["permutations"]);
  if (doc.contains("solver")) cfg.solver = parse_solver(doc["solver"]);
  if (doc.contains("stop_gap")) cfg.stop_gap = doc["stop_gap"].get<double>();
  if (doc.contains("timings")) cfg.timings = doc["timings"].get<bool>();
  return cfg;
}

inline Haa2cConfig parse_haa2c(const json& doc) {
  Haa2cConfig cfg;
  if (doc.contains("mode")) {
    const std::string v = doc["mode"].get<std::string>();
    if (v == "exact")
      cfg.mode = Haa2cMode::exact;
    else if (v == "monte_carlo")
      cfg.mode = Haa2cMode::monte_carlo;
    else
      throw ConfigError("haa2c.mode: unknown value '" + v + "'");
  }
  if (doc.contains("mini_epochs")) cfg.mini_epochs = doc["mini_epochs"].get<int>();
  if (doc.contains("learning_rate")) cfg.learning_rate = doc["learning_rate"].get<double>();
  if (doc.contains("gae_lambda")) cfg.gae_lambda = doc["gae_lambda"].get<double>();
  if (doc.contains("batch")) cfg.batch = doc["batch"].get<int>();
  if (doc.contains("horizon")) cfg.horizon = doc["horizon"].get<int>();
  if (doc.contains("critic")) {
    const std::string v = doc["critic"].get<std::string>();
    if (v == "exact")
      cfg.critic = CriticKind::exact;
    else if (v == "fitted")
      cfg.critic = CriticKind::fitted;
    else
      throw ConfigError("haa2c.critic: unknown value '" + v + "'");
  }
  if (doc.contains("permutations")) cfg.permutations = parse_permutations(doc["permutations"]);
  return cfg;
}

}  // namespace detail

// ---- Experiment configuration ------------------------------------------------------

enum class Algorithm { haml, naive_a2c, haa2c, shared_optimum };

// Streams of the master seed: each stochastic component derives its own seed
// as derive_seed(master, stream) unless the config pins an explicit one.
enum : std::uint64_t {
  kSeedStreamGame = 0,
  kSeedStreamInitialPolicy = 1,
  kSeedStreamEngine = 2,
  kSeedStreamHaa2c = 3,
  kSeedStreamTrajectories = 4,
};

struct GameSource {
  std::optional<std::string> path;
  std::optional<std::string> builder;  // "prop1" | "prop2"
  int builder_agents = 2;              // prop1 only
  std::optional<RandomGameSpec> random;
  std::optional<std::uint64_t> random_seed;
};

struct InitialPolicySpec {
  enum class Kind { uniform, random, file } kind = Kind::uniform;
  std::optional<std::uint64_t> seed;
  std::string path;
};

struct OutputSpec {
  std::string csv = "results.csv";
  std::string summary = "summary.json";
};

struct ExperimentConfig {
  GameSource game;
  InitialPolicySpec initial_policy;
  Algorithm algorithm = Algorithm::haml;
  EngineConfig engine;
  Haa2cConfig haa2c;
  int iterations = 1;
  std::uint64_t seed = 0;
  OutputSpec output;
};

// Parses and validates an experiment document; ConfigError messages name the
// offending field.
inline ExperimentConfig load_experiment_config(const std::string& path) {
  const json doc = detail::load_document(path);
  detail::check_schema(doc, path);
  ExperimentConfig cfg;

  if (!doc.contains("game") || !doc["game"].is_object())
    throw ConfigError("game: exactly one source (path | builder | random) is required");
  const json& game = doc["game"];
  int sources = 0;
  if (game.contains("path")) {
    cfg.game.path = game["path"].get<std::string>();
    ++sources;
  }
  if (game.contains("builder")) {
    const json& builder = game["builder"];
    cfg.game.builder = detail::field<std::string>(builder, path, "name");
    if (builder.contains("n_agents")) cfg.game.builder_agents = builder["n_agents"].get<int>();
    ++sources;
  }
  if (game.contains("random")) {
    const json& random = game["random"];
    RandomGameSpec spec;
    if (random.contains("n_agents")) spec.n_agents = random["n_agents"].get<int>();
    if (random.contains("n_states")) spec.n_states = random["n_states"].get<int>();
    if (random.contains("action_counts")) spec.action_counts = random["action_counts"].get<std::vector<int>>();
    if (random.contains("gamma")) spec.gamma = random["gamma"].get<double>();
    if (random.contains("reward_lo")) spec.reward_lo = random["reward_lo"].get<double>();
    if (random.contains("reward_hi")) spec.reward_hi = random["reward_hi"].get<double>();
    cfg.game.random = spec;
    if (random.contains("seed")) cfg.game.random_seed = random["seed"].get<std::uint64_t>();
    ++sources;
  }
  if (sources != 1) throw ConfigError("game: exactly one source (path | builder | random) is required");
  if (cfg.game.builder.has_value() && *cfg.game.builder != "prop1" && *cfg.game.builder != "prop2")
    throw ConfigError("game.builder.name: unknown builder '" + *cfg.game.builder + "'");

  if (doc.contains("initial_policy")) {
    const json& init = doc["initial_policy"];
    if (init.is_string()) {
      const std::string v = init.get<std::string>();
      if (v == "uniform")
        cfg.initial_policy.kind = InitialPolicySpec::Kind::uniform;
      else
        throw ConfigError("initial_policy: unknown value '" + v + "'");
    } else if (init.is_object() && init.contains("random")) {
      cfg.initial_policy.kind = InitialPolicySpec::Kind::random;
      if (init["random"].contains("seed")) cfg.initial_policy.seed = init["random"]["seed"].get<std::uint64_t>();
    } else if (init.is_object() && init.contains("path")) {
      cfg.initial_policy.kind = InitialPolicySpec::Kind::file;
      cfg.initial_policy.path = init["path"].get<std::string>();
    } else {
      throw ConfigError("initial_policy: expected \"uniform\", {random: {seed}}, or {path}");
    }
  }

  if (doc.contains("algorithm")) {
    const std::string v = doc["algorithm"].get<std::string>();
    if (v == "haml")
      cfg.algorithm = Algorithm::haml;
    else if (v == "naive_a2c")
      cfg.algorithm = Algorithm::naive_a2c;
    else if (v == "haa2c")
      cfg.algorithm = Algorithm::haa2c;
    else if (v == "shared_optimum")
      cfg.algorithm = Algorithm::shared_optimum;
    else
      throw ConfigError("algorithm: unknown value '" + v + "'");
  }

  cfg.engine = detail::parse_engine(doc.contains("engine") ? doc["engine"] : json::object());
  if (doc.contains("haa2c")) cfg.haa2c = detail::parse_haa2c(doc["haa2c"]);
  if (doc.contains("iterations")) cfg.iterations = doc["iterations"].get<int>();
  cfg.engine.iterations = cfg.iterations;
  if (cfg.iterations < 1) throw ConfigError("iterations: must be >= 1");
  if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("output")) {
    const json& output = doc["output"];
    if (output.contains("csv")) cfg.output.csv = output["csv"].get<std::string>();
    if (output.contains("summary")) cfg.output.summary = output["summary"].get<std::string>();
  }

  // Referenced files must exist at parse time, not at first use.
  if (cfg.game.path.has_value() && !std::ifstream(*cfg.game.path).good())
    throw ConfigError("game.path: cannot open '" + *cfg.game.path + "'");
  if (cfg.initial_policy.kind == InitialPolicySpec::Kind::file && !std::ifstream(cfg.initial_policy.path).good())
    throw ConfigError("initial_policy.path: cannot open '" + cfg.initial_policy.path + "'");
  return cfg;
}

inline MarkovGame realize_game(const GameSource& source, std::uint64_t master = 0) {
  if (source.path.has_value()) return load_game(*source.path);
  if (source.builder.has_value()) {
    if (*source.builder == "prop1") return build_prop1_game(source.builder_agents);
    return build_prop2_game();
  }
  return random_game(*source.random, source.random_seed.value_or(derive_seed(master, kSeedStreamGame)));
}

inline JointPolicy realize_initial_policy(const InitialPolicySpec& spec, const MarkovGame& g,
                                          std::uint64_t master = 0) {
  switch (spec.kind) {
    case InitialPolicySpec::Kind::uniform:
      return uniform_joint_policy(g);
    case InitialPolicySpec::Kind::random:
      return random_joint_policy(g, spec.seed.value_or(derive_seed(master, kSeedStreamInitialPolicy)));
    case InitialPolicySpec::Kind::file:
      return load_policy(spec.path, g);
  }
  throw ConfigError("initial_policy: unknown kind");
}

}  // namespace haml
