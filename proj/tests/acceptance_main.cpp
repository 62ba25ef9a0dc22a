// Acceptance gate: one pass/fail line per shipping criterion, nonzero exit on any failure.
// Criteria 1-8 drive the library verification suites at full scale with pinned
// runtime budgets; criterion 9 additionally reruns the CLI and byte-compares its files.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "haml/verify.hpp"

namespace {

std::string g_cli_path;
std::filesystem::path g_work_dir;

struct Criterion {
  int id;
  std::string label;
  bool passed;
  double seconds;
  std::vector<std::string> detail;
};

void print_line(const Criterion& c) {
  std::printf("criterion %d  %-42s %s (%.2f s)\n", c.id, c.label.c_str(),
              c.passed ? "PASS" : "FAIL", c.seconds);
  if (!c.passed)
    for (const auto& line : c.detail) std::printf("    %s\n", line.c_str());
}

Criterion from_suite(int id, const std::string& label, const haml::SuiteResult& suite,
                     double budget_seconds) {
  Criterion c{id, label, suite.passed, suite.seconds, suite.lines};
  if (budget_seconds > 0.0 && suite.seconds > budget_seconds) {
    c.passed = false;
    c.detail.push_back("FAIL  runtime " + std::to_string(suite.seconds) + " s exceeds budget " +
                       std::to_string(budget_seconds) + " s");
  }
  return c;
}

int run_command(const std::string& args) {
  const std::string command =
      g_cli_path + " " + args + " > " + (g_work_dir / "log.txt").string() + " 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in.good()) return "<unreadable:" + path.string() + ">";
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Rerunning the CLI with a fixed seed must reproduce every output file byte for byte.
Criterion check_cli_reruns() {
  const auto start = std::chrono::steady_clock::now();
  Criterion c{9, "byte-identical reruns", true, 0.0, {}};
  auto check = [&c](bool ok, const std::string& text) {
    c.passed = c.passed && ok;
    c.detail.push_back(std::string(ok ? "PASS  " : "FAIL  ") + text);
  };

  const haml::SuiteResult suite = haml::verify_determinism();
  check(suite.passed, "library replay suite");

  if (g_cli_path.empty()) {
    check(false, "CLI path missing: pass --cli <path>");
  } else {
    const std::filesystem::path config = g_work_dir / "rerun.json";
    std::ofstream(config) << R"({
      "schema_version": 1,
      "game": {"random": {"n_agents": 2, "n_states": 2}},
      "initial_policy": {"random": {}},
      "algorithm": "haml",
      "engine": {"hadf": {"kind": "kl_penalty", "tau": 0.5}, "solver": {"kind": "exp_gradient"}},
      "iterations": 8,
      "seed": 29
    })";
    const std::filesystem::path dir_a = g_work_dir / "a";
    const std::filesystem::path dir_b = g_work_dir / "b";
    check(run_command("run --config " + config.string() + " --out " + dir_a.string()) == 0,
          "first run exits 0");
    check(run_command("run --config " + config.string() + " --out " + dir_b.string()) == 0,
          "second run exits 0");
    check(read_file(dir_a / "results.csv") == read_file(dir_b / "results.csv"),
          "results.csv identical across reruns");
    check(read_file(dir_a / "summary.json") == read_file(dir_b / "summary.json"),
          "summary.json identical across reruns");

    const std::filesystem::path rep_a = g_work_dir / "report_a.json";
    const std::filesystem::path rep_b = g_work_dir / "report_b.json";
    check(run_command("verify lemma1 --seeds 10 --out " + rep_a.string()) == 0,
          "first verify exits 0");
    check(run_command("verify lemma1 --seeds 10 --out " + rep_b.string()) == 0,
          "second verify exits 0");
    check(read_file(rep_a) == read_file(rep_b), "verify report identical across reruns");
  }

  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--cli") g_cli_path = argv[i + 1];
  g_work_dir = std::filesystem::temp_directory_path() /
               ("haml_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(g_work_dir);

  const haml::VerifyOptions opts;  // full published scale
  std::vector<Criterion> criteria;
  criteria.push_back(from_suite(1, "half-pattern optimum ratio (n=2,4,6)",
                                haml::verify_prop1(opts), 5.0));
  criteria.push_back(from_suite(2, "penalty-trap escape in one sweep",
                                haml::verify_prop2(), 1.0));
  criteria.push_back(from_suite(3, "advantage decomposition residual",
                                haml::verify_lemma1(opts), 60.0));
  criteria.push_back(from_suite(4, "monotone J and per-state V",
                                haml::verify_monotone(opts), 900.0));
  criteria.push_back(from_suite(5, "greedy convergence to equilibrium",
                                haml::verify_nash(opts), 0.0));
  criteria.push_back(from_suite(6, "drift axioms and directional derivative",
                                haml::verify_hadf(opts), 0.0));
  criteria.push_back(from_suite(7, "clip surrogate identity",
                                haml::verify_happo(opts), 0.0));
  criteria.push_back(from_suite(8, "policy-gradient baseline correctness",
                                haml::verify_haa2c(), 0.0));
  criteria.push_back(check_cli_reruns());

  int failures = 0;
  for (const auto& c : criteria) {
    print_line(c);
    if (!c.passed) ++failures;
  }
  std::printf("acceptance: %zu/%zu criteria passed\n", criteria.size() - failures,
              criteria.size());

  std::error_code ec;
  std::filesystem::remove_all(g_work_dir, ec);
  return failures == 0 ? 0 : 1;
}
