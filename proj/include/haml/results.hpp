#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "haml/baselines.hpp"
#include "haml/engine.hpp"

namespace haml {

// Shortest exact decimal form is not required; 17 significant digits always
// round-trip an IEEE double.
inline std::string format_real(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

inline std::string format_permutation(const std::vector<int>& perm) {
  std::string out;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (i > 0) out += '-';
    out += std::to_string(perm[i]);
  }
  return out;
}

// Fixed column order, one row per iteration. The per-state and per-agent
// column groups are sized by the game; their order never changes.
inline std::string result_csv_header(int n_states, int n_agents) {
  std::string header = "iteration,j,nash_gap";
  for (int s = 0; s < n_states; ++s) header += ",v_" + std::to_string(s);
  header += ",permutation";
  for (int i = 0; i < n_agents; ++i) header += ",hamo_" + std::to_string(i);
  for (int i = 0; i < n_agents; ++i) header += ",drift_" + std::to_string(i);
  header += ",fallbacks,wall_ms";
  return header;
}

inline std::string result_csv_row(const IterationRecord& rec) {
  std::string row = std::to_string(rec.k);
  row += ',' + format_real(rec.j_after);
  row += ',' + format_real(rec.nash_gap_after);
  for (Eigen::Index s = 0; s < rec.v_after.size(); ++s) row += ',' + format_real(rec.v_after(s));
  row += ',' + format_permutation(rec.permutation);
  for (double h : rec.agent_hamo) row += ',' + format_real(h);
  for (double d : rec.agent_drift) row += ',' + format_real(d);
  row += ',' + std::to_string(rec.fallbacks_total);
  row += ',' + format_real(rec.wall_ms);
  return row;
}

inline void write_result_csv(const std::string& path, int n_states, int n_agents,
                             const std::vector<IterationRecord>& records) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out << result_csv_header(n_states, n_agents) << "\n";
  for (const auto& rec : records) out << result_csv_row(rec) << "\n";
}

inline std::string trajectory_csv_header(int n_agents) {
  std::string header = "step,state";
  for (int i = 0; i < n_agents; ++i) header += ",action_" + std::to_string(i);
  header += ",reward";
  return header;
}

// Rollout dump for debugging. Trajectories are concatenated; the step column
// restarting at zero marks each boundary.
inline void write_trajectory_csv(const std::string& path, int n_agents,
                                 const std::vector<Trajectory>& trajectories) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out << trajectory_csv_header(n_agents) << "\n";
  for (const auto& traj : trajectories)
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const auto& step = traj.steps[t];
      out << t << ',' << step.state;
      for (int a : step.actions) out << ',' << a;
      out << ',' << format_real(step.reward) << "\n";
    }
}

}  // namespace haml
