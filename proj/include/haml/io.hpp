#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "haml/game.hpp"

namespace haml {

using json = nlohmann::json;

constexpr int kSchemaVersion = 1;

namespace detail {

inline json load_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("malformed document " + path + ": " + e.what());
  }
  return doc;
}

inline void check_schema(const json& doc, const std::string& path) {
  if (!doc.is_object() || !doc.contains("schema_version"))
    throw ParseError(path + ": missing schema_version");
  if (doc["schema_version"] != kSchemaVersion)
    throw ParseError(path + ": unsupported schema_version " + doc["schema_version"].dump());
}

template <typename T>
inline T field(const json& doc, const std::string& path, const std::string& name) {
  if (!doc.contains(name)) throw ParseError(path + ": missing field " + name);
  try {
    return doc[name].get<T>();
  } catch (const json::exception&) {
    throw ParseError(path + ": field " + name + " has the wrong type");
  }
}

inline Vec to_vec(const std::vector<double>& values) {
  Vec out(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) out(static_cast<Eigen::Index>(i)) = values[i];
  return out;
}

inline Mat to_mat(const std::vector<std::vector<double>>& rows, const std::string& path,
                  const std::string& name) {
  if (rows.empty()) throw ParseError(path + ": field " + name + " must be non-empty");
  Mat out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size())
      throw ParseError(path + ": field " + name + " has ragged rows");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return out;
}

inline std::vector<std::vector<double>> from_mat(const Mat& m) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    rows[static_cast<std::size_t>(r)].resize(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = m(r, c);
  }
  return rows;
}

}  // namespace detail

// Reads and fully validates a game document. ParseError for malformed files,
// ValidationError (naming the first violated invariant) for bad contents.
inline MarkovGame load_game(const std::string& path) {
  const json doc = detail::load_document(path);
  detail::check_schema(doc, path);
  MarkovGame g;
  g.n_agents = detail::field<int>(doc, path, "n_agents");
  g.n_states = detail::field<int>(doc, path, "n_states");
  g.action_counts = detail::field<std::vector<int>>(doc, path, "action_counts");
  g.gamma = detail::field<double>(doc, path, "gamma");
  g.initial = detail::to_vec(detail::field<std::vector<double>>(doc, path, "initial"));
  const auto transitions = detail::field<std::vector<std::vector<std::vector<double>>>>(doc, path, "transitions");
  g.transitions.reserve(transitions.size());
  for (std::size_t s = 0; s < transitions.size(); ++s)
    g.transitions.push_back(detail::to_mat(transitions[s], path, "transitions[" + std::to_string(s) + "]"));
  g.rewards = detail::to_mat(detail::field<std::vector<std::vector<double>>>(doc, path, "rewards"), path, "rewards");
  validate_game(g);
  return g;
}

inline void save_game(const MarkovGame& g, const std::string& path) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "game";
  doc["n_agents"] = g.n_agents;
  doc["n_states"] = g.n_states;
  doc["action_counts"] = g.action_counts;
  doc["gamma"] = g.gamma;
  doc["initial"] = std::vector<double>(g.initial.data(), g.initial.data() + g.initial.size());
  json transitions = json::array();
  for (const Mat& block : g.transitions) transitions.push_back(detail::from_mat(block));
  doc["transitions"] = std::move(transitions);
  doc["rewards"] = detail::from_mat(g.rewards);
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out << doc.dump(2) << "\n";
}

// Policy documents share the game format family: one stochastic table per agent.
inline JointPolicy load_policy(const std::string& path, const MarkovGame& g) {
  const json doc = detail::load_document(path);
  detail::check_schema(doc, path);
  const auto tables = detail::field<std::vector<std::vector<std::vector<double>>>>(doc, path, "tables");
  JointPolicy pi;
  pi.agents.reserve(tables.size());
  for (std::size_t i = 0; i < tables.size(); ++i)
    pi.agents.push_back({detail::to_mat(tables[i], path, "tables[" + std::to_string(i) + "]")});
  validate_policy(g, pi);
  return pi;
}

inline void save_policy(const JointPolicy& pi, const std::string& path) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "policy";
  json tables = json::array();
  for (const AgentPolicy& agent : pi.agents) tables.push_back(detail::from_mat(agent.table));
  doc["tables"] = std::move(tables);
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace haml
