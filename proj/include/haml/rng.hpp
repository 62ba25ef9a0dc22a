#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace haml {

// One SplitMix64 scrambling step.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic child seed for stream index `stream` under `master`.
// Distinct streams of the same master are decorrelated; used to split one
// user-facing seed into per-component seeds (games, permutations, rollouts).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream ^ 0x5851f42d4c957f2dULL));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

// Symmetric Dirichlet(alpha) draw of dimension k; entries are non-negative and
// sum to 1 up to roundoff.
inline std::vector<double> dirichlet_row(std::mt19937_64& rng, int k, double alpha = 1.0) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> row(static_cast<std::size_t>(k));
  double total = 0.0;
  for (double& v : row) {
    v = gamma(rng);
    total += v;
  }
  if (total <= 0.0) {  // all-zero draw is possible only in extreme underflow
    for (double& v : row) v = 1.0;
    total = static_cast<double>(k);
  }
  for (double& v : row) v /= total;
  return row;
}

// Uniform permutation of {0..n-1} via Fisher-Yates.
inline std::vector<int> random_permutation(std::mt19937_64& rng, int n) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
  }
  return perm;
}

}  // namespace haml
