#pragma once
// Independent reference implementations used as test oracles. Deliberately
// naive: dense matrices and explicit counting loops.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "degfair/graph.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense dense_adjacency(std::size_t n, const std::vector<degfair::graph::Edge>& edges) {
  Dense a(n, std::vector<double>(n, 0.0));
  for (auto [u, v] : edges) {
    if (u == v) continue;
    a[u][v] = 1.0;
    a[v][u] = 1.0;
  }
  return a;
}

// Row sums of A^r, by repeated dense products.
inline std::vector<double> walk_counts(const Dense& a, int r) {
  const std::size_t n = a.size();
  Dense p = a;
  for (int k = 1; k < r; ++k) {
    Dense next(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t m = 0; m < n; ++m) next[i][j] += p[i][m] * a[m][j];
    p = std::move(next);
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += p[i][j];
  return out;
}

inline std::vector<degfair::graph::Edge> random_edges(std::size_t n, double density,
                                                      std::mt19937_64& rng) {
  std::bernoulli_distribution coin(density);
  std::vector<degfair::graph::Edge> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (coin(rng)) edges.emplace_back(u, v);
  return edges;
}

inline degfair::graph::Graph structure_only(std::size_t n,
                                            const std::vector<degfair::graph::Edge>& edges) {
  return degfair::graph::Graph::from_edges(n, edges, degfair::ad::Matrix(n, 1),
                                           std::vector<std::size_t>(n, 0), 1);
}

// ΔDSP by counting: for each class, count members of each group predicted as it.
inline double dsp(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& g0,
                  const std::vector<std::size_t>& g1, std::size_t k) {
  double total = 0.0;
  for (std::size_t y = 0; y < k; ++y) {
    double c0 = 0, c1 = 0;
    for (auto v : g0) c0 += preds[v] == y;
    for (auto v : g1) c1 += preds[v] == y;
    total += std::abs(c0 / g0.size() - c1 / g1.size());
  }
  return total / k;
}

inline double deo(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& labels,
                  const std::vector<std::size_t>& g0, const std::vector<std::size_t>& g1,
                  std::size_t k) {
  double total = 0.0;
  int used = 0;
  for (std::size_t y = 0; y < k; ++y) {
    double t0 = 0, h0 = 0, t1 = 0, h1 = 0;
    for (auto v : g0)
      if (labels[v] == y) {
        ++t0;
        h0 += preds[v] == y;
      }
    for (auto v : g1)
      if (labels[v] == y) {
        ++t1;
        h1 += preds[v] == y;
      }
    if (t0 == 0 || t1 == 0) continue;
    total += std::abs(h0 / t0 - h1 / t1);
    ++used;
  }
  return used ? total / used : 0.0;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("degfair_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
