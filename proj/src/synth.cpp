#include <algorithm>
#include <random>

#include "degfair/errors.hpp"
#include "degfair/graph.hpp"

namespace degfair::graph {

Graph synth_generate(const SynthParams& p) {
  if (p.attach == 0) throw ArgumentError("attach must be >= 1");
  if (p.num_nodes < p.attach + 1) throw ArgumentError("num_nodes must be >= attach + 1");
  if (!(p.label_bias >= 0.0 && p.label_bias <= 1.0)) {
    throw ArgumentError("label_bias must lie in [0, 1]");
  }
  if (p.feature_dim == 0) throw ArgumentError("feature_dim must be >= 1");

  std::mt19937_64 rng(p.seed);

  // Seed clique on attach + 1 nodes, then each new node attaches to `attach`
  // distinct existing nodes with probability proportional to degree. `ends`
  // holds every edge endpoint, so a uniform draw from it is degree-weighted.
  std::vector<Edge> edges;
  std::vector<NodeId> ends;
  const std::size_t seed_nodes = p.attach + 1;
  for (NodeId u = 0; u < seed_nodes; ++u) {
    for (NodeId v = u + 1; v < seed_nodes; ++v) {
      edges.emplace_back(u, v);
      ends.push_back(u);
      ends.push_back(v);
    }
  }
  std::vector<NodeId> targets;
  for (NodeId u = seed_nodes; u < p.num_nodes; ++u) {
    targets.clear();
    while (targets.size() < p.attach) {
      std::uniform_int_distribution<std::size_t> pick(0, ends.size() - 1);
      const NodeId t = ends[pick(rng)];
      if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    }
    for (NodeId t : targets) {
      edges.emplace_back(t, u);
      ends.push_back(t);
      ends.push_back(u);
    }
  }

  std::vector<std::size_t> degree(p.num_nodes, 0);
  for (const auto& [u, v] : edges) {
    ++degree[u];
    ++degree[v];
  }
  const double mean = 2.0 * static_cast<double>(edges.size()) / static_cast<double>(p.num_nodes);

  std::bernoulli_distribution flip(1.0 - p.label_bias);
  std::vector<std::size_t> labels(p.num_nodes);
  for (NodeId v = 0; v < p.num_nodes; ++v) {
    const std::size_t group = static_cast<double>(degree[v]) <= mean ? 0 : 1;
    labels[v] = flip(rng) ? 1 - group : group;
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  ad::Matrix features(p.num_nodes, p.feature_dim);
  for (NodeId v = 0; v < p.num_nodes; ++v) {
    const double centre = p.class_separation * static_cast<double>(labels[v]);
    for (double& x : features.row(v)) x = centre + noise(rng);
  }

  return Graph::from_edges(p.num_nodes, edges, std::move(features), std::move(labels), 2);
}

}  // namespace degfair::graph
