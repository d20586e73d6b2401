#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "degfair/autodiff.hpp"

namespace degfair::graph {

using NodeId = std::size_t;
using Edge = std::pair<NodeId, NodeId>;

// Immutable undirected simple graph in CSR form, with node features and labels.
//
// Every undirected edge is stored in both endpoint rows; rows are sorted and
// free of self-loops and duplicates.
class Graph {
 public:
  Graph() = default;

  // Symmetrizes `edges`, drops self-loops and collapses duplicates.
  // Throws ConsistencyError when an endpoint, the feature row count or a label
  // does not agree with num_nodes / num_classes.
  static Graph from_edges(std::size_t num_nodes, std::span<const Edge> edges, ad::Matrix features,
                          std::vector<std::size_t> labels, std::size_t num_classes);

  std::size_t num_nodes() const { return offsets_.size() - 1; }
  std::size_t num_edges() const { return neighbors_.size() / 2; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t feature_dim() const { return features_.cols(); }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {neighbors_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
  }
  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }

  std::span<const std::size_t> csr_offsets() const { return offsets_; }
  std::span<const NodeId> csr_neighbors() const { return neighbors_; }
  const ad::Matrix& features() const { return features_; }
  std::span<const std::size_t> labels() const { return labels_; }

  // Undirected edge list with u < v, in CSR order.
  std::vector<Edge> edge_list() const;

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> neighbors_;
  ad::Matrix features_;
  std::vector<std::size_t> labels_;
  std::size_t num_classes_ = 0;
};

// --- File formats -----------------------------------------------------------
// Edges: "<u>\t<v>" per line, '#' lines ignored. Features: CSV of fp64, row i =
// node i. Labels: one integer per line.

std::vector<Edge> read_edges(const std::filesystem::path& path);
ad::Matrix read_features(const std::filesystem::path& path);
std::vector<std::size_t> read_labels(const std::filesystem::path& path);

void write_edges(const std::filesystem::path& path, const Graph& g);
void write_features(const std::filesystem::path& path, const ad::Matrix& features);
void write_labels(const std::filesystem::path& path, std::span<const std::size_t> labels);

// Loads and validates a graph. Node count comes from the feature file and the
// class count from the largest label.
Graph load_graph(const std::filesystem::path& edge_path, const std::filesystem::path& feature_path,
                 const std::filesystem::path& label_path);

// --- Degree structure ---------------------------------------------------------

// Number of length-r walks starting at each node, [A^r 1]_v, computed with r
// sparse mat-vec products. Exact while counts stay below 2^53.
std::vector<double> generalized_degree(const Graph& g, int r);

// Nodes within shortest-path distance r of v, v included, sorted by id.
std::vector<NodeId> local_context(const Graph& g, NodeId v, int r);

// Arithmetic mean of one-hop degrees (2|E| / |V|).
double mean_degree(const Graph& g);

enum class PartitionKind { ThresholdContrast, TopBottomFraction, BoundaryList };

struct GroupAssignment {
  PartitionKind kind = PartitionKind::ThresholdContrast;
  std::vector<std::vector<NodeId>> groups;
  // K, the fraction p, or the boundary list, depending on kind.
  std::vector<double> params;
};

// S0 = {v : deg(v) <= K} (groups[0]) and S1 = the rest (groups[1]).
GroupAssignment partition_contrast(std::span<const double> degrees, double threshold,
                                   std::span<const NodeId> universe);

// G0 = lowest floor(p |U|) nodes, G1 = highest floor(p |U|) nodes, ordered by
// (degree, node id).
GroupAssignment partition_top_bottom(std::span<const double> degrees, double fraction,
                                     std::span<const NodeId> universe);

// G_i = {v : b_i <= deg(v) < b_{i+1}} for strictly increasing boundaries.
GroupAssignment partition_boundaries(std::span<const double> degrees,
                                     std::span<const double> boundaries,
                                     std::span<const NodeId> universe);

std::vector<NodeId> all_nodes(const Graph& g);

// --- Splits --------------------------------------------------------------------

struct NodeSplit {
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;
  std::uint64_t seed = 0;
};

// Seeded shuffle, then contiguous train/val/test blocks. Val and test sizes are
// floored; the remainder goes to train.
NodeSplit split_nodes(std::size_t num_nodes, std::array<double, 3> ratios, std::uint64_t seed);

// --- Synthetic fixture -----------------------------------------------------------

struct SynthParams {
  std::size_t num_nodes = 300;
  std::size_t attach = 3;
  // Probability that a label keeps its degree-group indicator.
  double label_bias = 0.9;
  std::size_t feature_dim = 16;
  // Per-coordinate offset between the two class means.
  double class_separation = 0.5;
  std::uint64_t seed = 0;
};

// Preferential-attachment graph with labels planted on the degree group
// (deg <= mean -> 0, else 1), each flipped with probability 1 - label_bias, and
// Gaussian features centred on a per-class mean.
Graph synth_generate(const SynthParams& params);

}  // namespace degfair::graph
