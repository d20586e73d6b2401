#pragma once

// Degree-debiased message passing layers.
//
// Each layer adds a group-selected debiasing context to the base aggregation
// before the activation:
//
//   h_v = act(Aggr(h_prev; omega) + eps * D_sel(v))
//   D(v; theta_g) = (gamma_v + 1) * f(c_v; theta_g) + beta_v,  g in {0, 1}
//
// where c_v mean-pools the previous layer over the r-hop context of v and
// (gamma_v, beta_v) are linear functions of a sinusoidal encoding of deg_1(v).
// Group 0 holds low-degree nodes (deg <= K), group 1 the rest.

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "degfair/autodiff.hpp"
#include "degfair/graph.hpp"
#include "degfair/graph_ops.hpp"

namespace degfair::model {

enum class Aggregator { Gcn, Sage, Gat };

std::string_view to_string(Aggregator a);
// Accepts "gcn", "sage" or "gat"; throws ArgumentError otherwise.
Aggregator parse_aggregator(std::string_view name);

struct ModelConfig {
  Aggregator base = Aggregator::Gcn;
  std::size_t hidden_dim = 16;
  std::size_t num_layers = 2;
  std::size_t gat_heads = 1;
  // Weight of the debiasing context in the aggregation; 0 gives the base GNN.
  double eps = 1.0;
  int r_context = 1;
  double dropout = 0.5;
  // Dropout on the hidden activation is always applied in training; this adds
  // it on the input features too.
  bool input_dropout = false;
};

// Layer widths d_0 .. d_L for a graph with the given feature and class counts.
std::vector<std::size_t> layer_dims(const ModelConfig& config, std::size_t feature_dim,
                                    std::size_t num_classes);

// Width of the degree encoding feeding a layer of width d (rounded up to even).
std::size_t encoding_width(std::size_t layer_width);

struct Linear {
  ad::Tensor weight;
  ad::Tensor bias;
};

struct AttentionHead {
  ad::Tensor weight;
  ad::Tensor att_src;
  ad::Tensor att_dst;
};

struct LayerParams {
  // Base aggregator (omega). GCN uses `weight`; SAGE uses `weight` (self) and
  // `neigh_weight`; GAT uses `heads`. All kinds carry an output bias.
  ad::Tensor weight;
  ad::Tensor neigh_weight;
  std::vector<AttentionHead> heads;
  ad::Tensor bias;

  Linear debias0;  // f(.; theta_c0), low-degree group
  Linear debias1;  // f(.; theta_c1), high-degree group
  Linear film_gamma;
  Linear film_beta;
};

struct ParamRef {
  std::string name;
  ad::Tensor* tensor;
  bool is_weight;
};

struct ModelParams {
  std::vector<LayerParams> layers;

  // Stable, named view over every tensor in use (layer-major order).
  std::vector<ParamRef> named(Aggregator base);
  std::vector<ad::Tensor*> tensors(Aggregator base);
};

// Constant operators derived once per (graph, config, contrast groups).
struct GraphOperators {
  ad::Matrix features;
  std::size_t num_nodes = 0;
  std::shared_ptr<const ad::SparseMatrix> gcn_norm;
  std::shared_ptr<const ad::SparseMatrix> neighbor_mean;
  std::shared_ptr<const ad::SparseMatrix> context_pool;
  std::shared_ptr<const ad::EdgeSegments> attention_edges;
  std::vector<std::size_t> attention_rows;
  std::vector<double> degrees;
  std::vector<double> distinct_degrees;
  std::vector<std::size_t> degree_slot;
  std::vector<double> in_low;
  std::vector<double> in_high;
};

// Throws ArgumentError unless `contrast` has two groups that partition V.
GraphOperators prepare_operators(const graph::Graph& g, const ModelConfig& config,
                                 const graph::GroupAssignment& contrast);

// --- Building blocks ------------------------------------------------------------

// [sin(deg / 10000^(2i/d)), cos(deg / 10000^(2i/d))] interleaved. Odd d throws.
std::vector<double> degree_encoding(double degree, std::size_t width);
ad::Matrix degree_encoding(std::span<const double> degrees, std::size_t width);

// Â = D^-1/2 (A + I) D^-1/2.
std::shared_ptr<ad::SparseMatrix> gcn_normalized_adjacency(const graph::Graph& g);
// Row v averages N(v); isolated nodes get an empty row.
std::shared_ptr<ad::SparseMatrix> neighbor_mean_matrix(const graph::Graph& g);
// Row v averages C_r(v).
std::shared_ptr<ad::SparseMatrix> context_pool_matrix(const graph::Graph& g, int r);
// Edges {v} ∪ N(v) per row, sorted.
std::shared_ptr<ad::EdgeSegments> attention_segments(const graph::Graph& g);

struct BoundLinear {
  ad::Var weight;
  ad::Var bias;
};

struct BoundHead {
  ad::Var weight;
  ad::Var att_src;
  ad::Var att_dst;
};

struct BoundLayer {
  ad::Var weight;
  ad::Var neigh_weight;
  std::vector<BoundHead> heads;
  ad::Var bias;
  BoundLinear debias0;
  BoundLinear debias1;
  BoundLinear film_gamma;
  BoundLinear film_beta;
};

struct BoundModel {
  std::vector<BoundLayer> layers;
  std::vector<ad::Var> weights;  // every weight matrix, biases excluded
};

BoundModel bind(ad::Tape& tape, ModelParams& params, Aggregator base);

ad::Var linear(ad::Var x, const BoundLinear& f);

// Mean of h_prev rows over each node's context.
ad::Var context_embedding(ad::Var h_prev, std::shared_ptr<const ad::SparseMatrix> pool);

struct FilmFactors {
  ad::Var gamma;
  ad::Var beta;
};

// gamma = delta W_g + b_g, beta = delta W_b + b_b (single linear layers).
FilmFactors film_factors(ad::Var delta, const BoundLinear& gamma, const BoundLinear& beta);

// (gamma + 1) ⊙ (c W + b) + beta.
ad::Var debias_context(ad::Var context, ad::Var gamma, ad::Var beta, const BoundLinear& theta);

ad::Var base_aggregate(ad::Var h_prev, const GraphOperators& ops, const BoundLayer& layer,
                       Aggregator kind);

enum class Activation { Relu, Softmax, Identity };

struct LayerTraceEntry {
  ad::Var h;
  ad::Var d_low;   // D(v; theta_0) for every node
  ad::Var d_high;  // D(v; theta_1) for every node
  ad::Var gamma;
  ad::Var beta;
};

LayerTraceEntry fair_layer_forward(ad::Var h_prev, const GraphOperators& ops,
                                   const BoundLayer& layer, Aggregator kind, double eps,
                                   Activation activation);

struct ForwardTrace {
  std::vector<LayerTraceEntry> layers;
  ad::Var probs;
};

// Hidden layers use ReLU (then dropout in training); the last layer a row
// softmax. `rng` drives dropout only.
ForwardTrace model_forward(ad::Tape& tape, const GraphOperators& ops, const BoundModel& bound,
                           const ModelConfig& config, bool train, std::mt19937_64& rng);

// The undebiased base GNN on the same omega weights.
ad::Var base_forward(ad::Tape& tape, const GraphOperators& ops, const BoundModel& bound,
                     const ModelConfig& config, bool train, std::mt19937_64& rng);

}  // namespace degfair::model
