#include "degfair/layers.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "degfair/errors.hpp"

namespace degfair::model {

using ad::Matrix;
using ad::Var;

std::string_view to_string(Aggregator a) {
  switch (a) {
    case Aggregator::Gcn: return "gcn";
    case Aggregator::Sage: return "sage";
    case Aggregator::Gat: return "gat";
  }
  return "gcn";
}

Aggregator parse_aggregator(std::string_view name) {
  if (name == "gcn") return Aggregator::Gcn;
  if (name == "sage") return Aggregator::Sage;
  if (name == "gat") return Aggregator::Gat;
  throw ArgumentError("unknown base GNN '" + std::string(name) + "' (expected gcn, sage or gat)");
}

std::vector<std::size_t> layer_dims(const ModelConfig& config, std::size_t feature_dim,
                                    std::size_t num_classes) {
  if (config.num_layers == 0) throw ArgumentError("num_layers must be >= 1");
  std::vector<std::size_t> dims{feature_dim};
  for (std::size_t l = 1; l < config.num_layers; ++l) dims.push_back(config.hidden_dim);
  dims.push_back(num_classes);
  return dims;
}

std::size_t encoding_width(std::size_t layer_width) { return layer_width + layer_width % 2; }

// ---------------------------------------------------------------------------
// Parameters

std::vector<ParamRef> ModelParams::named(Aggregator base) {
  std::vector<ParamRef> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    LayerParams& p = layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    if (base == Aggregator::Gat) {
      for (std::size_t h = 0; h < p.heads.size(); ++h) {
        const std::string hp = pre + "head" + std::to_string(h) + ".";
        out.push_back({hp + "weight", &p.heads[h].weight, true});
        out.push_back({hp + "att_src", &p.heads[h].att_src, true});
        out.push_back({hp + "att_dst", &p.heads[h].att_dst, true});
      }
    } else {
      out.push_back({pre + "weight", &p.weight, true});
      if (base == Aggregator::Sage) out.push_back({pre + "neigh_weight", &p.neigh_weight, true});
    }
    out.push_back({pre + "bias", &p.bias, false});
    auto add_linear = [&](const char* name, Linear& f) {
      out.push_back({pre + name + ".weight", &f.weight, true});
      out.push_back({pre + name + ".bias", &f.bias, false});
    };
    add_linear("debias0", p.debias0);
    add_linear("debias1", p.debias1);
    add_linear("film_gamma", p.film_gamma);
    add_linear("film_beta", p.film_beta);
  }
  return out;
}

std::vector<ad::Tensor*> ModelParams::tensors(Aggregator base) {
  std::vector<ad::Tensor*> out;
  for (auto& ref : named(base)) out.push_back(ref.tensor);
  return out;
}

// ---------------------------------------------------------------------------
// Graph operators

std::shared_ptr<ad::SparseMatrix> gcn_normalized_adjacency(const graph::Graph& g) {
  auto s = std::make_shared<ad::SparseMatrix>();
  const std::size_t n = g.num_nodes();
  s->rows = s->cols = n;
  s->offsets.assign(1, 0);
  for (graph::NodeId v = 0; v < n; ++v) {
    const double dv = static_cast<double>(g.degree(v)) + 1.0;
    auto nb = g.neighbors(v);
    bool self_done = false;
    auto push = [&](graph::NodeId u) {
      const double du = static_cast<double>(g.degree(u)) + 1.0;
      s->indices.push_back(u);
      s->values.push_back(1.0 / std::sqrt(dv * du));
    };
    for (graph::NodeId u : nb) {
      if (!self_done && v < u) {
        push(v);
        self_done = true;
      }
      push(u);
    }
    if (!self_done) push(v);
    s->offsets.push_back(s->indices.size());
  }
  return s;
}

std::shared_ptr<ad::SparseMatrix> neighbor_mean_matrix(const graph::Graph& g) {
  auto s = std::make_shared<ad::SparseMatrix>();
  const std::size_t n = g.num_nodes();
  s->rows = s->cols = n;
  s->offsets.assign(1, 0);
  for (graph::NodeId v = 0; v < n; ++v) {
    auto nb = g.neighbors(v);
    const double w = nb.empty() ? 0.0 : 1.0 / static_cast<double>(nb.size());
    for (graph::NodeId u : nb) {
      s->indices.push_back(u);
      s->values.push_back(w);
    }
    s->offsets.push_back(s->indices.size());
  }
  return s;
}

std::shared_ptr<ad::SparseMatrix> context_pool_matrix(const graph::Graph& g, int r) {
  if (r < 1) throw ArgumentError("context radius must be >= 1");
  auto s = std::make_shared<ad::SparseMatrix>();
  const std::size_t n = g.num_nodes();
  s->rows = s->cols = n;
  s->offsets.assign(1, 0);
  for (graph::NodeId v = 0; v < n; ++v) {
    std::vector<graph::NodeId> ctx;
    if (r == 1) {
      auto nb = g.neighbors(v);
      ctx.assign(nb.begin(), nb.end());
      ctx.insert(std::lower_bound(ctx.begin(), ctx.end(), v), v);
    } else {
      ctx = graph::local_context(g, v, r);
    }
    const double w = 1.0 / static_cast<double>(ctx.size());
    for (graph::NodeId u : ctx) {
      s->indices.push_back(u);
      s->values.push_back(w);
    }
    s->offsets.push_back(s->indices.size());
  }
  return s;
}

std::shared_ptr<ad::EdgeSegments> attention_segments(const graph::Graph& g) {
  auto seg = std::make_shared<ad::EdgeSegments>();
  seg->offsets.assign(1, 0);
  for (graph::NodeId v = 0; v < g.num_nodes(); ++v) {
    auto nb = g.neighbors(v);
    auto split = std::lower_bound(nb.begin(), nb.end(), v);
    seg->targets.insert(seg->targets.end(), nb.begin(), split);
    seg->targets.push_back(v);
    seg->targets.insert(seg->targets.end(), split, nb.end());
    seg->offsets.push_back(seg->targets.size());
  }
  return seg;
}

GraphOperators prepare_operators(const graph::Graph& g, const ModelConfig& config,
                                 const graph::GroupAssignment& contrast) {
  const std::size_t n = g.num_nodes();
  if (contrast.groups.size() != 2) throw ArgumentError("contrast must have exactly two groups");
  GraphOperators ops;
  ops.num_nodes = n;
  ops.features = g.features();
  ops.in_low.assign(n, 0.0);
  ops.in_high.assign(n, 0.0);
  for (std::size_t grp = 0; grp < 2; ++grp) {
    auto& mask = grp == 0 ? ops.in_low : ops.in_high;
    for (graph::NodeId v : contrast.groups[grp]) {
      if (v >= n) throw ArgumentError("contrast group references a node outside the graph");
      if (ops.in_low[v] != 0.0 || ops.in_high[v] != 0.0) {
        throw ArgumentError("contrast groups overlap at node " + std::to_string(v));
      }
      mask[v] = 1.0;
    }
  }
  for (graph::NodeId v = 0; v < n; ++v) {
    if (ops.in_low[v] == 0.0 && ops.in_high[v] == 0.0) {
      throw ArgumentError("contrast groups do not cover node " + std::to_string(v));
    }
  }

  switch (config.base) {
    case Aggregator::Gcn: ops.gcn_norm = gcn_normalized_adjacency(g); break;
    case Aggregator::Sage: ops.neighbor_mean = neighbor_mean_matrix(g); break;
    case Aggregator::Gat: {
      auto seg = attention_segments(g);
      for (std::size_t v = 0; v < seg->num_rows(); ++v) {
        ops.attention_rows.insert(ops.attention_rows.end(), seg->offsets[v + 1] - seg->offsets[v],
                                  v);
      }
      ops.attention_edges = std::move(seg);
      break;
    }
  }
  ops.context_pool = context_pool_matrix(g, config.r_context);

  ops.degrees.resize(n);
  for (graph::NodeId v = 0; v < n; ++v) ops.degrees[v] = static_cast<double>(g.degree(v));
  ops.distinct_degrees = ops.degrees;
  std::sort(ops.distinct_degrees.begin(), ops.distinct_degrees.end());
  ops.distinct_degrees.erase(std::unique(ops.distinct_degrees.begin(), ops.distinct_degrees.end()),
                             ops.distinct_degrees.end());
  ops.degree_slot.resize(n);
  for (graph::NodeId v = 0; v < n; ++v) {
    ops.degree_slot[v] = static_cast<std::size_t>(
        std::lower_bound(ops.distinct_degrees.begin(), ops.distinct_degrees.end(), ops.degrees[v]) -
        ops.distinct_degrees.begin());
  }
  return ops;
}

// ---------------------------------------------------------------------------
// Building blocks

std::vector<double> degree_encoding(double degree, std::size_t width) {
  if (width % 2 != 0) throw ArgumentError("degree encoding width must be even");
  if (degree < 0.0) throw ArgumentError("degree must be non-negative");
  std::vector<double> out(width);
  for (std::size_t i = 0; 2 * i < width; ++i) {
    const double freq = std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(width));
    out[2 * i] = std::sin(degree / freq);
    out[2 * i + 1] = std::cos(degree / freq);
  }
  return out;
}

Matrix degree_encoding(std::span<const double> degrees, std::size_t width) {
  Matrix out(degrees.size(), width);
  for (std::size_t v = 0; v < degrees.size(); ++v) {
    const auto row = degree_encoding(degrees[v], width);
    std::copy(row.begin(), row.end(), out.row(v).begin());
  }
  return out;
}

BoundModel bind(ad::Tape& tape, ModelParams& params, Aggregator base) {
  BoundModel m;
  auto bind_linear = [&](Linear& f) {
    BoundLinear b{tape.input(f.weight), tape.input(f.bias)};
    m.weights.push_back(b.weight);
    return b;
  };
  for (LayerParams& p : params.layers) {
    BoundLayer b;
    if (base == Aggregator::Gat) {
      for (AttentionHead& h : p.heads) {
        BoundHead bh{tape.input(h.weight), tape.input(h.att_src), tape.input(h.att_dst)};
        m.weights.insert(m.weights.end(), {bh.weight, bh.att_src, bh.att_dst});
        b.heads.push_back(bh);
      }
    } else {
      b.weight = tape.input(p.weight);
      m.weights.push_back(b.weight);
      if (base == Aggregator::Sage) {
        b.neigh_weight = tape.input(p.neigh_weight);
        m.weights.push_back(b.neigh_weight);
      }
    }
    b.bias = tape.input(p.bias);
    b.debias0 = bind_linear(p.debias0);
    b.debias1 = bind_linear(p.debias1);
    b.film_gamma = bind_linear(p.film_gamma);
    b.film_beta = bind_linear(p.film_beta);
    m.layers.push_back(std::move(b));
  }
  return m;
}

Var linear(Var x, const BoundLinear& f) { return ad::add(ad::matmul(x, f.weight), f.bias); }

Var context_embedding(Var h_prev, std::shared_ptr<const ad::SparseMatrix> pool) {
  return ad::spmm(std::move(pool), h_prev);
}

FilmFactors film_factors(Var delta, const BoundLinear& gamma, const BoundLinear& beta) {
  return {linear(delta, gamma), linear(delta, beta)};
}

Var debias_context(Var context, Var gamma, Var beta, const BoundLinear& theta) {
  return ad::add(ad::mul(ad::add_scalar(gamma, 1.0), linear(context, theta)), beta);
}

Var base_aggregate(Var h_prev, const GraphOperators& ops, const BoundLayer& layer,
                   Aggregator kind) {
  Var out;
  switch (kind) {
    case Aggregator::Gcn:
      if (!ops.gcn_norm) throw ConfigError("GCN operators were not prepared");
      out = ad::spmm(ops.gcn_norm, ad::matmul(h_prev, layer.weight));
      break;
    case Aggregator::Sage: {
      if (!ops.neighbor_mean) throw ConfigError("SAGE operators were not prepared");
      Var self = ad::matmul(h_prev, layer.weight);
      Var neigh = ad::matmul(ad::spmm(ops.neighbor_mean, h_prev), layer.neigh_weight);
      out = ad::add(self, neigh);
      break;
    }
    case Aggregator::Gat: {
      if (!ops.attention_edges) throw ConfigError("GAT operators were not prepared");
      if (layer.heads.empty()) throw ConfigError("GAT layer has no attention heads");
      for (const BoundHead& head : layer.heads) {
        Var z = ad::matmul(h_prev, head.weight);
        Var s_dst = ad::matmul(z, head.att_dst);
        Var s_src = ad::matmul(z, head.att_src);
        Var logits = ad::leaky_relu(ad::add(ad::gather_rows(s_dst, ops.attention_rows),
                                            ad::gather_rows(s_src, ops.attention_edges->targets)),
                                    0.2);
        Var alpha = ad::segment_softmax(logits, ops.attention_edges);
        Var h = ad::edge_weighted_sum(alpha, z, ops.attention_edges);
        out = out.tape() == nullptr ? h : ad::add(out, h);
      }
      if (layer.heads.size() > 1) out = ad::scale(out, 1.0 / static_cast<double>(layer.heads.size()));
      break;
    }
  }
  return ad::add(out, layer.bias);
}

namespace {

Var activate(Var x, Activation a) {
  switch (a) {
    case Activation::Relu: return ad::relu(x);
    case Activation::Softmax: return ad::row_softmax(x);
    case Activation::Identity: return x;
  }
  return x;
}

}  // namespace

LayerTraceEntry fair_layer_forward(Var h_prev, const GraphOperators& ops, const BoundLayer& layer,
                                   Aggregator kind, double eps, Activation activation) {
  if (ops.in_low.size() != ops.num_nodes || ops.in_high.size() != ops.num_nodes) {
    throw ArgumentError("contrast groups do not cover the node set");
  }
  ad::Tape& tape = *h_prev.tape();
  const std::size_t width = layer.film_gamma.weight.rows();
  Var delta = tape.constant(degree_encoding(ops.distinct_degrees, width));
  FilmFactors film = film_factors(delta, layer.film_gamma, layer.film_beta);
  Var gamma = ad::gather_rows(film.gamma, ops.degree_slot);
  Var beta = ad::gather_rows(film.beta, ops.degree_slot);

  Var context = context_embedding(h_prev, ops.context_pool);
  Var d_low = debias_context(context, gamma, beta, layer.debias0);
  Var d_high = debias_context(context, gamma, beta, layer.debias1);

  Var pre = base_aggregate(h_prev, ops, layer, kind);
  if (eps != 0.0) {
    Var selected = ad::add(ad::mul_rows(d_low, ops.in_low), ad::mul_rows(d_high, ops.in_high));
    pre = ad::add(pre, ad::scale(selected, eps));
  }
  return {activate(pre, activation), d_low, d_high, gamma, beta};
}

ForwardTrace model_forward(ad::Tape& tape, const GraphOperators& ops, const BoundModel& bound,
                           const ModelConfig& config, bool train, std::mt19937_64& rng) {
  ForwardTrace trace;
  Var h = tape.constant(ops.features);
  if (config.input_dropout) h = ad::dropout(h, config.dropout, train, rng);
  for (std::size_t l = 0; l < bound.layers.size(); ++l) {
    const bool last = l + 1 == bound.layers.size();
    LayerTraceEntry entry = fair_layer_forward(h, ops, bound.layers[l], config.base, config.eps,
                                               last ? Activation::Softmax : Activation::Relu);
    trace.layers.push_back(entry);
    h = last ? entry.h : ad::dropout(entry.h, config.dropout, train, rng);
  }
  trace.probs = h;
  return trace;
}

Var base_forward(ad::Tape& tape, const GraphOperators& ops, const BoundModel& bound,
                 const ModelConfig& config, bool train, std::mt19937_64& rng) {
  Var h = tape.constant(ops.features);
  if (config.input_dropout) h = ad::dropout(h, config.dropout, train, rng);
  for (std::size_t l = 0; l < bound.layers.size(); ++l) {
    const bool last = l + 1 == bound.layers.size();
    Var pre = base_aggregate(h, ops, bound.layers[l], config.base);
    h = last ? ad::row_softmax(pre) : ad::dropout(ad::relu(pre), config.dropout, train, rng);
  }
  return h;
}

}  // namespace degfair::model
