#include "degfair/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "degfair/errors.hpp"
#include "degfair/log.hpp"

namespace degfair::graph {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  return out;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph

Graph Graph::from_edges(std::size_t num_nodes, std::span<const Edge> edges, ad::Matrix features,
                        std::vector<std::size_t> labels, std::size_t num_classes) {
  if (features.rows() != num_nodes) {
    throw ConsistencyError("feature rows (" + std::to_string(features.rows()) +
                           ") != node count (" + std::to_string(num_nodes) + ")");
  }
  if (labels.size() != num_nodes) {
    throw ConsistencyError("label count (" + std::to_string(labels.size()) +
                           ") != node count (" + std::to_string(num_nodes) + ")");
  }
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] >= num_classes) {
      throw ConsistencyError("label " + std::to_string(labels[v]) + " of node " +
                             std::to_string(v) + " is out of range");
    }
  }

  std::vector<std::vector<NodeId>> rows(num_nodes);
  for (const auto& [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes) {
      throw ConsistencyError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                             ") references a node id >= " + std::to_string(num_nodes));
    }
    if (u == v) continue;
    rows[u].push_back(v);
    rows[v].push_back(u);
  }

  Graph g;
  g.offsets_.assign(1, 0);
  g.offsets_.reserve(num_nodes + 1);
  for (auto& row : rows) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    g.neighbors_.insert(g.neighbors_.end(), row.begin(), row.end());
    g.offsets_.push_back(g.neighbors_.size());
  }
  g.features_ = std::move(features);
  g.labels_ = std::move(labels);
  g.num_classes_ = num_classes;
  return g;
}

std::vector<Edge> Graph::edge_list() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (NodeId u = 0; u < num_nodes(); ++u) {
    for (NodeId v : neighbors(u)) {
      if (u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// IO

std::vector<Edge> read_edges(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = trim_cr(line);
    if (s.empty() || s.front() == '#') continue;
    const auto tab = s.find('\t');
    if (tab == std::string_view::npos || s.find('\t', tab + 1) != std::string_view::npos) {
      throw ParseError(where(path, lineno) + ": expected two tab-separated node ids");
    }
    NodeId u = 0;
    NodeId v = 0;
    if (!parse_number(s.substr(0, tab), u) || !parse_number(s.substr(tab + 1), v)) {
      throw ParseError(where(path, lineno) + ": node id is not a non-negative integer");
    }
    edges.emplace_back(u, v);
  }
  return edges;
}

ad::Matrix read_features(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<double> data;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::string_view s = trim_cr(line);
    if (s.empty()) continue;
    ++rows;
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = s.find(',', start);
      const auto field = s.substr(start, comma == std::string_view::npos ? s.npos : comma - start);
      double value = 0.0;
      if (!parse_number(field, value)) {
        throw ParseError(where(path, rows) + ": invalid number '" + std::string(field) + "'");
      }
      data.push_back(value);
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 1) {
      cols = count;
    } else if (count != cols) {
      throw ParseError(where(path, rows) + ": expected " + std::to_string(cols) + " fields, got " +
                       std::to_string(count));
    }
  }
  return ad::Matrix(rows, cols, std::move(data));
}

std::vector<std::size_t> read_labels(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::size_t> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = trim_cr(line);
    if (s.empty()) continue;
    std::size_t y = 0;
    if (!parse_number(s, y)) {
      throw ParseError(where(path, lineno) + ": label is not a non-negative integer");
    }
    labels.push_back(y);
  }
  return labels;
}

void write_edges(const std::filesystem::path& path, const Graph& g) {
  auto out = open_output(path);
  for (const auto& [u, v] : g.edge_list()) out << u << '\t' << v << '\n';
}

void write_features(const std::filesystem::path& path, const ad::Matrix& features) {
  auto out = open_output(path);
  char buf[32];
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (std::size_t c = 0; c < features.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", features(r, c));
      if (c > 0) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

void write_labels(const std::filesystem::path& path, std::span<const std::size_t> labels) {
  auto out = open_output(path);
  for (std::size_t y : labels) out << y << '\n';
}

Graph load_graph(const std::filesystem::path& edge_path, const std::filesystem::path& feature_path,
                 const std::filesystem::path& label_path) {
  auto edges = read_edges(edge_path);
  auto features = read_features(feature_path);
  auto labels = read_labels(label_path);
  const std::size_t n = features.rows();
  std::size_t num_classes = 0;
  for (std::size_t y : labels) num_classes = std::max(num_classes, y + 1);
  return Graph::from_edges(n, edges, std::move(features), std::move(labels), num_classes);
}

// ---------------------------------------------------------------------------
// Degree structure

std::vector<double> generalized_degree(const Graph& g, int r) {
  if (r < 1) throw ArgumentError("hop count r must be >= 1");
  const std::size_t n = g.num_nodes();
  std::vector<double> cur(n, 1.0);
  std::vector<double> next(n);
  for (int step = 0; step < r; ++step) {
    for (NodeId v = 0; v < n; ++v) {
      double acc = 0.0;
      for (NodeId u : g.neighbors(v)) acc += cur[u];
      next[v] = acc;
    }
    cur.swap(next);
  }
  return cur;
}

std::vector<NodeId> local_context(const Graph& g, NodeId v, int r) {
  if (v >= g.num_nodes()) throw ArgumentError("node id out of range");
  if (r < 0) throw ArgumentError("hop count r must be >= 0");
  std::vector<int> dist(g.num_nodes(), -1);
  std::vector<NodeId> frontier{v};
  std::vector<NodeId> reached{v};
  dist[v] = 0;
  for (int hop = 1; hop <= r && !frontier.empty(); ++hop) {
    std::vector<NodeId> next;
    for (NodeId u : frontier) {
      for (NodeId w : g.neighbors(u)) {
        if (dist[w] >= 0) continue;
        dist[w] = hop;
        next.push_back(w);
        reached.push_back(w);
      }
    }
    frontier.swap(next);
  }
  std::sort(reached.begin(), reached.end());
  return reached;
}

double mean_degree(const Graph& g) {
  if (g.num_nodes() == 0) throw ArgumentError("mean degree of an empty graph");
  return 2.0 * static_cast<double>(g.num_edges()) / static_cast<double>(g.num_nodes());
}

std::vector<NodeId> all_nodes(const Graph& g) {
  std::vector<NodeId> out(g.num_nodes());
  std::iota(out.begin(), out.end(), NodeId{0});
  return out;
}

GroupAssignment partition_contrast(std::span<const double> degrees, double threshold,
                                   std::span<const NodeId> universe) {
  GroupAssignment a;
  a.kind = PartitionKind::ThresholdContrast;
  a.params = {threshold};
  a.groups.resize(2);
  for (NodeId v : universe) {
    if (v >= degrees.size()) throw ArgumentError("node outside the degree vector");
    a.groups[degrees[v] <= threshold ? 0 : 1].push_back(v);
  }
  if (a.groups[0].empty() || a.groups[1].empty()) {
    log::warn("structural contrast produced an empty group (K = " + std::to_string(threshold) +
              ")");
  }
  return a;
}

GroupAssignment partition_top_bottom(std::span<const double> degrees, double fraction,
                                     std::span<const NodeId> universe) {
  if (!(fraction > 0.0 && fraction <= 0.5)) {
    throw ArgumentError("top/bottom fraction must lie in (0, 0.5]");
  }
  if (universe.size() < 2) throw ArgumentError("top/bottom split needs at least two nodes");
  std::vector<NodeId> order(universe.begin(), universe.end());
  for (NodeId v : order) {
    if (v >= degrees.size()) throw ArgumentError("node outside the degree vector");
  }
  std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    return degrees[a] != degrees[b] ? degrees[a] < degrees[b] : a < b;
  });
  const auto k = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(order.size()) + 1e-9));

  GroupAssignment a;
  a.kind = PartitionKind::TopBottomFraction;
  a.params = {fraction};
  a.groups.resize(2);
  a.groups[0].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  a.groups[1].assign(order.end() - static_cast<std::ptrdiff_t>(k), order.end());
  std::sort(a.groups[0].begin(), a.groups[0].end());
  std::sort(a.groups[1].begin(), a.groups[1].end());
  return a;
}

GroupAssignment partition_boundaries(std::span<const double> degrees,
                                     std::span<const double> boundaries,
                                     std::span<const NodeId> universe) {
  if (boundaries.size() < 2) throw ArgumentError("need at least two boundaries");
  for (std::size_t i = 1; i < boundaries.size(); ++i) {
    if (!(boundaries[i - 1] < boundaries[i])) {
      throw ArgumentError("boundaries must be strictly increasing");
    }
  }
  GroupAssignment a;
  a.kind = PartitionKind::BoundaryList;
  a.params.assign(boundaries.begin(), boundaries.end());
  a.groups.resize(boundaries.size() - 1);
  for (NodeId v : universe) {
    if (v >= degrees.size()) throw ArgumentError("node outside the degree vector");
    const double d = degrees[v];
    auto it = std::upper_bound(boundaries.begin(), boundaries.end(), d);
    if (it == boundaries.begin() || it == boundaries.end()) continue;
    a.groups[static_cast<std::size_t>(it - boundaries.begin()) - 1].push_back(v);
  }
  return a;
}

// ---------------------------------------------------------------------------
// Splits

NodeSplit split_nodes(std::size_t num_nodes, std::array<double, 3> ratios, std::uint64_t seed) {
  for (double r : ratios) {
    if (!(r > 0.0)) throw ArgumentError("split ratios must be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw ArgumentError("split ratios must sum to 1");
  }
  std::vector<NodeId> order(num_nodes);
  std::iota(order.begin(), order.end(), NodeId{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n = static_cast<double>(num_nodes);
  const auto n_val = static_cast<std::size_t>(std::floor(ratios[1] * n + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(ratios[2] * n + 1e-9));
  const std::size_t n_train = num_nodes - n_val - n_test;

  NodeSplit s;
  s.seed = seed;
  auto it = order.begin();
  s.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  it += static_cast<std::ptrdiff_t>(n_train);
  s.val.assign(it, it + static_cast<std::ptrdiff_t>(n_val));
  it += static_cast<std::ptrdiff_t>(n_val);
  s.test.assign(it, order.end());
  for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

}  // namespace degfair::graph
