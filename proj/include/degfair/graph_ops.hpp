#pragma once

// Edge-indexed ops used by attention aggregation.

#include <memory>
#include <vector>

#include "degfair/autodiff.hpp"

namespace degfair::ad {

// Row-grouped edge list: edges offsets[v]..offsets[v+1] belong to row v and
// point at targets[e].
struct EdgeSegments {
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> targets;

  std::size_t num_rows() const { return offsets.size() - 1; }
  std::size_t num_edges() const { return targets.size(); }
};

// Softmax of an E x 1 logit column within each row's segment.
Var segment_softmax(Var logits, std::shared_ptr<const EdgeSegments> seg);

// out[v] = sum over edges e of row v of weights[e] * z[targets[e]].
Var edge_weighted_sum(Var weights, Var z, std::shared_ptr<const EdgeSegments> seg);

}  // namespace degfair::ad
