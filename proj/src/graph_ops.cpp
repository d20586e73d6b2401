#include "degfair/graph_ops.hpp"

#include <algorithm>
#include <cmath>

#include "degfair/errors.hpp"

namespace degfair::ad {

Var segment_softmax(Var logits, std::shared_ptr<const EdgeSegments> seg) {
  const Matrix& x = logits.value();
  if (x.cols() != 1 || x.rows() != seg->num_edges()) {
    throw ArgumentError("segment_softmax: logits must be num_edges x 1");
  }
  Matrix out(x.rows(), 1);
  for (std::size_t v = 0; v < seg->num_rows(); ++v) {
    const std::size_t lo = seg->offsets[v];
    const std::size_t hi = seg->offsets[v + 1];
    if (lo == hi) continue;
    double mx = x[lo];
    for (std::size_t e = lo + 1; e < hi; ++e) mx = std::max(mx, x[e]);
    double z = 0.0;
    for (std::size_t e = lo; e < hi; ++e) {
      out[e] = std::exp(x[e] - mx);
      z += out[e];
    }
    for (std::size_t e = lo; e < hi; ++e) out[e] /= z;
  }
  return logits.tape()->record(
      std::move(out), {logits},
      [seg = std::move(seg)](const Matrix& y, const Matrix& g, std::span<Matrix* const> gi) {
        Matrix& gx = *gi[0];
        for (std::size_t v = 0; v < seg->num_rows(); ++v) {
          const std::size_t lo = seg->offsets[v];
          const std::size_t hi = seg->offsets[v + 1];
          double dot = 0.0;
          for (std::size_t e = lo; e < hi; ++e) dot += g[e] * y[e];
          for (std::size_t e = lo; e < hi; ++e) gx[e] += y[e] * (g[e] - dot);
        }
      });
}

Var edge_weighted_sum(Var weights, Var z, std::shared_ptr<const EdgeSegments> seg) {
  const Matrix& w = weights.value();
  const Matrix& zv = z.value();
  if (w.cols() != 1 || w.rows() != seg->num_edges()) {
    throw ArgumentError("edge_weighted_sum: weights must be num_edges x 1");
  }
  for (std::size_t t : seg->targets) {
    if (t >= zv.rows()) throw ArgumentError("edge_weighted_sum: target out of range");
  }
  Matrix out(seg->num_rows(), zv.cols());
  for (std::size_t v = 0; v < seg->num_rows(); ++v) {
    auto dst = out.row(v);
    for (std::size_t e = seg->offsets[v]; e < seg->offsets[v + 1]; ++e) {
      auto src = zv.row(seg->targets[e]);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += w[e] * src[c];
    }
  }
  return weights.tape()->record(
      std::move(out), {weights, z},
      [weights, z, seg = std::move(seg)](const Matrix&, const Matrix& g,
                                         std::span<Matrix* const> gi) {
        const Matrix& w = weights.value();
        const Matrix& zv = z.value();
        for (std::size_t v = 0; v < seg->num_rows(); ++v) {
          auto gv = g.row(v);
          for (std::size_t e = seg->offsets[v]; e < seg->offsets[v + 1]; ++e) {
            const std::size_t t = seg->targets[e];
            if (gi[0] != nullptr) {
              auto zr = zv.row(t);
              double dot = 0.0;
              for (std::size_t c = 0; c < gv.size(); ++c) dot += gv[c] * zr[c];
              (*gi[0])[e] += dot;
            }
            if (gi[1] != nullptr) {
              auto dst = gi[1]->row(t);
              for (std::size_t c = 0; c < gv.size(); ++c) dst[c] += w[e] * gv[c];
            }
          }
        }
      });
}

}  // namespace degfair::ad
