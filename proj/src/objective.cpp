#include "degfair/objective.hpp"

#include "degfair/errors.hpp"
#include "degfair/log.hpp"

namespace degfair::objective {

using ad::Var;

namespace {

Var zero(ad::Tape& tape) { return tape.constant(ad::Matrix(1, 1, 0.0)); }

}  // namespace

LossBreakdown LossTerms::values(double mu, double lambda) const {
  return {l1.scalar(), l2.scalar(), l3.scalar(), l4.scalar(), omega_reg.scalar(),
          total.scalar(), mu, lambda};
}

Var classification_loss(Var probs, std::span<const std::size_t> labels,
                        std::span<const std::size_t> train_idx) {
  if (train_idx.empty()) throw ArgumentError("classification loss over an empty training set");
  std::vector<std::size_t> cols;
  cols.reserve(train_idx.size());
  for (std::size_t v : train_idx) {
    if (v >= labels.size()) throw ArgumentError("training node without a label");
    cols.push_back(labels[v]);
  }
  Var p = ad::pick(probs, train_idx, cols);
  return ad::scale(ad::sum(ad::log(ad::clamp_min(p, kProbabilityFloor))), -1.0);
}

Var fairness_loss(Var outputs, std::span<const std::size_t> low_train,
                  std::span<const std::size_t> high_train) {
  if (low_train.empty() || high_train.empty()) {
    log::warn("fairness loss skipped: a training degree group is empty");
    return zero(*outputs.tape());
  }
  Var low = ad::mean_rows(ad::gather_rows(outputs, low_train));
  Var high = ad::mean_rows(ad::gather_rows(outputs, high_train));
  return ad::sq_norm(ad::sub(low, high));
}

Var debias_constraint(ad::Tape& tape, std::span<const model::LayerTraceEntry> layers,
                      std::span<const std::size_t> low_train,
                      std::span<const std::size_t> high_train) {
  Var acc = zero(tape);
  for (const auto& layer : layers) {
    acc = ad::add(acc, ad::sq_norm(ad::gather_rows(layer.d_high, low_train)));
    acc = ad::add(acc, ad::sq_norm(ad::gather_rows(layer.d_low, high_train)));
  }
  return acc;
}

Var film_constraint(ad::Tape& tape, std::span<const model::LayerTraceEntry> layers,
                    std::span<const std::size_t> train_idx) {
  Var acc = zero(tape);
  for (const auto& layer : layers) {
    acc = ad::add(acc, ad::sq_norm(ad::gather_rows(layer.gamma, train_idx)));
    acc = ad::add(acc, ad::sq_norm(ad::gather_rows(layer.beta, train_idx)));
  }
  return acc;
}

Var weight_regularizer(ad::Tape& tape, std::span<const Var> weights) {
  Var acc = zero(tape);
  for (Var w : weights) acc = ad::add(acc, ad::sq_norm(w));
  return acc;
}

Var total_loss(Var l1, Var l2, Var l3, Var l4, Var omega_reg, double mu, double lambda) {
  if (mu < 0.0 || lambda < 0.0) throw ArgumentError("mu and lambda must be non-negative");
  Var constraints = ad::add(ad::add(l3, l4), omega_reg);
  return ad::add(ad::add(l1, ad::scale(l2, mu)), ad::scale(constraints, lambda));
}

LossTerms compute_objective(ad::Tape& tape, const model::ForwardTrace& trace,
                            const model::BoundModel& bound, const ObjectiveInputs& in) {
  LossTerms t;
  t.l1 = classification_loss(trace.probs, in.labels, in.train_idx);
  // The caller reports an empty group once; skip the per-call warning here.
  t.l2 = in.low_train.empty() || in.high_train.empty()
             ? zero(tape)
             : fairness_loss(trace.probs, in.low_train, in.high_train);
  t.l3 = debias_constraint(tape, trace.layers, in.low_train, in.high_train);
  t.l4 = film_constraint(tape, trace.layers, in.train_idx);
  t.omega_reg = weight_regularizer(tape, bound.weights);
  t.total = total_loss(t.l1, t.l2, t.l3, t.l4, t.omega_reg, in.mu, in.lambda);
  return t;
}

}  // namespace degfair::objective
