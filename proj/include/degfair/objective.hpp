#pragma once

// Training objective:
//   total = L1 + mu * L2 + lambda * (L3 + L4 + Omega)
// L1 cross-entropy summed over training nodes, L2 squared distance between the
// mean outputs of the low/high-degree training groups, L3 the cross-group
// debiasing contexts, L4 the FiLM factors on training nodes, Omega the squared
// weights (biases excluded).

#include <span>
#include <vector>

#include "degfair/autodiff.hpp"
#include "degfair/layers.hpp"

namespace degfair::objective {

inline constexpr double kProbabilityFloor = 1e-12;

struct LossBreakdown {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double l4 = 0.0;
  double omega_reg = 0.0;
  double total = 0.0;
  double mu = 0.0;
  double lambda = 0.0;
};

struct LossTerms {
  ad::Var l1;
  ad::Var l2;
  ad::Var l3;
  ad::Var l4;
  ad::Var omega_reg;
  ad::Var total;

  LossBreakdown values(double mu, double lambda) const;
};

// -sum_{v in train} ln max(p_v[y_v], 1e-12). Throws ArgumentError for an empty set.
ad::Var classification_loss(ad::Var probs, std::span<const std::size_t> labels,
                            std::span<const std::size_t> train_idx);

// ||mean_{low} H - mean_{high} H||^2. Returns 0 (with a warning) when either group is empty.
ad::Var fairness_loss(ad::Var outputs, std::span<const std::size_t> low_train,
                      std::span<const std::size_t> high_train);

// sum_l ( sum_{v in low} ||D(v; theta_1)||^2 + sum_{v in high} ||D(v; theta_0)||^2 ).
ad::Var debias_constraint(ad::Tape& tape, std::span<const model::LayerTraceEntry> layers,
                          std::span<const std::size_t> low_train,
                          std::span<const std::size_t> high_train);

// sum_l sum_{v in train} ||gamma_v||^2 + ||beta_v||^2.
ad::Var film_constraint(ad::Tape& tape, std::span<const model::LayerTraceEntry> layers,
                        std::span<const std::size_t> train_idx);

// Sum of squared entries over the given weight matrices.
ad::Var weight_regularizer(ad::Tape& tape, std::span<const ad::Var> weights);

// Throws ArgumentError for negative mu or lambda.
ad::Var total_loss(ad::Var l1, ad::Var l2, ad::Var l3, ad::Var l4, ad::Var omega_reg, double mu,
                   double lambda);

struct ObjectiveInputs {
  std::span<const std::size_t> labels;
  std::span<const std::size_t> train_idx;
  std::span<const std::size_t> low_train;
  std::span<const std::size_t> high_train;
  double mu = 0.0;
  double lambda = 0.0;
};

LossTerms compute_objective(ad::Tape& tape, const model::ForwardTrace& trace,
                            const model::BoundModel& bound, const ObjectiveInputs& in);

}  // namespace degfair::objective
