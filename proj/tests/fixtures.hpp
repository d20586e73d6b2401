#pragma once
// Small end-to-end model instances shared by the layer, objective and
// acceptance tests.

#include <algorithm>
#include <random>

#include "degfair/graph.hpp"
#include "degfair/layers.hpp"
#include "degfair/objective.hpp"
#include "degfair/trainer.hpp"

namespace fixture {

using namespace degfair;

struct Instance {
  graph::Graph g;
  train::TrainConfig config;
  model::ModelParams params;
  model::GraphOperators ops;
  std::vector<std::size_t> train_idx, low_train, high_train;
};

// Random biases as well as weights so no parameter sits at a special value.
inline void randomize(model::ModelParams& params, model::Aggregator base, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& ref : params.named(base)) {
    for (double& x : ref.tensor->value.data()) x = u(rng);
  }
}

inline Instance make(std::size_t n, model::Aggregator base, double eps, std::uint64_t seed,
                     std::size_t heads = 2) {
  Instance in{graph::synth_generate({.num_nodes = n, .attach = 2, .feature_dim = 4, .seed = seed}),
              {}, {}, {}, {}, {}, {}};
  in.config.model.base = base;
  in.config.model.hidden_dim = 5;
  in.config.model.gat_heads = base == model::Aggregator::Gat ? heads : 1;
  in.config.model.eps = eps;
  in.config.model.dropout = 0.0;
  in.config.mu = 1.0;
  in.config.lambda = 0.1;
  in.config.seed = seed;

  std::mt19937_64 rng(seed);
  in.params = train::init_params(
      in.config.model, model::layer_dims(in.config.model, in.g.feature_dim(), in.g.num_classes()), rng);
  randomize(in.params, base, seed + 1);

  const auto contrast = train::contrast_groups(in.g, in.config);
  in.ops = model::prepare_operators(in.g, in.config.model, contrast);
  for (std::size_t v = 0; v < n; v += 1) {
    if (v % 4 != 3) in.train_idx.push_back(v);
  }
  for (std::size_t v : in.train_idx) {
    (std::binary_search(contrast.groups[0].begin(), contrast.groups[0].end(), v) ? in.low_train
                                                                                  : in.high_train)
        .push_back(v);
  }
  return in;
}

// Full objective with dropout off.
inline ad::Var full_loss(ad::Tape& t, Instance& in) {
  auto bound = model::bind(t, in.params, in.config.model.base);
  std::mt19937_64 rng(0);
  auto trace = model::model_forward(t, in.ops, bound, in.config.model, false, rng);
  objective::ObjectiveInputs inputs{in.g.labels(), in.train_idx, in.low_train, in.high_train,
                                    in.config.mu, in.config.lambda};
  return objective::compute_objective(t, trace, bound, inputs).total;
}

}  // namespace fixture
