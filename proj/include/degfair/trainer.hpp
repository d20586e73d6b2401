#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "degfair/graph.hpp"
#include "degfair/layers.hpp"
#include "degfair/objective.hpp"

namespace degfair::train {

struct TrainConfig {
  model::ModelConfig model;
  // Structural-contrast threshold K; unset means the mean one-hop degree.
  std::optional<double> threshold;
  double mu = 0.0;
  double lambda = 1e-4;
  double lr = 0.01;
  std::size_t epochs = 1000;
  // Stop once validation accuracy has not improved for this many epochs.
  std::size_t patience = 100;
  std::uint64_t seed = 0;
};

// Named hyperparameter sets: "chameleon", "squirrel", "emnlp" and "synth".
// A GAT base switches the first-layer width to 16 and uses three heads.
TrainConfig preset(std::string_view name, model::Aggregator base = model::Aggregator::Gcn);
std::vector<std::string> preset_names();

// Unknown keys throw ConfigError; missing keys keep the values already in `config`.
void apply_json(const nlohmann::json& j, TrainConfig& config);
nlohmann::json to_json(const TrainConfig& config);

// Throws ArgumentError when eps, mu or lambda is negative, or epochs is 0.
void validate(const TrainConfig& config);

struct EpochRecord {
  objective::LossBreakdown loss;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
};

// Glorot-uniform weights, zero biases, deterministic in the generator state.
model::ModelParams init_params(const model::ModelConfig& config, std::span<const std::size_t> dims,
                               std::mt19937_64& rng);

double resolve_threshold(const graph::Graph& g, const TrainConfig& config);

// S0/S1 over the whole node set.
graph::GroupAssignment contrast_groups(const graph::Graph& g, const TrainConfig& config);

struct TrainResult {
  model::ModelParams params;
  TrainHistory history;
};

// Full-graph training with Adam; returns the parameters of the epoch with the
// best validation accuracy (earliest on ties). Throws DivergenceError on a
// non-finite loss.
TrainResult train(const graph::Graph& g, const graph::NodeSplit& split, const TrainConfig& config);

// Row argmax, ties to the lowest index.
std::vector<std::size_t> argmax_rows(const ad::Matrix& probs);

// Class probabilities with dropout disabled.
ad::Matrix predict_proba(model::ModelParams& params, const graph::Graph& g,
                         const TrainConfig& config);
std::vector<std::size_t> predict(model::ModelParams& params, const graph::Graph& g,
                                 const TrainConfig& config);

}  // namespace degfair::train
