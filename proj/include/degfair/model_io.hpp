#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "degfair/errors.hpp"
#include "degfair/layers.hpp"
#include "degfair/trainer.hpp"

namespace degfair::io {

inline constexpr int kModelFormatVersion = 1;

struct VersionMismatchError : CorruptFileError {
  using CorruptFileError::CorruptFileError;
};

// Data-shape and split provenance stored alongside the parameters so a saved
// model can be re-evaluated on the split it was trained with.
struct ModelMeta {
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  std::uint64_t split_seed = 0;
  std::array<double, 3> split_ratios{0.6, 0.2, 0.2};
};

struct SavedModel {
  train::TrainConfig config;
  ModelMeta meta;
  model::ModelParams params;
};

// Text format:
//   degfair-model <version>
//   config <json>
//   meta <json>
//   tensor <name> <rows> <cols>      (one per parameter, followed by one line
//   <hex floats ...>                  of %a-formatted values per row)
//   end
void save_model(const std::filesystem::path& path, const model::ModelParams& params,
                const train::TrainConfig& config, const ModelMeta& meta);

// Throws VersionMismatchError for another format version and CorruptFileError
// for anything truncated or malformed.
SavedModel load_model(const std::filesystem::path& path);

}  // namespace degfair::io
