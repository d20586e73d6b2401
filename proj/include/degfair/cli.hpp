#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "degfair/graph.hpp"
#include "degfair/trainer.hpp"

namespace degfair::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kDataError = 3,
  kDivergence = 4,
};

struct DataSource {
  std::filesystem::path edges;
  std::filesystem::path features;
  std::filesystem::path labels;
  // When set, the graph is generated in memory instead of read from files.
  std::optional<graph::SynthParams> synth;
};

struct EvalSettings {
  int r = 1;
  double fraction = 0.2;
  std::size_t runs = 1;
};

// JSON run configuration:
//   {
//     "preset": "synth",                       optional, applied first
//     "data": {"edges": ..., "features": ..., "labels": ...}
//          or {"synth": {"nodes", "attach", "label_bias", "feature_dim",
//                        "class_separation", "seed"}},
//     "train": { TrainConfig keys },           optional overrides
//     "split": {"train": 0.6, "val": 0.2, "test": 0.2},
//     "eval": {"r": 1, "fraction": 0.2, "runs": 5},
//     "output": {"dir": "out"}
//   }
// Relative paths resolve against the config file's directory. Unknown keys
// throw ConfigError.
struct RunConfig {
  std::string preset;
  DataSource data;
  train::TrainConfig train;
  std::array<double, 3> split{0.6, 0.2, 0.2};
  EvalSettings eval;
  std::filesystem::path out_dir;
};

RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

graph::Graph load_data(const DataSource& data);

// Command-line overrides for cmd_train.
struct TrainOverrides {
  std::optional<std::size_t> runs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
  std::optional<std::filesystem::path> out_dir;
};

// Run i uses seed + i for initialization, dropout and the node split. Writes
// model_run<i>.txt, report_run<i>.txt, history_run<i>.csv and aggregate.txt.
int cmd_train(const std::filesystem::path& config_path, const TrainOverrides& overrides,
              std::ostream& out, std::ostream& err);

int cmd_eval(const std::filesystem::path& model_path, const DataSource& data, int r_eval,
             double fraction, std::ostream& out, std::ostream& err);

// Metrics for a prediction file over every node of the graph.
int cmd_audit(const std::filesystem::path& pred_path, const std::filesystem::path& edge_path,
              const std::filesystem::path& label_path, int r_eval, double fraction,
              std::ostream& out, std::ostream& err);

// Writes edges.txt, features.csv and labels.txt into out_dir.
int cmd_synth(const graph::SynthParams& params, const std::filesystem::path& out_dir,
              std::ostream& out, std::ostream& err);

// Node count comes from node_count_path (a label or feature file) when given,
// otherwise from the largest id in the edge file.
int cmd_degree_stats(const std::filesystem::path& edge_path, int r,
                     const std::optional<std::filesystem::path>& node_count_path,
                     std::ostream& out, std::ostream& err);

// argv dispatcher used by the degfair executable.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace degfair::cli
