#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <CLI11.hpp>

#include "degfair/cli.hpp"
#include "degfair/errors.hpp"
#include "degfair/log.hpp"
#include "degfair/metrics.hpp"
#include "degfair/model_io.hpp"

namespace degfair::cli {

namespace {

// Maps library exceptions onto the exit-code contract.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ArgumentError& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kConfigError;
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << '\n';
    return kDivergence;
  } catch (const ParseError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const ConsistencyError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const CorruptFileError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "io error: " << e.what() << '\n';
    return kDataError;
  }
}

void write_text(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << body;
  if (!out) throw ParseError("failed writing " + path.string());
}

std::string history_csv(const train::TrainHistory& h) {
  std::string s = "epoch,total,l1,l2,l3,l4,omega,train_acc,val_acc\n";
  char line[256];
  for (std::size_t e = 0; e < h.epochs.size(); ++e) {
    const auto& r = h.epochs[e];
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.6f,%.6f\n", e + 1,
                  r.loss.total, r.loss.l1, r.loss.l2, r.loss.l3, r.loss.l4, r.loss.omega_reg,
                  r.train_accuracy, r.val_accuracy);
    s += line;
  }
  return s;
}

metrics::FairnessReport evaluate_split(model::ModelParams& params, const graph::Graph& g,
                                       const train::TrainConfig& config,
                                       std::span<const graph::NodeId> test, int r_eval,
                                       double fraction) {
  const auto preds = train::predict(params, g, config);
  const auto degrees = graph::generalized_degree(g, r_eval);
  return metrics::build_report(preds, g.labels(), test, degrees, r_eval, fraction,
                               g.num_classes());
}

void check_eval_args(int r_eval, double fraction) {
  if (r_eval < 1) throw ArgumentError("--r must be >= 1");
  if (!(fraction > 0.0 && fraction <= 0.5)) throw ArgumentError("--fraction must lie in (0, 0.5]");
}

// Linear interpolation between closest ranks on sorted data.
double percentile(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

int cmd_train(const std::filesystem::path& config_path, const TrainOverrides& overrides,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig rc = load_run_config(config_path);
    if (overrides.preset) {
      // Preset replaces the hyperparameters but keeps the base aggregator.
      rc.train = train::preset(*overrides.preset, rc.train.model.base);
      rc.preset = *overrides.preset;
    }
    if (overrides.runs) {
      if (*overrides.runs == 0) throw ConfigError("--runs must be >= 1");
      rc.eval.runs = *overrides.runs;
    }
    if (overrides.seed) rc.train.seed = *overrides.seed;
    if (overrides.out_dir) rc.out_dir = *overrides.out_dir;

    const graph::Graph g = load_data(rc.data);
    std::filesystem::create_directories(rc.out_dir);

    std::vector<metrics::FairnessReport> reports;
    for (std::size_t i = 0; i < rc.eval.runs; ++i) {
      train::TrainConfig cfg = rc.train;
      cfg.seed = rc.train.seed + i;
      const auto split = graph::split_nodes(g.num_nodes(), rc.split, cfg.seed);
      auto result = train::train(g, split, cfg);
      auto report = evaluate_split(result.params, g, cfg, split.test, rc.eval.r, rc.eval.fraction);

      const std::string tag = "_run" + std::to_string(i);
      io::save_model(rc.out_dir / ("model" + tag + ".txt"), result.params, cfg,
                     {g.feature_dim(), g.num_classes(), cfg.seed, rc.split});
      write_text(rc.out_dir / ("report" + tag + ".txt"),
                 "run=" + std::to_string(i) + "\nseed=" + std::to_string(cfg.seed) +
                     "\nbest_epoch=" + std::to_string(result.history.best_epoch + 1) + "\n" +
                     metrics::format_report(report));
      write_text(rc.out_dir / ("history" + tag + ".csv"), history_csv(result.history));
      reports.push_back(std::move(report));
    }

    const std::string agg = metrics::format_aggregate(metrics::aggregate_runs(reports));
    write_text(rc.out_dir / "aggregate.txt", agg);
    out << agg;
    return static_cast<int>(kOk);
  });
}

int cmd_eval(const std::filesystem::path& model_path, const DataSource& data, int r_eval,
             double fraction, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    check_eval_args(r_eval, fraction);
    io::SavedModel saved = io::load_model(model_path);
    const graph::Graph g = load_data(data);
    if (g.feature_dim() != saved.meta.feature_dim) {
      throw ConsistencyError("feature dimension " + std::to_string(g.feature_dim()) +
                             " does not match the model's " +
                             std::to_string(saved.meta.feature_dim));
    }
    if (g.num_classes() > saved.meta.num_classes) {
      throw ConsistencyError("labels use " + std::to_string(g.num_classes()) +
                             " classes but the model predicts " +
                             std::to_string(saved.meta.num_classes));
    }
    const auto split = graph::split_nodes(g.num_nodes(), saved.meta.split_ratios,
                                          saved.meta.split_seed);
    const auto preds = train::predict(saved.params, g, saved.config);
    const auto degrees = graph::generalized_degree(g, r_eval);
    const auto report = metrics::build_report(preds, g.labels(), split.test, degrees, r_eval,
                                              fraction, saved.meta.num_classes);
    out << metrics::format_report(report);
    return static_cast<int>(kOk);
  });
}

int cmd_audit(const std::filesystem::path& pred_path, const std::filesystem::path& edge_path,
              const std::filesystem::path& label_path, int r_eval, double fraction,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    check_eval_args(r_eval, fraction);
    const auto preds = graph::read_labels(pred_path);
    auto labels = graph::read_labels(label_path);
    if (preds.size() != labels.size()) {
      throw ConsistencyError(std::to_string(preds.size()) + " predictions for " +
                             std::to_string(labels.size()) + " labelled nodes");
    }
    std::size_t num_classes = 0;
    for (std::size_t y : labels) num_classes = std::max(num_classes, y + 1);
    for (std::size_t y : preds) num_classes = std::max(num_classes, y + 1);

    const std::size_t n = labels.size();
    const auto edges = graph::read_edges(edge_path);
    const graph::Graph g =
        graph::Graph::from_edges(n, edges, ad::Matrix(n, 0), std::move(labels), num_classes);
    const auto degrees = graph::generalized_degree(g, r_eval);
    const auto universe = graph::all_nodes(g);
    const auto report = metrics::build_report(preds, g.labels(), universe, degrees, r_eval,
                                              fraction, num_classes);
    out << metrics::format_report(report);
    return static_cast<int>(kOk);
  });
}

int cmd_synth(const graph::SynthParams& params, const std::filesystem::path& out_dir,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const graph::Graph g = graph::synth_generate(params);
    std::filesystem::create_directories(out_dir);
    graph::write_edges(out_dir / "edges.txt", g);
    graph::write_features(out_dir / "features.csv", g.features());
    graph::write_labels(out_dir / "labels.txt", g.labels());
    out << "nodes=" << g.num_nodes() << "\nedges=" << g.num_edges() << "\nout=" << out_dir.string()
        << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_degree_stats(const std::filesystem::path& edge_path, int r,
                     const std::optional<std::filesystem::path>& node_count_path,
                     std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (r < 1) throw ArgumentError("--r must be >= 1");
    const auto edges = graph::read_edges(edge_path);
    std::size_t n = 0;
    if (node_count_path) {
      // Labels have one line per node; a feature file works the same way.
      n = node_count_path->extension() == ".csv" ? graph::read_features(*node_count_path).rows()
                                                 : graph::read_labels(*node_count_path).size();
    } else {
      for (const auto& [u, v] : edges) n = std::max({n, u + 1, v + 1});
    }
    if (n == 0) throw ConsistencyError("graph has no nodes");
    const graph::Graph g = graph::Graph::from_edges(n, edges, ad::Matrix(n, 0),
                                                    std::vector<std::size_t>(n, 0), 1);
    auto deg = graph::generalized_degree(g, r);
    std::sort(deg.begin(), deg.end());
    double sum = 0.0;
    for (double d : deg) sum += d;

    out << "nodes=" << n << "\nedges=" << g.num_edges() << "\nr=" << r << '\n';
    out << "min=" << fmt(deg.front()) << "\nmean=" << fmt(sum / static_cast<double>(n))
        << "\nmax=" << fmt(deg.back()) << '\n';
    out << "p25=" << fmt(percentile(deg, 0.25)) << "\np50=" << fmt(percentile(deg, 0.50))
        << "\np75=" << fmt(percentile(deg, 0.75)) << "\np90=" << fmt(percentile(deg, 0.90))
        << '\n';
    out << "default_K=" << fmt(graph::mean_degree(g)) << '\n';
    return static_cast<int>(kOk);
  });
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Degree-fair graph neural network training and auditing"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress warnings");

  auto* train_cmd = app.add_subcommand("train", "Train over one or more seeds from a config file");
  std::filesystem::path config_path;
  std::optional<std::size_t> runs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset_name;
  std::optional<std::filesystem::path> train_out;
  train_cmd->add_option("--config", config_path, "Run configuration (JSON)")->required();
  train_cmd->add_option("--runs", runs, "Number of seeds");
  train_cmd->add_option("--seed", seed, "Base seed; run i uses seed + i");
  train_cmd->add_option("--preset", preset_name, "Hyperparameter preset")
      ->check(CLI::IsMember(train::preset_names()));
  train_cmd->add_option("--out", train_out, "Output directory");

  DataSource data;
  int r_eval = 1;
  double fraction = 0.2;
  auto* eval_cmd = app.add_subcommand("eval", "Report test-split metrics of a saved model");
  std::filesystem::path model_path;
  eval_cmd->add_option("--model", model_path)->required();
  eval_cmd->add_option("--edges", data.edges)->required();
  eval_cmd->add_option("--features", data.features)->required();
  eval_cmd->add_option("--labels", data.labels)->required();
  eval_cmd->add_option("--r", r_eval, "Hop count for the evaluation degree");
  eval_cmd->add_option("--fraction", fraction, "Top/bottom group fraction");

  auto* audit_cmd = app.add_subcommand("audit", "Metrics of a prediction file over all nodes");
  std::filesystem::path pred_path, edge_path, label_path;
  audit_cmd->add_option("--preds", pred_path, "One class index per line")->required();
  audit_cmd->add_option("--edges", edge_path)->required();
  audit_cmd->add_option("--labels", label_path)->required();
  audit_cmd->add_option("--r", r_eval);
  audit_cmd->add_option("--fraction", fraction);

  auto* synth_cmd = app.add_subcommand("synth", "Generate a planted-bias synthetic graph");
  graph::SynthParams sp;
  std::filesystem::path synth_out;
  synth_cmd->add_option("--nodes", sp.num_nodes);
  synth_cmd->add_option("--attach", sp.attach, "Edges per new node");
  synth_cmd->add_option("--label-bias", sp.label_bias, "Probability the label follows degree");
  synth_cmd->add_option("--feat-dim", sp.feature_dim);
  synth_cmd->add_option("--class-separation", sp.class_separation);
  synth_cmd->add_option("--seed", sp.seed);
  synth_cmd->add_option("--out", synth_out)->required();

  auto* stats_cmd = app.add_subcommand("degree-stats", "Generalized degree statistics");
  std::filesystem::path stats_edges;
  std::optional<std::filesystem::path> stats_nodes;
  int stats_r = 1;
  stats_cmd->add_option("--edges", stats_edges)->required();
  stats_cmd->add_option("--r", stats_r);
  stats_cmd->add_option("--labels,--features", stats_nodes, "File fixing the node count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n' << "run with --help for usage\n";
    return kConfigError;
  }
  log::set_quiet(quiet);

  if (*train_cmd) {
    return cmd_train(config_path, {runs, seed, preset_name, train_out}, out, err);
  }
  if (*eval_cmd) return cmd_eval(model_path, data, r_eval, fraction, out, err);
  if (*audit_cmd) return cmd_audit(pred_path, edge_path, label_path, r_eval, fraction, out, err);
  if (*synth_cmd) return cmd_synth(sp, synth_out, out, err);
  return cmd_degree_stats(stats_edges, stats_r, stats_nodes, out, err);
}

}  // namespace degfair::cli
