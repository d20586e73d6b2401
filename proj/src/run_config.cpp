#include <fstream>

#include "degfair/cli.hpp"
#include "degfair/errors.hpp"

namespace degfair::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

graph::SynthParams parse_synth(const json& j) {
  reject_unknown(j, {"nodes", "attach", "label_bias", "feature_dim", "class_separation", "seed"},
                 "data.synth");
  graph::SynthParams p;
  p.num_nodes = j.value("nodes", p.num_nodes);
  p.attach = j.value("attach", p.attach);
  p.label_bias = j.value("label_bias", p.label_bias);
  p.feature_dim = j.value("feature_dim", p.feature_dim);
  p.class_separation = j.value("class_separation", p.class_separation);
  p.seed = j.value("seed", p.seed);
  return p;
}

}  // namespace

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
  RunConfig rc;
  try {
    reject_unknown(j, {"preset", "data", "train", "split", "eval", "output"}, "config");

    model::Aggregator base = model::Aggregator::Gcn;
    if (j.contains("train") && j["train"].contains("base_gnn")) {
      base = model::parse_aggregator(j["train"]["base_gnn"].get<std::string>());
    }
    rc.preset = j.value("preset", std::string{});
    if (!rc.preset.empty()) rc.train = train::preset(rc.preset, base);
    if (j.contains("train")) train::apply_json(j["train"], rc.train);

    if (!j.contains("data")) throw ConfigError("config is missing 'data'");
    const json& d = j["data"];
    reject_unknown(d, {"edges", "features", "labels", "synth"}, "data");
    if (d.contains("synth")) {
      if (d.contains("edges") || d.contains("features") || d.contains("labels")) {
        throw ConfigError("data: give either 'synth' or file paths, not both");
      }
      rc.data.synth = parse_synth(d["synth"]);
    } else {
      for (const char* key : {"edges", "features", "labels"}) {
        if (!d.contains(key)) throw ConfigError(std::string("data is missing '") + key + "'");
      }
      rc.data.edges = resolve(base_dir, d["edges"].get<std::string>());
      rc.data.features = resolve(base_dir, d["features"].get<std::string>());
      rc.data.labels = resolve(base_dir, d["labels"].get<std::string>());
    }

    if (j.contains("split")) {
      reject_unknown(j["split"], {"train", "val", "test"}, "split");
      rc.split = {j["split"].value("train", 0.6), j["split"].value("val", 0.2),
                  j["split"].value("test", 0.2)};
    }
    if (j.contains("eval")) {
      reject_unknown(j["eval"], {"r", "fraction", "runs"}, "eval");
      rc.eval.r = j["eval"].value("r", rc.eval.r);
      rc.eval.fraction = j["eval"].value("fraction", rc.eval.fraction);
      rc.eval.runs = j["eval"].value("runs", rc.eval.runs);
    }

    if (!j.contains("output")) throw ConfigError("config is missing 'output'");
    reject_unknown(j["output"], {"dir"}, "output");
    if (!j["output"].contains("dir")) throw ConfigError("output is missing 'dir'");
    rc.out_dir = resolve(base_dir, j["output"]["dir"].get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }

  if (rc.eval.runs == 0) throw ConfigError("eval.runs must be >= 1");
  if (rc.eval.r < 1) throw ConfigError("eval.r must be >= 1");
  if (!(rc.eval.fraction > 0.0 && rc.eval.fraction <= 0.5)) {
    throw ConfigError("eval.fraction must lie in (0, 0.5]");
  }
  try {
    train::validate(rc.train);
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

graph::Graph load_data(const DataSource& data) {
  if (data.synth) return graph::synth_generate(*data.synth);
  return graph::load_graph(data.edges, data.features, data.labels);
}

}  // namespace degfair::cli
