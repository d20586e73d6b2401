#include <doctest.h>

#include <fstream>
#include <sstream>

#include "degfair/cli.hpp"
#include "oracles.hpp"

using namespace degfair;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "degfair");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& body) { std::ofstream(p, std::ios::binary) << body; }

// Everything after the first key=value lines that cmd_train prepends.
std::string report_body(const std::string& report) {
  return report.substr(report.find("accuracy="));
}

std::string tiny_config(const fs::path& dir, const std::string& extra = "") {
  return R"({"preset": "synth",
    "data": {"synth": {"nodes": 60, "feature_dim": 4, "seed": 2}},
    "train": {"epochs": 15, "patience": 15)" +
         extra + R"(},
    "eval": {"runs": 1},
    "output": {"dir": ")" +
         (dir / "out").string() + "\"}}";
}

}  // namespace

TEST_CASE("train: config errors exit with 2") {
  auto dir = oracle::scratch_dir("cli_cfg");
  auto r = run({"train", "--config", (dir / "missing.json").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("missing.json") != std::string::npos);

  write(dir / "bad.json", R"({"data": {"synth": {}}, "output": {"dir": "o"}, "colour": 1})");
  r = run({"train", "--config", (dir / "bad.json").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("colour") != std::string::npos);

  write(dir / "neg.json", tiny_config(dir, R"(, "mu": -1)"));
  CHECK(run({"train", "--config", (dir / "neg.json").string()}).code == 2);

  CHECK(run({"train"}).code == 2);
  CHECK(run({"bogus"}).code == 2);
  CHECK(run({"train", "--config", "x", "--preset", "cora"}).code == 2);
}

TEST_CASE("train, then eval reproduces the report") {
  auto dir = oracle::scratch_dir("cli_train");
  write(dir / "cfg.json", tiny_config(dir));
  auto r = run({"train", "--config", (dir / "cfg.json").string(), "--runs", "2"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("accuracy_mean=") != std::string::npos);
  CHECK(r.out == slurp(dir / "out" / "aggregate.txt"));
  for (int i = 0; i < 2; ++i) {
    const auto tag = "_run" + std::to_string(i);
    CHECK(fs::exists(dir / "out" / ("model" + tag + ".txt")));
    CHECK(fs::exists(dir / "out" / ("history" + tag + ".csv")));
  }

  // Materialize the same synthetic graph for eval.
  REQUIRE(run({"synth", "--nodes", "60", "--feat-dim", "4", "--seed", "2", "--out",
               (dir / "data").string()})
              .code == 0);
  const auto data = dir / "data";
  auto e = run({"eval", "--model", (dir / "out" / "model_run1.txt").string(), "--edges",
                (data / "edges.txt").string(), "--features", (data / "features.csv").string(),
                "--labels", (data / "labels.txt").string()});
  REQUIRE(e.code == 0);
  CHECK(e.out == report_body(slurp(dir / "out" / "report_run1.txt")));

  auto e2 = run({"eval", "--model", (dir / "out" / "model_run0.txt").string(), "--edges",
                 (data / "edges.txt").string(), "--features", (data / "features.csv").string(),
                 "--labels", (data / "labels.txt").string(), "--r", "2", "--fraction", "0.3"});
  REQUIRE(e2.code == 0);
  CHECK(e2.out.find("r_eval=2") != std::string::npos);
  CHECK(e2.out.find("fraction=0.3000") != std::string::npos);

  // Features with a different width.
  REQUIRE(run({"synth", "--nodes", "60", "--feat-dim", "3", "--seed", "2", "--out",
               (dir / "narrow").string()})
              .code == 0);
  auto bad = run({"eval", "--model", (dir / "out" / "model_run0.txt").string(), "--edges",
                  (data / "edges.txt").string(), "--features",
                  (dir / "narrow" / "features.csv").string(), "--labels",
                  (data / "labels.txt").string()});
  CHECK(bad.code == 3);

  write(dir / "broken.txt", "degfair-model 1\nconfig {\n");
  CHECK(run({"eval", "--model", (dir / "broken.txt").string(), "--edges",
             (data / "edges.txt").string(), "--features", (data / "features.csv").string(),
             "--labels", (data / "labels.txt").string()})
            .code == 3);
  CHECK(run({"eval", "--model", (dir / "out" / "model_run0.txt").string(), "--edges",
             (data / "edges.txt").string(), "--features", (data / "features.csv").string(),
             "--labels", (data / "labels.txt").string(), "--r", "0"})
            .code == 2);
}

TEST_CASE("train output is byte-identical across reruns") {
  auto dir = oracle::scratch_dir("cli_repeat");
  write(dir / "cfg.json", tiny_config(dir));
  const auto cfg = (dir / "cfg.json").string();
  REQUIRE(run({"train", "--config", cfg, "--out", (dir / "a").string()}).code == 0);
  REQUIRE(run({"train", "--config", cfg, "--out", (dir / "b").string()}).code == 0);
  for (const char* f : {"aggregate.txt", "report_run0.txt", "model_run0.txt", "history_run0.csv"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
}

TEST_CASE("train runs override") {
  auto dir = oracle::scratch_dir("cli_runs");
  write(dir / "cfg.json", tiny_config(dir, R"(, "epochs": 3, "patience": 3)"));
  auto r = run({"train", "--config", (dir / "cfg.json").string(), "--runs", "5", "--seed", "9"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("runs=5") != std::string::npos);
  for (int i = 0; i < 5; ++i)
    CHECK(fs::exists(dir / "out" / ("model_run" + std::to_string(i) + ".txt")));
  CHECK(slurp(dir / "out" / "report_run4.txt").find("seed=13") != std::string::npos);
}

TEST_CASE("audit") {
  auto dir = oracle::scratch_dir("cli_audit");
  // Path 0-1-2-3 plus a star on 4: degrees 1,2,2,1,3,1,1,1.
  write(dir / "edges.txt", "0\t1\n1\t2\n2\t3\n4\t5\n4\t6\n4\t7\n");
  write(dir / "labels.txt", "0\n0\n1\n1\n0\n1\n0\n1\n");
  const auto edges = (dir / "edges.txt").string(), labels = (dir / "labels.txt").string();

  auto same = run({"audit", "--preds", labels, "--edges", edges, "--labels", labels});
  REQUIRE(same.code == 0);
  CHECK(same.out.find("accuracy=1.000000") != std::string::npos);
  CHECK(same.out.find("delta_deo=0.000000") != std::string::npos);

  // fraction 0.25 -> 2 nodes per group. Bottom by (degree, id): 0, 3.
  // Top: 2, 4. Predictions: 0,3 -> 1,1; 2,4 -> 0,1.
  write(dir / "preds.txt", "1\n0\n0\n1\n1\n1\n0\n1\n");
  auto r = run({"audit", "--preds", (dir / "preds.txt").string(), "--edges", edges, "--labels",
                labels, "--fraction", "0.25"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("g0_size=2") != std::string::npos);
  // P(0|G0)=0, P(0|G1)=0.5 on both classes.
  CHECK(r.out.find("delta_dsp=0.500000") != std::string::npos);
  // Class 0 recall: node 0 vs node 4, both 0. Class 1: node 3 (1) vs node 2 (0).
  CHECK(r.out.find("delta_deo=0.500000") != std::string::npos);
  CHECK(r.out.find("accuracy=0.625000") != std::string::npos);

  write(dir / "short.txt", "0\n1\n");
  CHECK(run({"audit", "--preds", (dir / "short.txt").string(), "--edges", edges, "--labels",
             labels})
            .code == 3);
  write(dir / "junk.txt", "0\nx\n0\n0\n0\n0\n0\n0\n");
  auto j = run({"audit", "--preds", (dir / "junk.txt").string(), "--edges", edges, "--labels",
                labels});
  CHECK(j.code == 3);
  CHECK(j.err.find("junk.txt") != std::string::npos);
  CHECK(run({"audit", "--preds", labels, "--edges", edges, "--labels", labels, "--fraction", "0.7"})
            .code == 2);
}

TEST_CASE("synth writes loadable files") {
  auto dir = oracle::scratch_dir("cli_synth");
  REQUIRE(run({"synth", "--nodes", "50", "--attach", "3", "--seed", "4", "--out",
               dir.string()})
              .code == 0);
  auto g = graph::load_graph(dir / "edges.txt", dir / "features.csv", dir / "labels.txt");
  auto h = graph::synth_generate({.num_nodes = 50, .attach = 3, .seed = 4});
  CHECK(g.num_nodes() == 50);
  CHECK(g.edge_list() == h.edge_list());
  CHECK(std::vector<std::size_t>(g.labels().begin(), g.labels().end()) ==
        std::vector<std::size_t>(h.labels().begin(), h.labels().end()));
  CHECK(g.features() == h.features());
}

TEST_CASE("degree-stats") {
  auto dir = oracle::scratch_dir("cli_stats");
  write(dir / "tri.txt", "0\t1\n1\t2\n2\t0\n");
  auto r = run({"degree-stats", "--edges", (dir / "tri.txt").string(), "--r", "2"});
  REQUIRE(r.code == 0);
  for (const char* key : {"min=", "mean=", "max=", "p25=", "p50=", "p75=", "p90="})
    CHECK(r.out.find(std::string(key) + "4.000000") != std::string::npos);

  write(dir / "e.txt", "0\t1\n1\t2\n2\t3\n3\t4\n0\t2\n");
  write(dir / "labels.txt", "0\n0\n0\n0\n0\n0\n");
  auto s = run({"degree-stats", "--edges", (dir / "e.txt").string(), "--labels",
                (dir / "labels.txt").string()});
  REQUIRE(s.code == 0);
  CHECK(s.out.find("nodes=6") != std::string::npos);
  // 2|E|/|V| = 10/6.
  CHECK(s.out.find("mean=1.666667") != std::string::npos);
  CHECK(s.out == run({"degree-stats", "--edges", (dir / "e.txt").string(), "--labels",
                      (dir / "labels.txt").string()})
                     .out);
  write(dir / "sp.txt", "0 1\n");
  CHECK(run({"degree-stats", "--edges", (dir / "sp.txt").string()}).code == 3);
}
