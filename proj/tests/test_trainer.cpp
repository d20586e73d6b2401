#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "degfair/errors.hpp"
#include "degfair/log.hpp"
#include "degfair/model_io.hpp"
#include "degfair/trainer.hpp"
#include "oracles.hpp"

using namespace degfair;
using namespace degfair::train;
using ad::Matrix;

namespace {

graph::Graph small_graph(std::uint64_t seed, std::size_t n = 60) {
  return graph::synth_generate({.num_nodes = n, .attach = 2, .feature_dim = 8, .seed = seed});
}

TrainConfig quick(model::Aggregator base = model::Aggregator::Gcn) {
  TrainConfig c = preset("synth", base);
  c.epochs = 30;
  c.patience = 30;
  return c;
}

bool same_params(model::ModelParams& a, model::ModelParams& b, model::Aggregator base) {
  auto x = a.tensors(base), y = b.tensors(base);
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i]->value == y[i]->value)) return false;
  return true;
}

}  // namespace

TEST_CASE("presets") {
  auto ch = preset("chameleon");
  CHECK(ch.model.hidden_dim == 32);
  CHECK(ch.model.eps == 1.0);
  CHECK(ch.mu == 0.001);
  auto sq = preset("squirrel");
  CHECK(sq.model.hidden_dim == 32);
  CHECK(sq.model.eps == 0.01);
  CHECK(sq.mu == 0.0001);
  auto em = preset("emnlp");
  CHECK(em.model.hidden_dim == 16);
  CHECK(em.model.eps == 0.001);
  CHECK(em.mu == 0.01);
  for (const auto& name : {"chameleon", "squirrel", "emnlp"}) {
    auto p = preset(name);
    CHECK(p.lambda == 0.0001);
    CHECK(p.lr == 0.01);
    CHECK(p.model.dropout == 0.5);
  }
  auto sy = preset("synth");
  CHECK(sy.mu == 1000.0);
  CHECK(sy.lambda == 0.01);
  CHECK(sy.epochs == 200);
  auto gat = preset("chameleon", model::Aggregator::Gat);
  CHECK(gat.model.gat_heads == 3);
  CHECK_THROWS_AS(preset("cora"), ConfigError);
}

TEST_CASE("json config round trip and validation") {
  TrainConfig c = preset("squirrel", model::Aggregator::Sage);
  c.threshold = 3.5;
  TrainConfig d;
  apply_json(to_json(c), d);
  CHECK(to_json(d) == to_json(c));
  CHECK(d.model.base == model::Aggregator::Sage);
  CHECK(*d.threshold == 3.5);

  TrainConfig e;
  apply_json(nlohmann::json{{"K", "mean"}, {"mu", 0.5}}, e);
  CHECK_FALSE(e.threshold.has_value());
  CHECK(e.mu == 0.5);
  CHECK_THROWS_AS(apply_json(nlohmann::json{{"learning_rate", 0.1}}, e), ConfigError);
  e.mu = -1.0;
  CHECK_THROWS_AS(validate(e), ArgumentError);
}

TEST_CASE("parameter initialization") {
  model::ModelConfig cfg;
  cfg.base = model::Aggregator::Gat;
  cfg.gat_heads = 2;
  auto dims = model::layer_dims(cfg, 7, 3);
  std::mt19937_64 a(5), b(5);
  auto p = init_params(cfg, dims, a);
  auto q = init_params(cfg, dims, b);
  CHECK(same_params(p, q, cfg.base));
  for (const auto& ref : p.named(cfg.base)) {
    CAPTURE(ref.name);
    const auto& m = ref.tensor->value;
    if (ref.is_weight) {
      const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
      for (double x : m.data()) CHECK(std::abs(x) <= bound);
    } else {
      for (double x : m.data()) CHECK(x == 0.0);
    }
  }
}

TEST_CASE("zero learning rate keeps the initial parameters") {
  auto g = small_graph(1);
  auto split = graph::split_nodes(g.num_nodes(), {0.6, 0.2, 0.2}, 1);
  TrainConfig c = quick();
  c.epochs = 1;
  c.lr = 0.0;
  auto r = train::train(g, split, c);
  std::mt19937_64 rng(c.seed);
  auto init = init_params(c.model, model::layer_dims(c.model, g.feature_dim(), g.num_classes()), rng);
  CHECK(same_params(r.params, init, c.model.base));
}

TEST_CASE("training reduces the classification loss") {
  auto g = small_graph(2);
  auto split = graph::split_nodes(g.num_nodes(), {0.6, 0.2, 0.2}, 2);
  TrainConfig c;
  c.epochs = 200;
  c.patience = 200;
  auto r = train::train(g, split, c);
  REQUIRE(r.history.epochs.size() == 200);
  CHECK(r.history.epochs.back().loss.l1 < r.history.epochs.front().loss.l1);
}

TEST_CASE("training is deterministic") {
  for (auto base : {model::Aggregator::Gcn, model::Aggregator::Sage, model::Aggregator::Gat}) {
    auto g = small_graph(3);
    auto split = graph::split_nodes(g.num_nodes(), {0.6, 0.2, 0.2}, 3);
    auto c = quick(base);
    auto a = train::train(g, split, c);
    auto b = train::train(g, split, c);
    REQUIRE(a.history.epochs.size() == b.history.epochs.size());
    for (std::size_t e = 0; e < a.history.epochs.size(); ++e) {
      CHECK(a.history.epochs[e].loss.total == b.history.epochs[e].loss.total);
      CHECK(a.history.epochs[e].val_accuracy == b.history.epochs[e].val_accuracy);
    }
    CHECK(same_params(a.params, b.params, base));
  }
}

TEST_CASE("planted-bias training loss falls over 200 epochs") {
  double first = 0.0, last = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto g = graph::synth_generate({.num_nodes = 300, .label_bias = 0.9, .seed = seed});
    auto split = graph::split_nodes(g.num_nodes(), {0.6, 0.2, 0.2}, seed);
    auto c = preset("synth");
    c.seed = seed;
    auto r = train::train(g, split, c);
    REQUIRE(r.history.epochs.size() >= 200);
    first += r.history.epochs.front().loss.total;
    last += r.history.epochs[199].loss.total;
  }
  CHECK(last < first);
}

TEST_CASE("non-finite features raise a divergence error") {
  auto g0 = small_graph(4, 20);
  Matrix x = g0.features();
  x(3, 1) = std::numeric_limits<double>::quiet_NaN();
  auto g = graph::Graph::from_edges(20, g0.edge_list(), x,
                                    {g0.labels().begin(), g0.labels().end()}, 2);
  auto split = graph::split_nodes(20, {0.6, 0.2, 0.2}, 0);
  CHECK_THROWS_AS(train::train(g, split, quick()), DivergenceError);
}

TEST_CASE("argmax") {
  CHECK(argmax_rows(Matrix::from_rows({{0.1, 0.7, 0.2}})) == std::vector<std::size_t>{1});
  CHECK(argmax_rows(Matrix::from_rows({{0.5, 0.5}})) == std::vector<std::size_t>{0});
}

TEST_CASE("model file round trip") {
  auto dir = oracle::scratch_dir("model_io");
  for (auto base : {model::Aggregator::Gcn, model::Aggregator::Sage, model::Aggregator::Gat}) {
    auto g = small_graph(6);
    auto split = graph::split_nodes(g.num_nodes(), {0.6, 0.2, 0.2}, 6);
    auto c = quick(base);
    c.threshold = 4.0;
    auto r = train::train(g, split, c);
    io::ModelMeta meta{g.feature_dim(), g.num_classes(), 6, {0.6, 0.2, 0.2}};
    const auto path = dir / "m.txt";
    io::save_model(path, r.params, c, meta);

    auto loaded = io::load_model(path);
    CHECK(to_json(loaded.config) == to_json(c));
    CHECK(loaded.meta.split_seed == 6);
    CHECK(loaded.meta.feature_dim == g.feature_dim());
    CHECK(predict_proba(loaded.params, g, loaded.config) == predict_proba(r.params, g, c));

    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    std::ofstream(dir / "cut.txt") << text.substr(0, text.size() / 2);
    CHECK_THROWS_AS(io::load_model(dir / "cut.txt"), CorruptFileError);
    std::ofstream(dir / "v2.txt") << "degfair-model 2\n" << text.substr(text.find('\n') + 1);
    CHECK_THROWS_AS(io::load_model(dir / "v2.txt"), io::VersionMismatchError);
  }
  CHECK_THROWS_AS(io::load_model(dir / "absent.txt"), CorruptFileError);
}
