#include <doctest.h>

#include <cmath>
#include <random>

#include "degfair/autodiff.hpp"
#include "degfair/errors.hpp"
#include "degfair/graph_ops.hpp"
#include "degfair/optim.hpp"

using namespace degfair;
using namespace degfair::ad;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (double& x : m.data()) x = u(rng);
  return m;
}

// Contract an arbitrary output against fixed random weights so every output
// entry receives a distinct upstream gradient.
Var contract(Tape& t, Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(out, t.constant(random_matrix(out.rows(), out.cols(), rng))));
}

std::shared_ptr<SparseMatrix> random_sparse(std::size_t rows, std::size_t cols,
                                            std::mt19937_64& rng) {
  auto s = std::make_shared<SparseMatrix>();
  s->rows = rows;
  s->cols = cols;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (rng() % 3 == 0) {
        s->indices.push_back(j);
        s->values.push_back(u(rng));
      }
    }
    s->offsets.push_back(s->indices.size());
  }
  return s;
}

std::shared_ptr<EdgeSegments> random_segments(std::size_t rows, std::size_t targets,
                                              std::mt19937_64& rng) {
  auto seg = std::make_shared<EdgeSegments>();
  for (std::size_t v = 0; v < rows; ++v) {
    const std::size_t k = 1 + rng() % 4;
    for (std::size_t e = 0; e < k; ++e) seg->targets.push_back(rng() % targets);
    seg->offsets.push_back(seg->targets.size());
  }
  return seg;
}

}  // namespace

TEST_CASE("softmax and relu fixtures") {
  Tape t;
  auto s = row_softmax(t.constant(Matrix::from_rows({{0, 0}, {std::log(2.0), 0}}))).value();
  CHECK(s(0, 0) == 0.5);
  CHECK(s(0, 1) == 0.5);
  CHECK(s(1, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(s(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  auto r = relu(t.constant(Matrix::from_rows({{-1, 0, 2}}))).value();
  CHECK(r == Matrix::from_rows({{0, 0, 2}}));
}

TEST_CASE("softmax rows are positive and sum to one") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Tape t;
    auto m = random_matrix(1 + rng() % 6, 1 + rng() % 6, rng, -50.0, 50.0);
    auto s = row_softmax(t.constant(m)).value();
    for (std::size_t i = 0; i < s.rows(); ++i) {
      double total = 0.0;
      for (double x : s.row(i)) {
        CHECK(x > 0.0);
        total += x;
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("analytic gradients") {
  Tensor w{Matrix::from_rows({{1, -2}, {3, 4}})};
  {
    Tape t;
    t.backward(sum(t.input(w)));
    CHECK(*w.grad == Matrix(2, 2, 1.0));
  }
  w.zero_grad();
  {
    Tape t;
    t.backward(sq_norm(t.input(w)));
    CHECK(*w.grad == Matrix::from_rows({{2, -4}, {6, 8}}));
  }
}

TEST_CASE("tape misuse") {
  Tensor w{Matrix(2, 2, 1.0)};
  Tape t;
  Var loss = sum(t.input(w));
  t.backward(loss);
  CHECK_THROWS_AS(t.backward(loss), StateError);
  Tape t2;
  CHECK_THROWS_AS(t2.backward(sum(t2.input(w))), StateError);  // grad not cleared
  w.zero_grad();
  Tape t3;
  CHECK_THROWS_AS(t3.backward(t3.input(w)), ArgumentError);  // non-scalar loss
  Tape t4;
  CHECK_THROWS_AS(matmul(t4.constant(Matrix(2, 3)), t4.constant(Matrix(2, 3))), ArgumentError);
  CHECK_THROWS_AS(log(t4.constant(Matrix(1, 1, 0.0))), DomainError);
}

TEST_CASE("fd_check fixtures") {
  Tensor w{Matrix::from_rows({{0.3, -1.2}, {2.0, 0.5}})};
  std::vector<Tensor*> ps{&w};
  auto quad = [&](Tape& t) { return sq_norm(add_scalar(t.input(w), 0.7)); };
  CHECK(fd_check(quad, ps) < 1e-7);
  auto constant = [&](Tape& t) {
    Var x = t.input(w);
    return sum(scale(x, 0.0));
  };
  CHECK(fd_check(constant, ps) == 0.0);
  CHECK_FALSE(w.grad.has_value());
}

TEST_CASE("every op passes finite differences") {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t n = 2 + rng() % 5, m = 1 + rng() % 4, k = 1 + rng() % 4;
    const std::uint64_t seed = rng();
    Tensor a{random_matrix(n, m, rng)};
    Tensor b{random_matrix(m, k, rng)};
    Tensor c{random_matrix(n, m, rng)};
    Tensor rowv{random_matrix(1, m, rng)};
    Tensor pos{random_matrix(n, m, rng, 0.5, 2.0)};
    Tensor col{random_matrix(n, 1, rng)};
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n + 2; ++i) rows.push_back(rng() % n);
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < rows.size(); ++i) cols.push_back(rng() % m);
    std::vector<double> weights;
    for (std::size_t i = 0; i < n; ++i) weights.push_back(std::uniform_real_distribution<>(-2, 2)(rng));
    Matrix factor = random_matrix(n, m, rng);
    Matrix head = random_matrix(k, 3, rng);
    auto sp = random_sparse(n + 1, n, rng);
    auto seg = random_segments(n, n, rng);
    Tensor logits{random_matrix(seg->num_edges(), 1, rng)};

    std::vector<std::pair<const char*, std::function<Var(Tape&)>>> programs = {
        {"matmul", [&](Tape& t) { return contract(t, matmul(t.input(a), t.input(b)), seed); }},
        {"add", [&](Tape& t) { return contract(t, add(t.input(a), t.input(c)), seed); }},
        {"add_row", [&](Tape& t) { return contract(t, add(t.input(a), t.input(rowv)), seed); }},
        {"sub_row", [&](Tape& t) { return contract(t, sub(t.input(a), t.input(rowv)), seed); }},
        {"mul", [&](Tape& t) { return contract(t, mul(t.input(a), t.input(c)), seed); }},
        {"scale", [&](Tape& t) { return contract(t, scale(t.input(a), -1.7), seed); }},
        {"add_scalar", [&](Tape& t) { return contract(t, add_scalar(t.input(a), 0.3), seed); }},
        {"relu", [&](Tape& t) { return contract(t, relu(t.input(a)), seed); }},
        {"leaky_relu", [&](Tape& t) { return contract(t, leaky_relu(t.input(a)), seed); }},
        {"softmax", [&](Tape& t) { return contract(t, row_softmax(t.input(a)), seed); }},
        {"log", [&](Tape& t) { return contract(t, log(t.input(pos)), seed); }},
        {"clamp_min", [&](Tape& t) { return contract(t, clamp_min(t.input(a), 0.1), seed); }},
        {"mean_rows", [&](Tape& t) { return contract(t, mean_rows(t.input(a)), seed); }},
        {"sq_norm", [&](Tape& t) { return sq_norm(t.input(a)); }},
        {"gather", [&](Tape& t) { return contract(t, gather_rows(t.input(a), rows), seed); }},
        {"mul_rows", [&](Tape& t) { return contract(t, mul_rows(t.input(a), weights), seed); }},
        {"pick", [&](Tape& t) { return contract(t, pick(t.input(a), rows, cols), seed); }},
        {"mul_const", [&](Tape& t) { return contract(t, mul_const(t.input(a), factor), seed); }},
        {"spmm", [&](Tape& t) { return contract(t, spmm(sp, t.input(a)), seed); }},
        {"segment_softmax",
         [&](Tape& t) { return contract(t, segment_softmax(t.input(logits), seg), seed); }},
        {"edge_sum",
         [&](Tape& t) {
           return contract(t, edge_weighted_sum(t.input(logits), t.input(a), seg), seed);
         }},
        {"dropout",
         [&](Tape& t) {
           std::mt19937_64 drng(seed);
           return contract(t, dropout(t.input(a), 0.4, true, drng), seed);
         }},
        {"composite",
         [&](Tape& t) {
           Var h = relu(add(matmul(t.input(a), t.input(b)), matmul(t.input(col), t.constant(Matrix(1, k, 0.5)))));
           Var p = row_softmax(matmul(spmm(sp, h), t.constant(head)));
           return contract(t, log(clamp_min(p, 1e-12)), seed);
         }},
    };
    std::vector<Tensor*> ps{&a, &b, &c, &rowv, &pos, &col, &logits};
    for (auto& [name, prog] : programs) {
      const double err = fd_check(prog, ps, {.seed = seed});
      INFO(std::string(name) << " trial " << trial);
      CHECK(err < 1e-5);
      worst = std::max(worst, err);
    }
  }
  MESSAGE("worst relative error " << worst);
}

TEST_CASE("backward is linear") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor w{random_matrix(3, 4, rng)};
    Matrix x = random_matrix(5, 3, rng);
    auto f = [&](Tape& t, Var v) { return sum(row_softmax(matmul(t.constant(x), v))); };
    auto g = [&](Tape&, Var v) { return sq_norm(relu(v)); };
    const double a = 1.3, b = -0.6;
    auto grad_of = [&](auto&& prog) {
      Tape t;
      t.backward(prog(t, t.input(w)));
      Matrix out = *w.grad;
      w.zero_grad();
      return out;
    };
    Matrix gf = grad_of(f), gg = grad_of(g);
    Matrix both = grad_of([&](Tape& t, Var v) { return add(scale(f(t, v), a), scale(g(t, v), b)); });
    for (std::size_t i = 0; i < both.size(); ++i) CHECK(std::abs(both[i] - (a * gf[i] + b * gg[i])) < 1e-10);
  }
}

TEST_CASE("dropout") {
  std::mt19937_64 rng(1);
  Tape t;
  Var x = t.constant(random_matrix(20, 10, rng));
  CHECK(dropout(x, 0.0, true, rng).id() == x.id());
  CHECK(dropout(x, 0.9, false, rng).value() == x.value());
  Var y = dropout(x, 0.5, true, rng);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < x.value().size(); ++i) {
    const double out = y.value()[i];
    if (out != 0.0) {
      CHECK(out == 2.0 * x.value()[i]);
      ++kept;
    }
  }
  CHECK(kept > 60);
  CHECK(kept < 140);
  CHECK_THROWS_AS(dropout(x, 1.0, true, rng), ArgumentError);
}

TEST_CASE("adam") {
  Tensor p{Matrix(1, 1, 1.0)};
  std::vector<Tensor*> ps{&p};
  OptimState st;
  p.grad = Matrix(1, 1, 0.0);
  adam_step(ps, st);
  CHECK(p.value(0, 0) == 1.0);

  Tensor q{Matrix(1, 1, 1.0)};
  std::vector<Tensor*> qs{&q};
  OptimState sq;
  q.grad = Matrix(1, 1, 1.0);
  adam_step(qs, sq);
  // m̂ = 1, v̂ = 1, so the step is lr / (1 + eps).
  CHECK(q.value(0, 0) == doctest::Approx(1.0 - 0.01 / (1.0 + 1e-8)).epsilon(1e-14));

  q.grad.reset();
  CHECK_THROWS_AS(adam_step(qs, sq), StateError);
  Tensor r{Matrix(2, 1, 0.0)};
  r.grad = Matrix(2, 1, 1.0);
  std::vector<Tensor*> rs{&r};
  CHECK_THROWS_AS(adam_step(rs, sq), StateError);
}

TEST_CASE("adam trajectories are deterministic") {
  auto run = [] {
    std::mt19937_64 rng(4);
    Tensor w{random_matrix(3, 3, rng)};
    Matrix x = random_matrix(6, 3, rng);
    std::vector<Tensor*> ps{&w};
    OptimState st;
    for (int i = 0; i < 50; ++i) {
      Tape t;
      t.backward(sum(row_softmax(matmul(t.constant(x), t.input(w)))));
      adam_step(ps, st);
      w.zero_grad();
    }
    return w.value;
  };
  CHECK(run() == run());
}
