#include "degfair/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "degfair/errors.hpp"

namespace degfair::ad {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_tape(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw ArgumentError("operands recorded on different tapes");
  }
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw ArgumentError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                        shape_str(b));
  }
}

// Elementwise unary op with derivative expressed through input and output values.
template <class F, class D>
Var unary(Var a, F f, D dfdx) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return a.tape()->record(std::move(out), {a},
                          [a, dfdx](const Matrix& y, const Matrix& g, std::span<Matrix* const> gi) {
                            const Matrix& x = a.value();
                            Matrix& ga = *gi[0];
                            for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] * dfdx(x[i], y[i]);
                          });
}

}  // namespace

// ---------------------------------------------------------------------------
// Matrix

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ArgumentError("matrix data length " + std::to_string(data_.size()) +
                        " does not match shape " + std::to_string(rows) + "x" +
                        std::to_string(cols));
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ArgumentError("ragged rows in Matrix::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

// ---------------------------------------------------------------------------
// SparseMatrix

Matrix SparseMatrix::multiply(const Matrix& x) const {
  if (x.rows() != cols) throw ArgumentError("spmm: sparse cols do not match dense rows");
  Matrix out(rows, x.cols());
  for (std::size_t r = 0; r < rows; ++r) {
    auto dst = out.row(r);
    for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) {
      const double w = values[k];
      auto src = x.row(indices[k]);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += w * src[c];
    }
  }
  return out;
}

void SparseMatrix::multiply_transposed_add(const Matrix& x, Matrix& out) const {
  for (std::size_t r = 0; r < rows; ++r) {
    auto src = x.row(r);
    for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) {
      const double w = values[k];
      auto dst = out.row(indices[k]);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += w * src[c];
    }
  }
}

// ---------------------------------------------------------------------------
// Var / Tape

const Matrix& Var::value() const {
  if (tape_ == nullptr) throw StateError("Var is not bound to a tape");
  return tape_->node(*this).value;
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ArgumentError("scalar() on " + shape_str(v));
  return v[0];
}

bool Var::requires_grad() const { return tape_->node(*this).needs_grad; }

const Tape::Node& Tape::node(Var v) const { return nodes_.at(v.id_); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, false, false});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::input(Tensor& tensor) {
  if (auto it = bound_.find(&tensor); it != bound_.end()) return Var(this, it->second);
  nodes_.push_back(Node{tensor.value, {}, {}, {}, &tensor, tensor.requires_grad, false});
  const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  bound_.emplace(&tensor, id);
  return Var(this, id);
}

Var Tape::record(Matrix value, std::vector<Var> inputs, Adjoint adjoint) {
  Node n;
  n.value = std::move(value);
  n.adjoint = std::move(adjoint);
  n.inputs.reserve(inputs.size());
  for (Var in : inputs) {
    if (in.tape_ != this) throw ArgumentError("operand recorded on a different tape");
    n.inputs.push_back(in.id_);
    n.needs_grad = n.needs_grad || nodes_[in.id_].needs_grad;
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw ArgumentError("loss recorded on a different tape");
  const Matrix& lv = node(loss).value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ArgumentError("backward requires a 1x1 loss, got " + shape_str(lv));
  }
  if (backward_done_) throw StateError("backward already run on this tape");
  for (const auto& [tensor, id] : bound_) {
    if (tensor->requires_grad && tensor->grad.has_value()) {
      throw StateError("parameter gradient already populated; call zero_grad() first");
    }
  }
  backward_done_ = true;

  nodes_[loss.id_].grad = Matrix(1, 1, 1.0);
  nodes_[loss.id_].has_grad = true;

  std::vector<Matrix*> in_grads;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.needs_grad || !n.adjoint) continue;
    in_grads.assign(n.inputs.size(), nullptr);
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      const std::uint32_t j = n.inputs[k];
      Node& in = nodes_[j];
      if (!in.needs_grad) continue;
      if (!in.has_grad) {
        in.grad = Matrix(in.value.rows(), in.value.cols());
        in.has_grad = true;
      }
      in_grads[k] = &in.grad;
    }
    n.adjoint(n.value, n.grad, in_grads);
  }

  for (const auto& [tensor, id] : bound_) {
    if (!tensor->requires_grad) continue;
    const Node& n = nodes_[id];
    tensor->grad = n.has_grad ? n.grad : Matrix(n.value.rows(), n.value.cols());
  }
}

const Matrix* Tape::grad(Var v) const {
  const Node& n = node(v);
  return n.has_grad ? &n.grad : nullptr;
}

// ---------------------------------------------------------------------------
// Ops

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  if (x.cols() != y.rows()) {
    throw ArgumentError("matmul: shape mismatch " + shape_str(x) + " * " + shape_str(y));
  }
  Matrix out(x.rows(), y.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t k = 0; k < x.cols(); ++k) {
      const double xik = x(i, k);
      if (xik == 0.0) continue;
      auto yr = y.row(k);
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += xik * yr[j];
    }
  }
  return a.tape()->record(
      std::move(out), {a, b}, [a, b](const Matrix&, const Matrix& g, std::span<Matrix* const> gi) {
        const Matrix& x = a.value();
        const Matrix& y = b.value();
        if (gi[0] != nullptr) {
          // dX = G * Y^T
          Matrix& gx = *gi[0];
          for (std::size_t i = 0; i < x.rows(); ++i) {
            auto grow = g.row(i);
            for (std::size_t k = 0; k < x.cols(); ++k) {
              auto yr = y.row(k);
              double acc = 0.0;
              for (std::size_t j = 0; j < grow.size(); ++j) acc += grow[j] * yr[j];
              gx(i, k) += acc;
            }
          }
        }
        if (gi[1] != nullptr) {
          // dY = X^T * G
          Matrix& gy = *gi[1];
          for (std::size_t i = 0; i < x.rows(); ++i) {
            auto grow = g.row(i);
            for (std::size_t k = 0; k < x.cols(); ++k) {
              const double xik = x(i, k);
              if (xik == 0.0) continue;
              auto dst = gy.row(k);
              for (std::size_t j = 0; j < grow.size(); ++j) dst[j] += xik * grow[j];
            }
          }
        }
      });
}

namespace {

Var add_sub(Var a, Var b, double sign, const char* name) {
  require_same_tape(a, b);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  const bool broadcast = !x.same_shape(y) && y.rows() == 1 && y.cols() == x.cols();
  if (!broadcast) require_same_shape(name, x, y);
  Matrix out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto o = out.row(r);
    auto yr = y.row(broadcast ? 0 : r);
    for (std::size_t c = 0; c < o.size(); ++c) o[c] += sign * yr[c];
  }
  return a.tape()->record(std::move(out), {a, b},
                          [broadcast, sign](const Matrix&, const Matrix& g,
                                            std::span<Matrix* const> gi) {
                            if (gi[0] != nullptr) {
                              Matrix& ga = *gi[0];
                              for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                            }
                            if (gi[1] != nullptr) {
                              Matrix& gb = *gi[1];
                              for (std::size_t r = 0; r < g.rows(); ++r) {
                                auto src = g.row(r);
                                auto dst = gb.row(broadcast ? 0 : r);
                                for (std::size_t c = 0; c < src.size(); ++c) dst[c] += sign * src[c];
                              }
                            }
                          });
}

}  // namespace

Var add(Var a, Var b) { return add_sub(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_sub(a, b, -1.0, "sub"); }

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  require_same_shape("mul", x, y);
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return a.tape()->record(std::move(out), {a, b},
                          [a, b](const Matrix&, const Matrix& g, std::span<Matrix* const> gi) {
                            const Matrix& x = a.value();
                            const Matrix& y = b.value();
                            if (gi[0] != nullptr) {
                              for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * y[i];
                            }
                            if (gi[1] != nullptr) {
                              for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] += g[i] * x[i];
                            }
                          });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double slope) {
  return unary(a, [slope](double x) { return x > 0.0 ? x : slope * x; },
               [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var row_softmax(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto o = out.row(r);
    if (in.empty()) continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      z += o[c];
    }
    for (double& v : o) v /= z;
  }
  return a.tape()->record(std::move(out), {a},
                          [](const Matrix& y, const Matrix& g, std::span<Matrix* const> gi) {
                            Matrix& ga = *gi[0];
                            for (std::size_t r = 0; r < y.rows(); ++r) {
                              auto yr = y.row(r);
                              auto gr = g.row(r);
                              double dot = 0.0;
                              for (std::size_t c = 0; c < yr.size(); ++c) dot += gr[c] * yr[c];
                              auto dst = ga.row(r);
                              for (std::size_t c = 0; c < yr.size(); ++c) dst[c] += yr[c] * (gr[c] - dot);
                            }
                          });
}

Var log(Var a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var clamp_min(Var a, double floor) {
  return unary(a, [floor](double x) { return x < floor ? floor : x; },
               [floor](double x, double) { return x < floor ? 0.0 : 1.0; });
}

Var sum(Var a) {
  const Matrix& x = a.value();
  double s = 0.0;
  for (double v : x.data()) s += v;
  return a.tape()->record(Matrix(1, 1, s), {a},
                          [](const Matrix&, const Matrix& g, std::span<Matrix* const> gi) {
                            for (double& v : gi[0]->data()) v += g[0];
                          });
}

Var mean_rows(Var a) {
  const Matrix& x = a.value();
  if (x.rows() == 0) throw ArgumentError("mean_rows of a matrix with no rows");
  Matrix out(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    for (std::size_t c = 0; c < xr.size(); ++c) out[c] += xr[c];
  }
  const double inv = 1.0 / static_cast<double>(x.rows());
  for (double& v : out.data()) v *= inv;
  return a.tape()->record(std::move(out), {a},
                          [inv](const Matrix&, const Matrix& g, std::span<Matrix* const> gi) {
                            Matrix& ga = *gi[0];
                            for (std::size_t r = 0; r < ga.rows(); ++r) {
                              auto dst = ga.row(r);
                              for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += inv * g[c];
                            }
                          });
}

Var sq_norm(Var a) {
  const Matrix& x = a.value();
  double s = 0.0;
  for (double v : x.data()) s += v * v;
  return a.tape()->record(Matrix(1, 1, s), {a},
                          [a](const Matrix&, const Matrix& g, std::span<Matrix* const> gi) {
                            const Matrix& x = a.value();
                            Matrix& ga = *gi[0];
                            for (std::size_t i = 0; i < x.size(); ++i) ga[i] += 2.0 * g[0] * x[i];
                          });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  const Matrix& x = a.value();
  Matrix out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows()) throw ArgumentError("gather_rows: row index out of range");
    auto src = x.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return a.tape()->record(std::move(out), {a},
                          [idx = std::move(idx)](const Matrix&, const Matrix& g,
                                                 std::span<Matrix* const> gi) {
                            Matrix& ga = *gi[0];
                            for (std::size_t i = 0; i < idx.size(); ++i) {
                              auto src = g.row(i);
                              auto dst = ga.row(idx[i]);
                              for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
                            }
                          });
}

Var mul_rows(Var a, std::span<const double> weights) {
  const Matrix& x = a.value();
  if (weights.size() != x.rows()) throw ArgumentError("mul_rows: weight count != rows");
  Matrix out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (double& v : out.row(r)) v *= weights[r];
  }
  std::vector<double> w(weights.begin(), weights.end());
  return a.tape()->record(std::move(out), {a},
                          [w = std::move(w)](const Matrix&, const Matrix& g,
                                             std::span<Matrix* const> gi) {
                            Matrix& ga = *gi[0];
                            for (std::size_t r = 0; r < g.rows(); ++r) {
                              auto src = g.row(r);
                              auto dst = ga.row(r);
                              for (std::size_t c = 0; c < src.size(); ++c) dst[c] += w[r] * src[c];
                            }
                          });
}

Var pick(Var a, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
  const Matrix& x = a.value();
  if (rows.size() != cols.size()) throw ArgumentError("pick: rows/cols length mismatch");
  Matrix out(rows.size(), 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows() || cols[i] >= x.cols()) throw ArgumentError("pick: index out of range");
    out[i] = x(rows[i], cols[i]);
  }
  std::vector<std::size_t> r(rows.begin(), rows.end());
  std::vector<std::size_t> c(cols.begin(), cols.end());
  return a.tape()->record(std::move(out), {a},
                          [r = std::move(r), c = std::move(c)](const Matrix&, const Matrix& g,
                                                               std::span<Matrix* const> gi) {
                            for (std::size_t i = 0; i < r.size(); ++i) (*gi[0])(r[i], c[i]) += g[i];
                          });
}

Var mul_const(Var a, Matrix factor) {
  const Matrix& x = a.value();
  require_same_shape("mul_const", x, factor);
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * factor[i];
  return a.tape()->record(std::move(out), {a},
                          [f = std::move(factor)](const Matrix&, const Matrix& g,
                                                  std::span<Matrix* const> gi) {
                            for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * f[i];
                          });
}

Var spmm(std::shared_ptr<const SparseMatrix> s, Var x) {
  if (!s) throw ArgumentError("spmm: null sparse operand");
  Matrix out = s->multiply(x.value());
  return x.tape()->record(std::move(out), {x},
                          [s = std::move(s)](const Matrix&, const Matrix& g,
                                             std::span<Matrix* const> gi) {
                            s->multiply_transposed_add(g, *gi[0]);
                          });
}

Var dropout(Var x, double p, bool train, std::mt19937_64& rng) {
  if (!(p >= 0.0) || p >= 1.0) throw ArgumentError("dropout rate must lie in [0, 1)");
  if (!train || p == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  const double survivor = 1.0 / (1.0 - p);
  Matrix mask(x.rows(), x.cols());
  for (double& m : mask.data()) m = keep(rng) ? survivor : 0.0;
  return mul_const(x, std::move(mask));
}

// ---------------------------------------------------------------------------
// Finite-difference verifier

double fd_check(const std::function<Var(Tape&)>& program, std::span<Tensor* const> params,
                FdCheckOptions options) {
  for (Tensor* p : params) p->zero_grad();
  {
    Tape tape;
    Var loss = program(tape);
    tape.backward(loss);
  }
  auto evaluate = [&program] {
    Tape tape;
    return program(tape).scalar();
  };

  std::mt19937_64 rng(options.seed);
  double worst = 0.0;
  for (Tensor* p : params) {
    const std::size_t n = p->value.size();
    if (n == 0) continue;
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n > options.coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.coords_per_param);
    }
    const Matrix ad = p->grad.value_or(Matrix(p->value.rows(), p->value.cols()));
    for (std::size_t i : coords) {
      const double saved = p->value[i];
      p->value[i] = saved + options.eps;
      const double up = evaluate();
      p->value[i] = saved - options.eps;
      const double down = evaluate();
      p->value[i] = saved;
      const double fd = (up - down) / (2.0 * options.eps);
      const double err = std::abs(ad[i] - fd) / std::max(1e-8, std::abs(ad[i]) + std::abs(fd));
      worst = std::max(worst, err);
    }
  }
  for (Tensor* p : params) p->zero_grad();
  return worst;
}

}  // namespace degfair::ad
