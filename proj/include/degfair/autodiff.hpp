#pragma once

// Dense fp64 matrices with a reverse-mode tape.
//
// A Tape owns every intermediate value of one forward pass. Parameters live
// outside the tape as Tensors and are bound with Tape::input(); after
// Tape::backward() their gradients are written to Tensor::grad.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

namespace degfair::ad {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool operator==(const Matrix& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Learnable parameter: value plus an optional gradient buffer.
struct Tensor {
  Tensor() = default;
  explicit Tensor(Matrix v, bool trainable = true) : value(std::move(v)), requires_grad(trainable) {}

  Matrix value;
  bool requires_grad = true;
  std::optional<Matrix> grad;

  void zero_grad() { grad.reset(); }
};

// Constant CSR operand for spmm. Column indices are sorted within each row.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> indices;
  std::vector<double> values;

  Matrix multiply(const Matrix& x) const;
  // this^T * x, accumulated into out.
  void multiply_transposed_add(const Matrix& x, Matrix& out) const;
};

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const;
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  std::uint32_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Adjoint of one recorded op. in_grads[i] is null when input i needs no gradient;
// otherwise it is a zero-initialised (or partially accumulated) buffer to add into.
using Adjoint = std::function<void(const Matrix& out_value, const Matrix& out_grad,
                                   std::span<Matrix* const> in_grads)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Binds a parameter. Binding the same tensor twice returns the same Var.
  Var input(Tensor& tensor);

  Var record(Matrix value, std::vector<Var> inputs, Adjoint adjoint);

  // Seeds d(loss)/d(loss) = 1 and replays adjoints in reverse execution order.
  // Throws ArgumentError for a non-scalar loss, StateError when called twice or
  // when a bound tensor already carries a gradient.
  void backward(Var loss);

  // Gradient of a recorded value after backward(); null if it received none.
  const Matrix* grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::uint32_t> inputs;
    Adjoint adjoint;
    Tensor* bound = nullptr;
    bool needs_grad = false;
    bool has_grad = false;
  };

  const Node& node(Var v) const;

  std::deque<Node> nodes_;
  std::unordered_map<Tensor*, std::uint32_t> bound_;
  bool backward_done_ = false;
};

// Core op suite. All ops check shapes and throw ArgumentError on mismatch.
Var matmul(Var a, Var b);
// Elementwise a + b; b may also be a 1 x cols row broadcast over a's rows.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var relu(Var a);
Var leaky_relu(Var a, double slope = 0.2);
Var row_softmax(Var a);
// Throws DomainError on any non-positive entry.
Var log(Var a);
Var clamp_min(Var a, double floor);
Var sum(Var a);
Var mean_rows(Var a);
Var sq_norm(Var a);
Var gather_rows(Var a, std::span<const std::size_t> rows);
// Row r scaled by the constant weights[r].
Var mul_rows(Var a, std::span<const double> weights);
// k x 1 column of a(rows[i], cols[i]).
Var pick(Var a, std::span<const std::size_t> rows, std::span<const std::size_t> cols);
Var mul_const(Var a, Matrix factor);
Var spmm(std::shared_ptr<const SparseMatrix> s, Var x);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

// Inverted dropout. Identity (same Var) in eval mode or when p == 0.
Var dropout(Var x, double p, bool train, std::mt19937_64& rng);

struct FdCheckOptions {
  double eps = 1e-5;
  std::size_t coords_per_param = 32;
  std::uint64_t seed = 0;
};

// Compares reverse-mode gradients of `program` against central differences on a
// random coordinate subset of each parameter. Returns the maximum of
// |ad - fd| / max(1e-8, |ad| + |fd|). Parameter values are restored on return.
double fd_check(const std::function<Var(Tape&)>& program, std::span<Tensor* const> params,
                FdCheckOptions options = {});

}  // namespace degfair::ad
