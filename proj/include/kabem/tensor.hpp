#pragma once

// Dense 2-D tensors with define-by-run reverse-mode differentiation.
//
// Every value is a row-major matrix of doubles; vectors are 1 x n rows and
// scalars are 1 x 1. A Tensor is a cheap handle onto a graph node. Ops build
// a fresh graph on each forward pass; backward() walks it in reverse
// topological order and accumulates into every node that requires a grad.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kabem {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : shape_{rows, cols}, data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix row(std::vector<double> values);
  static Matrix identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
  const double& operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<const double> row_span(std::size_t r) const {
    return {data_.data() + r * shape_.cols, shape_.cols};
  }

  void fill(double v);
  bool operator==(const Matrix&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

namespace detail {
struct Node {
  Matrix value;
  Matrix grad;  // empty until first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Matrix& grad_buffer();
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor parameter(Matrix value) { return Tensor(std::move(value), true); }
  static Tensor constant(Matrix value) { return Tensor(std::move(value), false); }

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return shape().rows; }
  std::size_t cols() const { return shape().cols; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Gradient, or an all-zero matrix of the value's shape if none accumulated.
  Matrix grad() const;
  void zero_grad();
  const char* op_name() const { return node_->op; }

  // Accumulates d(this)/d(node) into every reachable node requiring grad.
  // Throws ShapeError unless this tensor is 1 x 1.
  void backward() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  friend Tensor make_result(Matrix, const char*, std::vector<Tensor>,
                            std::function<void(detail::Node&)>);
  std::shared_ptr<detail::Node> node_;
};

// While alive on a thread, ops record no backward closures. Used for frozen
// evaluation and finite differences.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// --- ops ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
// a (n x c) + bias (1 x c) on every row.
Tensor add_row(const Tensor& a, const Tensor& bias);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// s (1 x 1) * a.
Tensor scale_by(const Tensor& s, const Tensor& a);
// a (n x c) with row r scaled by s(r, 0), s being n x 1.
Tensor mul_col(const Tensor& a, const Tensor& s);
// 1 - a.
Tensor one_minus(const Tensor& a);
Tensor transpose(const Tensor& a);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
// Entries where mask(r, c) == 0 get weight exactly zero. Every row must keep
// at least one unmasked entry.
Tensor masked_softmax_rows(const Tensor& a, const Matrix& mask);
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);
Tensor sum(const Tensor& a);
// max(0, x W + b).
Tensor relu_affine(const Tensor& x, const Tensor& w, const Tensor& b);

// Mean over all entries of the elementwise binary cross entropy between
// sigmoid(logits) and targets in {0, 1}.
Tensor bce_with_logits(const Tensor& logits, const Matrix& targets);
// Mean over rows of -log softmax(logits)[r, targets[r]].
Tensor cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> targets);

// Uniform entry point over the primitive op kinds.
enum class OpKind {
  matmul,
  add,
  concat,
  softmax_lastdim,
  sigmoid,
  tanh,
  relu_affine,
  layer_norm,
  slice,
  sum,
};

struct OpAttrs {
  std::size_t begin = 0;  // slice: row range [begin, end)
  std::size_t end = 0;
  double eps = 1e-5;      // layer_norm
};

Tensor forward_op(OpKind kind, std::span<const Tensor> inputs, const OpAttrs& attrs = {});

}  // namespace kabem
