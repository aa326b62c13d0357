#include "kabem/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace kabem {

std::string to_string(const Shape& s) {
  return std::to_string(s.rows) + "x" + std::to_string(s.cols);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : shape_{rows, cols}, data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data of length " + std::to_string(data_.size()) +
                     " does not fit shape " + to_string(shape_));
  }
}

Matrix Matrix::row(std::vector<double> values) {
  const auto n = values.size();
  return Matrix(1, n, std::move(values));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

namespace detail {
Matrix& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Matrix(value.rows(), value.cols());
  return grad;
}
}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;

using detail::Node;

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                   to_string(b));
}

void accumulate(Node& parent, const Matrix& delta) {
  if (!parent.requires_grad) return;
  auto& g = parent.grad_buffer();
  auto gd = g.data();
  auto dd = delta.data();
  for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += dd[i];
}

template <class F>
Matrix map(const Matrix& a, F f) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

double Tensor::item() const {
  if (shape().size() != 1) throw ShapeError("item() on non-scalar " + to_string(shape()));
  return node_->value[0];
}

Matrix Tensor::grad() const {
  if (node_->grad.empty()) return Matrix(rows(), cols());
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad = Matrix(); }

Tensor make_result(Matrix value, const char* op, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (auto& p : parents) node->parents.push_back(p.node());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  if (shape().size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " + to_string(shape()));
  }
  if (!node_->requires_grad) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

// --- linear algebra ------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.cols() != B.rows()) shape_fail("matmul", A.shape(), B.shape());
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Matrix C(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* c = &C(i, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A(i, p);
      const double* brow = &B(p, 0);
      for (std::size_t j = 0; j < m; ++j) c[j] += av * brow[j];
    }
  }
  return make_result(std::move(C), "matmul", {a, b}, [n, k, m](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const Matrix& G = self.grad;
    if (pa.requires_grad) {
      Matrix& dA = pa.grad_buffer();
      const Matrix& B = pb.value;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          const double* g = &G(i, 0);
          const double* brow = &B(p, 0);
          for (std::size_t j = 0; j < m; ++j) s += g[j] * brow[j];
          dA(i, p) += s;
        }
    }
    if (pb.requires_grad) {
      Matrix& dB = pb.grad_buffer();
      const Matrix& A = pa.value;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A(i, p);
          const double* g = &G(i, 0);
          double* d = &dB(p, 0);
          for (std::size_t j = 0; j < m; ++j) d[j] += av * g[j];
        }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("add", a.shape(), b.shape());
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_result(std::move(out), "add", {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], self.grad);
  });
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) shape_fail("add_row", a.shape(), bias.shape());
  Matrix out = a.value();
  const std::size_t c = a.cols();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t j = 0; j < c; ++j) out(r, j) += bias.value()[j];
  return make_result(std::move(out), "add_row", {a, bias}, [c](Node& self) {
    accumulate(*self.parents[0], self.grad);
    Node& pb = *self.parents[1];
    if (!pb.requires_grad) return;
    Matrix& db = pb.grad_buffer();
    for (std::size_t r = 0; r < self.grad.rows(); ++r)
      for (std::size_t j = 0; j < c; ++j) db[j] += self.grad(r, j);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("sub", a.shape(), b.shape());
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_result(std::move(out), "sub", {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    Node& pb = *self.parents[1];
    if (!pb.requires_grad) return;
    Matrix& db = pb.grad_buffer();
    for (std::size_t i = 0; i < db.size(); ++i) db[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("mul", a.shape(), b.shape());
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result(std::move(out), "mul", {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Matrix& d = pa.grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      Matrix& d = pb.grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  Matrix out = map(a.value(), [s](double v) { return v * s; });
  return make_result(std::move(out), "scale", {a}, [s](Node& self) {
    Node& pa = *self.parents[0];
    Matrix& d = pa.grad_buffer();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * s;
  });
}

Tensor scale_by(const Tensor& s, const Tensor& a) {
  if (s.shape().size() != 1) shape_fail("scale_by", s.shape(), a.shape());
  const double sv = s.item();
  Matrix out = map(a.value(), [sv](double v) { return v * sv; });
  return make_result(std::move(out), "scale_by", {s, a}, [](Node& self) {
    Node& ps = *self.parents[0];
    Node& pa = *self.parents[1];
    if (ps.requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * pa.value[i];
      ps.grad_buffer()[0] += acc;
    }
    if (pa.requires_grad) {
      const double sv = ps.value[0];
      Matrix& d = pa.grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * sv;
    }
  });
}

Tensor mul_col(const Tensor& a, const Tensor& s) {
  if (s.cols() != 1 || s.rows() != a.rows()) shape_fail("mul_col", a.shape(), s.shape());
  Matrix out = a.value();
  const std::size_t c = a.cols();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t j = 0; j < c; ++j) out(r, j) *= s.value()[r];
  return make_result(std::move(out), "mul_col", {a, s}, [c](Node& self) {
    Node& pa = *self.parents[0];
    Node& ps = *self.parents[1];
    if (pa.requires_grad) {
      Matrix& d = pa.grad_buffer();
      for (std::size_t r = 0; r < d.rows(); ++r)
        for (std::size_t j = 0; j < c; ++j) d(r, j) += self.grad(r, j) * ps.value[r];
    }
    if (ps.requires_grad) {
      Matrix& d = ps.grad_buffer();
      for (std::size_t r = 0; r < pa.value.rows(); ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += self.grad(r, j) * pa.value(r, j);
        d[r] += acc;
      }
    }
  });
}

Tensor one_minus(const Tensor& a) {
  Matrix out = map(a.value(), [](double v) { return 1.0 - v; });
  return make_result(std::move(out), "one_minus", {a}, [](Node& self) {
    Matrix& d = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= self.grad[i];
  });
}

Tensor transpose(const Tensor& a) {
  const auto& A = a.value();
  Matrix out(A.cols(), A.rows());
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < A.cols(); ++c) out(c, r) = A(r, c);
  return make_result(std::move(out), "transpose", {a}, [](Node& self) {
    Matrix& d = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < d.rows(); ++r)
      for (std::size_t c = 0; c < d.cols(); ++c) d(r, c) += self.grad(c, r);
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_fail("concat_cols", parts[0].shape(), p.shape());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < p.cols(); ++c) out(r, off + c) = p.value()(r, c);
    off += p.cols();
  }
  return make_result(std::move(out), "concat_cols", {parts.begin(), parts.end()},
                     [offsets](Node& self) {
                       for (std::size_t k = 0; k < self.parents.size(); ++k) {
                         Node& p = *self.parents[k];
                         if (!p.requires_grad) continue;
                         Matrix& d = p.grad_buffer();
                         for (std::size_t r = 0; r < d.rows(); ++r)
                           for (std::size_t c = 0; c < d.cols(); ++c)
                             d(r, c) += self.grad(r, offsets[k] + c);
                       }
                     });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat_cols(parts);
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts[0].cols();
  std::vector<double> data;
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_fail("concat_rows", parts[0].shape(), p.shape());
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  }
  const std::size_t rows = data.size() / std::max<std::size_t>(cols, 1);
  Matrix out(cols == 0 ? 0 : rows, cols, std::move(data));
  return make_result(std::move(out), "concat_rows", {parts.begin(), parts.end()},
                     [](Node& self) {
                       std::size_t off = 0;
                       for (auto& pp : self.parents) {
                         Node& p = *pp;
                         const std::size_t n = p.value.size();
                         if (p.requires_grad) {
                           Matrix& d = p.grad_buffer();
                           for (std::size_t i = 0; i < n; ++i) d[i] += self.grad[off + i];
                         }
                         off += n;
                       }
                     });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside " + to_string(a.shape()));
  }
  const std::size_t c = a.cols();
  auto src = a.value().data();
  Matrix out(end - begin, c,
             std::vector<double>(src.begin() + begin * c, src.begin() + end * c));
  return make_result(std::move(out), "slice_rows", {a}, [begin, c](Node& self) {
    Matrix& d = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) d[begin * c + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside " + to_string(a.shape()));
  }
  Matrix out(a.rows(), end - begin);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = a.value()(r, c);
  return make_result(std::move(out), "slice_cols", {a}, [begin](Node& self) {
    Matrix& d = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < self.grad.rows(); ++r)
      for (std::size_t c = 0; c < self.grad.cols(); ++c) d(r, begin + c) += self.grad(r, c);
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  const std::size_t c = table.cols();
  Matrix out(ids.size(), c);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= table.rows()) {
      throw ShapeError("gather_rows: id " + std::to_string(ids[r]) + " outside table " +
                       to_string(table.shape()));
    }
    for (std::size_t j = 0; j < c; ++j) out(r, j) = table.value()(ids[r], j);
  }
  std::vector<std::size_t> idv(ids.begin(), ids.end());
  return make_result(std::move(out), "gather_rows", {table}, [idv, c](Node& self) {
    Matrix& d = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < idv.size(); ++r)
      for (std::size_t j = 0; j < c; ++j) d(idv[r], j) += self.grad(r, j);
  });
}

// --- nonlinearities ------------------------------------------------------

Tensor sigmoid(const Tensor& a) {
  Matrix out = map(a.value(), [](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  return make_result(std::move(out), "sigmoid", {a}, [](Node& self) {
    Matrix& d = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double y = self.value[i];
      d[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor tanh(const Tensor& a) {
  Matrix out = map(a.value(), [](double v) { return std::tanh(v); });
  return make_result(std::move(out), "tanh", {a}, [](Node& self) {
    Matrix& d = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double y = self.value[i];
      d[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor relu(const Tensor& a) {
  Matrix out = map(a.value(), [](double v) { return v > 0.0 ? v : 0.0; });
  return make_result(std::move(out), "relu", {a}, [](Node& self) {
    Node& p = *self.parents[0];
    Matrix& d = p.grad_buffer();
    for (std::size_t i = 0; i < d.size(); ++i)
      if (p.value[i] > 0.0) d[i] += self.grad[i];
  });
}

namespace {

void softmax_backward(Node& self) {
  Matrix& d = self.parents[0]->grad_buffer();
  const std::size_t cols = self.value.cols();
  for (std::size_t r = 0; r < self.value.rows(); ++r) {
    double dot = 0.0;
    for (std::size_t c = 0; c < cols; ++c) dot += self.grad(r, c) * self.value(r, c);
    for (std::size_t c = 0; c < cols; ++c)
      d(r, c) += self.value(r, c) * (self.grad(r, c) - dot);
  }
}

Matrix softmax_impl(const Matrix& a, const Matrix* mask) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t c = 0; c < a.cols(); ++c) {
      if (mask && (*mask)(r, c) == 0.0) continue;
      any = true;
      // A NaN score must reach the output rather than vanish in the max.
      if (std::isnan(a(r, c)) || a(r, c) > mx) mx = a(r, c);
    }
    if (!any) {
      throw ShapeError("masked_softmax_rows: row " + std::to_string(r) + " fully masked");
    }
    double total = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) {
      if (mask && (*mask)(r, c) == 0.0) continue;
      out(r, c) = std::exp(a(r, c) - mx);
      total += out(r, c);
    }
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) /= total;
  }
  return out;
}

}  // namespace

Tensor softmax_rows(const Tensor& a) {
  return make_result(softmax_impl(a.value(), nullptr), "softmax", {a}, softmax_backward);
}

Tensor masked_softmax_rows(const Tensor& a, const Matrix& mask) {
  if (mask.shape() != a.shape()) shape_fail("masked_softmax_rows", a.shape(), mask.shape());
  return make_result(softmax_impl(a.value(), &mask), "masked_softmax", {a}, softmax_backward);
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t n = x.rows(), c = x.cols();
  if (gain.rows() != 1 || gain.cols() != c) shape_fail("layer_norm", x.shape(), gain.shape());
  if (bias.rows() != 1 || bias.cols() != c) shape_fail("layer_norm", x.shape(), bias.shape());
  Matrix xhat(n, c);
  std::vector<double> inv_std(n);
  Matrix out(n, c);
  for (std::size_t r = 0; r < n; ++r) {
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += x.value()(r, j);
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double dlt = x.value()(r, j) - mean;
      var += dlt * dlt;
    }
    var /= static_cast<double>(c);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat(r, j) = (x.value()(r, j) - mean) * inv_std[r];
      out(r, j) = xhat(r, j) * gain.value()[j] + bias.value()[j];
    }
  }
  return make_result(
      std::move(out), "layer_norm", {x, gain, bias},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), n, c](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        const Matrix& G = self.grad;
        if (pg.requires_grad) {
          Matrix& dg = pg.grad_buffer();
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < c; ++j) dg[j] += G(r, j) * xhat(r, j);
        }
        if (pb.requires_grad) {
          Matrix& db = pb.grad_buffer();
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < c; ++j) db[j] += G(r, j);
        }
        if (px.requires_grad) {
          Matrix& dx = px.grad_buffer();
          const double cn = static_cast<double>(c);
          for (std::size_t r = 0; r < n; ++r) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double dxh = G(r, j) * pg.value[j];
              mean_d += dxh;
              mean_dx += dxh * xhat(r, j);
            }
            mean_d /= cn;
            mean_dx /= cn;
            for (std::size_t j = 0; j < c; ++j) {
              const double dxh = G(r, j) * pg.value[j];
              dx(r, j) += inv_std[r] * (dxh - mean_d - xhat(r, j) * mean_dx);
            }
          }
        }
      });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return make_result(Matrix(1, 1, s), "sum", {a}, [](Node& self) {
    Matrix& d = self.parents[0]->grad_buffer();
    const double g = self.grad[0];
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g;
  });
}

Tensor relu_affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  return relu(add_row(matmul(x, w), b));
}

// --- losses --------------------------------------------------------------

Tensor bce_with_logits(const Tensor& logits, const Matrix& targets) {
  if (targets.shape() != logits.shape()) shape_fail("bce_with_logits", logits.shape(), targets.shape());
  const auto& x = logits.value();
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    total += std::max(v, 0.0) - v * targets[i] + std::log1p(std::exp(-std::abs(v)));
  }
  const double n = static_cast<double>(x.size());
  return make_result(Matrix(1, 1, total / n), "bce", {logits}, [targets, n](Node& self) {
    Node& p = *self.parents[0];
    Matrix& d = p.grad_buffer();
    const double g = self.grad[0] / n;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double v = p.value[i];
      const double s = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      d[i] += g * (s - targets[i]);
    }
  });
}

Tensor cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> targets) {
  const auto& x = logits.value();
  if (targets.size() != x.rows()) {
    throw ShapeError("cross_entropy_rows: " + std::to_string(targets.size()) +
                     " targets for logits " + to_string(x.shape()));
  }
  Matrix probs(x.rows(), x.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (targets[r] >= x.cols()) {
      throw ShapeError("cross_entropy_rows: target " + std::to_string(targets[r]) +
                       " outside " + std::to_string(x.cols()) + " classes");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < x.cols(); ++c) mx = std::max(mx, x(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      probs(r, c) = std::exp(x(r, c) - mx);
      z += probs(r, c);
    }
    for (std::size_t c = 0; c < x.cols(); ++c) probs(r, c) /= z;
    total += (mx + std::log(z)) - x(r, targets[r]);
  }
  const double n = static_cast<double>(x.rows());
  std::vector<std::size_t> tv(targets.begin(), targets.end());
  return make_result(Matrix(1, 1, total / n), "cross_entropy", {logits},
                     [probs = std::move(probs), tv, n](Node& self) {
                       Matrix& d = self.parents[0]->grad_buffer();
                       const double g = self.grad[0] / n;
                       for (std::size_t r = 0; r < probs.rows(); ++r)
                         for (std::size_t c = 0; c < probs.cols(); ++c)
                           d(r, c) += g * (probs(r, c) - (c == tv[r] ? 1.0 : 0.0));
                     });
}

// --- dispatcher ----------------------------------------------------------

Tensor forward_op(OpKind kind, std::span<const Tensor> in, const OpAttrs& attrs) {
  auto need = [&](std::size_t n, const char* name) {
    if (in.size() != n) {
      throw ShapeError(std::string(name) + ": expected " + std::to_string(n) + " inputs, got " +
                       std::to_string(in.size()));
    }
  };
  switch (kind) {
    case OpKind::matmul: need(2, "matmul"); return matmul(in[0], in[1]);
    case OpKind::add: need(2, "add"); return add(in[0], in[1]);
    case OpKind::concat: return concat_cols(in);
    case OpKind::softmax_lastdim: need(1, "softmax"); return softmax_rows(in[0]);
    case OpKind::sigmoid: need(1, "sigmoid"); return sigmoid(in[0]);
    case OpKind::tanh: need(1, "tanh"); return tanh(in[0]);
    case OpKind::relu_affine: need(3, "relu_affine"); return relu_affine(in[0], in[1], in[2]);
    case OpKind::layer_norm: need(3, "layer_norm"); return layer_norm_rows(in[0], in[1], in[2], attrs.eps);
    case OpKind::slice: need(1, "slice"); return slice_rows(in[0], attrs.begin, attrs.end);
    case OpKind::sum: need(1, "sum"); return sum(in[0]);
  }
  throw ShapeError("unknown op kind");
}

}  // namespace kabem
