#include "kabem/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace kabem {

void adam_update(ParamStore& params, AdamState& state, const AdamOptions& opts) {
  if (!(opts.lr > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
  for (const auto& [name, t] : params) {
    if (!t.has_grad()) continue;
    for (double g : t.node()->grad.data()) {
      if (!std::isfinite(g)) throw std::runtime_error("adam: non-finite gradient in " + name);
    }
  }

  ++state.step_count;
  const double step = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(opts.beta1, step);
  const double c2 = 1.0 - std::pow(opts.beta2, step);
  for (auto& [name, t] : params) {
    Matrix& m = state.first_moment[name];
    Matrix& v = state.second_moment[name];
    if (m.empty()) {
      m = Matrix(t.rows(), t.cols());
      v = Matrix(t.rows(), t.cols());
    }
    if (!t.has_grad()) {
      // Moments still decay so a zero gradient is a true zero step.
      for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] *= opts.beta1;
        v[i] *= opts.beta2;
      }
    } else {
      const Matrix& g = t.node()->grad;
      for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] = opts.beta1 * m[i] + (1.0 - opts.beta1) * g[i];
        v[i] = opts.beta2 * v[i] + (1.0 - opts.beta2) * g[i] * g[i];
      }
    }
    Matrix& w = t.mutable_value();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= opts.lr * mhat / (std::sqrt(vhat) + opts.eps);
    }
  }
}

double clip_grad_norm(ParamStore& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [_, t] : params)
    if (t.has_grad())
      for (double g : t.node()->grad.data()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& [_, t] : params)
      if (t.has_grad())
        for (double& g : t.node()->grad.data()) g *= s;
  }
  return norm;
}

}  // namespace kabem
