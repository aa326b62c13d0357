#include "kabem/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kabem {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

namespace {

double eval_finite(const std::function<Tensor()>& f, const std::string& where, std::size_t index) {
  NoGradGuard guard;
  const double v = f().item();
  if (!std::isfinite(v)) {
    throw std::runtime_error("non-finite evaluation at " + where + " coordinate " +
                             std::to_string(index));
  }
  return v;
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Matrix& point, double eps) {
  Tensor x = Tensor::parameter(point);
  Tensor y = f(x);
  if (!std::isfinite(y.item())) throw std::runtime_error("non-finite evaluation at the base point");
  y.backward();
  const Matrix analytic = x.grad();

  double worst = 0.0;
  Matrix probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double up = eval_finite([&] { return f(Tensor::constant(probe)); }, "input", i);
    probe[i] = saved - eps;
    const double down = eval_finite([&] { return f(Tensor::constant(probe)); }, "input", i);
    probe[i] = saved;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * eps)));
  }
  return worst;
}

GradCheckReport grad_check_params(const std::function<Tensor()>& loss, ParamStore& params,
                                  double eps, std::size_t max_coords_per_param) {
  params.zero_grad();
  Tensor y = loss();
  if (!std::isfinite(y.item())) throw std::runtime_error("non-finite loss at the base point");
  y.backward();

  GradCheckReport report;
  for (auto& [name, t] : params) {
    const Matrix analytic = t.grad();
    Matrix& v = t.mutable_value();
    const std::size_t n = v.size();
    const std::size_t stride =
        (max_coords_per_param == 0 || n <= max_coords_per_param) ? 1 : n / max_coords_per_param;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = v[i];
      v[i] = saved + eps;
      const double up = eval_finite(loss, name, i);
      v[i] = saved - eps;
      const double down = eval_finite(loss, name, i);
      v[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(analytic[i], numeric);
      ++report.coordinates_checked;
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_param = name;
        report.worst_index = i;
        report.worst_analytic = analytic[i];
        report.worst_numeric = numeric;
      }
    }
  }
  params.zero_grad();
  return report;
}

}  // namespace kabem
