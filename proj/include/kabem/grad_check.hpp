#pragma once

#include <functional>
#include <string>

#include "kabem/param_store.hpp"
#include "kabem/tensor.hpp"

namespace kabem {

// |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
double relative_error(double analytic, double numeric);

// Max relative error between backward() and central differences of the
// scalar map `f` at `point`. Throws std::runtime_error naming the coordinate if
// f is non-finite anywhere it is evaluated.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Matrix& point,
                  double eps = 1e-5);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
};

// Same check over every registered parameter. When `max_coords_per_param` is
// nonzero, at most that many evenly strided coordinates are probed per tensor.
GradCheckReport grad_check_params(const std::function<Tensor()>& loss, ParamStore& params,
                                  double eps = 1e-5, std::size_t max_coords_per_param = 0);

}  // namespace kabem
