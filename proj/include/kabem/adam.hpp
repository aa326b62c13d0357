#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "kabem/param_store.hpp"

namespace kabem {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::map<std::string, Matrix> first_moment;
  std::map<std::string, Matrix> second_moment;
  std::uint64_t step_count = 0;
};

// One bias-corrected Adam step using the gradients accumulated in `params`.
// A non-finite gradient anywhere aborts the whole update (nothing is changed)
// with std::runtime_error naming the parameter.
void adam_update(ParamStore& params, AdamState& state, const AdamOptions& opts);

// Scales all accumulated gradients so their global L2 norm is at most
// max_norm. Returns the norm before clipping.
double clip_grad_norm(ParamStore& params, double max_norm);

}  // namespace kabem
