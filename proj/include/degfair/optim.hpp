#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "degfair/autodiff.hpp"

namespace degfair::ad {

struct AdamOptions {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment buffers are created on the first step and must keep matching the
// parameter shapes afterwards.
struct OptimState {
  explicit OptimState(AdamOptions opts = {}) : options(opts) {}

  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

// One bias-corrected Adam update. Throws StateError if any parameter lacks a
// gradient or the parameter list changed shape since the previous step.
void adam_step(std::span<Tensor* const> params, OptimState& state);

}  // namespace degfair::ad
