#pragma once

#include <cstdint>
#include <vector>

#include "patchad/tensor.hpp"

namespace patchad {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Per-parameter moment estimates. No weight decay.
struct AdamState {
  AdamOptions options;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step_count = 0;

  AdamState() = default;
  AdamState(const std::vector<Tensor>& params, AdamOptions opts);
};

// Bias-corrected Adam update using each parameter's accumulated gradient.
// Parameters without a gradient are treated as having a zero gradient.
// Throws NumericError (leaving parameters and state untouched) if any
// gradient is non-finite.
void adam_step(std::vector<Tensor>& params, AdamState& state);

void zero_grads(std::vector<Tensor>& params);

}  // namespace patchad
