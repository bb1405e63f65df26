#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "patchad/tensor.hpp"

namespace patchad::testing {

struct GradCheckResult {
  // max |analytic - numeric| / max(1, |analytic|)
  double max_error = 0.0;
  // max |analytic - numeric| / max(|analytic|, |numeric|, floor)
  double max_relative = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

// Compares backward() against central differences of `loss` for every entry
// of every tensor in `inputs`. Stop-gradient values are frozen at their
// unperturbed values while differencing.
inline GradCheckResult grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> inputs,
                                  double eps = 1e-5, double floor = 1e-6) {
  for (auto& t : inputs) t.zero_grad();
  DetachTape tape(DetachTape::Mode::Record);
  const Tensor y = loss();
  y.backward();
  tape.set_mode(DetachTape::Mode::Replay);
  GradCheckResult res;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& t = inputs[k];
    const std::vector<double> analytic = t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                                      : std::vector<double>(t.numel(), 0.0);
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + eps;
      tape.set_mode(DetachTape::Mode::Replay);
      const double up = loss().item();
      data[i] = orig - eps;
      tape.set_mode(DetachTape::Mode::Replay);
      const double down = loss().item();
      data[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double diff = std::fabs(analytic[i] - numeric);
      const double err = diff / std::max(1.0, std::fabs(analytic[i]));
      const double rel = diff / std::max({std::fabs(analytic[i]), std::fabs(numeric), floor});
      if (err > res.max_error) {
        res.max_error = err;
        res.worst = "input " + std::to_string(k) + "[" + std::to_string(i) + "]: analytic " +
                    std::to_string(analytic[i]) + " numeric " + std::to_string(numeric);
      }
      res.max_relative = std::max(res.max_relative, rel);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace patchad::testing
