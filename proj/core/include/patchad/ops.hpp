#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

#include "patchad/tensor.hpp"

// Differentiable tensor operations. Binary elementwise ops broadcast with
// numpy rules (shapes aligned on the trailing axis).
namespace patchad {

enum class Activation { relu, gelu };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation kind);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor add_scalar(const Tensor& x, double value);
Tensor mul_scalar(const Tensor& x, double value);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }

// a: (..., m, k), b: (k, n) -> (..., m, n).
Tensor matmul(const Tensor& a, const Tensor& b);
// x: (..., in), weight: (in, out), bias: (out) -> (..., out).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Swaps axis i with the last axis.
Tensor transpose_dim(const Tensor& x, std::size_t axis);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);
Tensor reshape(const Tensor& x, Shape shape);
// (..., a, b) -> (..., a*b)
Tensor flatten_last2(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x, std::size_t axis, bool keepdim = false);
Tensor mean(const Tensor& x, std::size_t axis, bool keepdim = false);

// Normalises over the last axis (biased variance), then scale/shift.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor relu(const Tensor& x);
// tanh approximation
Tensor gelu(const Tensor& x);
Tensor activation(const Tensor& x, Activation kind);
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
Tensor clamp_min(const Tensor& x, double lo);

// Value-identical tensor with no link to the computation record.
Tensor stop_gradient(const Tensor& x);

// Each slice along `axis` is repeated `repeats` times consecutively.
Tensor repeat_interleave(const Tensor& x, std::size_t repeats, std::size_t axis);
// The whole tensor is repeated `reps` times along `axis`.
Tensor tile(const Tensor& x, std::size_t reps, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);

Tensor randn_like(const Tensor& x, std::mt19937_64& rng, double stddev = 1.0);

// Counts 2*m*n*k for every matmul/linear evaluated on this thread while alive.
class FlopCounter {
 public:
  FlopCounter();
  ~FlopCounter();
  FlopCounter(const FlopCounter&) = delete;
  FlopCounter& operator=(const FlopCounter&) = delete;

  std::uint64_t flops() const { return flops_; }
  void add(std::uint64_t f) { flops_ += f; }

 private:
  std::uint64_t flops_ = 0;
  FlopCounter* previous_;
};

}  // namespace patchad
