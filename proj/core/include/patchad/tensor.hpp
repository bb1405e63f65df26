#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace patchad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// Storage plus the link into the reverse-mode computation record. An output
// node keeps its parents alive; backward_fn reads `grad` of the node it is
// attached to and accumulates into the parents' grads.
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;

  void ensure_grad();
};

}  // namespace detail

// Dense row-major f64 array with optional gradient. Copies share storage
// (handle semantics); use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  // He-style init uses stddev = sqrt(2 / fan_in).
  static Tensor randn(Shape shape, double stddev, std::mt19937_64& rng, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Writable view for leaf tensors (optimizers, initialisation, checkpoints).
  std::span<double> mutable_data();
  std::vector<double> to_vector() const;
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Reverse topological sweep from this scalar. Gradients accumulate.
  void backward() const;

  // Value copy detached from any graph.
  Tensor clone() const;

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Disables graph recording on this thread for its lifetime (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

// Records the values produced by stop_gradient() in call order, then replays
// them on later passes. Finite-difference checks of losses that contain
// stop-gradients perturb parameters in Replay mode so the detached branch
// stays frozen at its unperturbed value, which is exactly the function whose
// derivative backward() computes.
class DetachTape {
 public:
  enum class Mode { Record, Replay };

  explicit DetachTape(Mode mode);
  ~DetachTape();
  DetachTape(const DetachTape&) = delete;
  DetachTape& operator=(const DetachTape&) = delete;

  void set_mode(Mode mode);
  Mode mode() const { return mode_; }
  std::size_t size() const { return values_.size(); }

  // Called by stop_gradient(); returns the tensor to use.
  Tensor intercept(const Tensor& detached);

  static DetachTape* active();

 private:
  Mode mode_;
  std::vector<Tensor> values_;
  std::size_t cursor_ = 0;
  DetachTape* previous_;
};

namespace detail {

// Builds a graph node over `parents` unless grad mode is off or no parent
// requires a gradient.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                   std::function<void(TensorImpl&)> backward_fn);

}  // namespace detail

}  // namespace patchad
