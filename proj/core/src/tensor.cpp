#include "patchad/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "patchad/errors.hpp"

namespace patchad {

namespace {
thread_local bool g_grad_enabled = true;
thread_local DetachTape* g_active_tape = nullptr;
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ')';
  return out.str();
}

void detail::TensorImpl::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

namespace {

std::shared_ptr<detail::TensorImpl> new_impl(Shape shape, std::vector<double> data, bool rg) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = rg;
  return impl;
}

const detail::TensorImpl& checked(const std::shared_ptr<detail::TensorImpl>& impl) {
  if (!impl) throw ContractError("operation on an undefined tensor");
  return *impl;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(new_impl(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(new_impl(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

Tensor Tensor::randn(Shape shape, double stddev, std::mt19937_64& rng, bool requires_grad) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = dist(rng);
  return from(std::move(shape), std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return checked(impl_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw AxisError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return checked(impl_).data.size(); }

std::span<const double> Tensor::data() const { return checked(impl_).data; }

std::span<double> Tensor::mutable_data() {
  checked(impl_);
  return impl_->data;
}

std::vector<double> Tensor::to_vector() const { return checked(impl_).data; }

double Tensor::item() const {
  const auto& impl = checked(impl_);
  if (impl.data.size() != 1) {
    throw ContractError("item() requires a single-element tensor, got shape " +
                        shape_str(impl.shape));
  }
  return impl.data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& impl = checked(impl_);
  if (index.size() != impl.shape.size()) {
    throw AxisError("index rank " + std::to_string(index.size()) + " does not match shape " +
                    shape_str(impl.shape));
  }
  std::size_t offset = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= impl.shape[axis]) throw AxisError("index out of range for shape " + shape_str(impl.shape));
    offset = offset * impl.shape[axis] + i;
    ++axis;
  }
  return impl.data[offset];
}

bool Tensor::requires_grad() const { return checked(impl_).requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  checked(impl_);
  impl_->requires_grad = flag;
}

bool Tensor::has_grad() const {
  const auto& impl = checked(impl_);
  return !impl.grad.empty();
}

std::span<const double> Tensor::grad() const {
  const auto& impl = checked(impl_);
  if (impl.grad.empty()) throw ContractError("tensor has no gradient; call backward() first");
  return impl.grad;
}

std::span<double> Tensor::mutable_grad() {
  checked(impl_);
  impl_->ensure_grad();
  return impl_->grad;
}

void Tensor::zero_grad() {
  checked(impl_);
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  const auto& impl = checked(impl_);
  return Tensor(new_impl(impl.shape, impl.data, impl.requires_grad));
}

void Tensor::backward() const {
  const auto& root = checked(impl_);
  if (root.data.size() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + shape_str(root.shape));
  }
  if (!root.requires_grad) return;

  // Iterative post-order DFS gives a topological order without recursion limits.
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<const detail::TensorImpl*> visited;
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      auto* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  impl_->ensure_grad();
  impl_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() { return g_grad_enabled; }

DetachTape::DetachTape(Mode mode) : mode_(mode), previous_(g_active_tape) { g_active_tape = this; }

DetachTape::~DetachTape() { g_active_tape = previous_; }

void DetachTape::set_mode(Mode mode) {
  mode_ = mode;
  cursor_ = 0;
}

Tensor DetachTape::intercept(const Tensor& detached) {
  if (mode_ == Mode::Record) {
    values_.push_back(detached);
    return detached;
  }
  if (cursor_ >= values_.size()) {
    throw ContractError("DetachTape replay requested more stop_gradient values than recorded");
  }
  const auto& recorded = values_[cursor_++];
  if (recorded.shape() != detached.shape()) {
    throw ContractError("DetachTape replay shape mismatch: recorded " + shape_str(recorded.shape()) +
                        ", got " + shape_str(detached.shape()));
  }
  return recorded;
}

DetachTape* DetachTape::active() { return g_active_tape; }

Tensor detail::make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                           std::function<void(TensorImpl&)> backward_fn) {
  auto impl = new_impl(std::move(shape), std::move(data), false);
  if (!g_grad_enabled) return Tensor(std::move(impl));
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (!any) return Tensor(std::move(impl));
  impl->requires_grad = true;
  impl->parents.reserve(parents.size());
  for (const auto& p : parents) impl->parents.push_back(p.impl());
  impl->backward_fn = std::move(backward_fn);
  return Tensor(std::move(impl));
}

}  // namespace patchad
