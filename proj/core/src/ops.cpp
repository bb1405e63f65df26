#include "patchad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "patchad/errors.hpp"

namespace patchad {

using detail::make_result;
using detail::TensorImpl;

namespace {

// Accumulate target for parent i, or nullptr if it takes no gradient.
double* parent_grad(TensorImpl& self, std::size_t i) {
  auto& p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

const double* parent_data(const TensorImpl& self, std::size_t i) {
  return self.parents[i]->data.data();
}

void check_axis(const Tensor& x, std::size_t axis, const char* op) {
  if (axis >= x.rank()) {
    throw AxisError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                    shape_str(x.shape()));
  }
}

// (outer, n, inner) view of a tensor around `axis`.
struct AxisView {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

struct Broadcast {
  enum class Kind { same, a_scalar, b_scalar, general };
  Kind kind = Kind::same;
  Shape out;
  std::vector<std::size_t> ia;
  std::vector<std::size_t> ib;

  std::size_t a_index(std::size_t i) const {
    switch (kind) {
      case Kind::same:
      case Kind::b_scalar:
        return i;
      case Kind::a_scalar:
        return 0;
      case Kind::general:
        return ia[i];
    }
    return 0;
  }
  std::size_t b_index(std::size_t i) const {
    switch (kind) {
      case Kind::same:
      case Kind::a_scalar:
        return i;
      case Kind::b_scalar:
        return 0;
      case Kind::general:
        return ib[i];
    }
    return 0;
  }
};

Broadcast plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast plan;
  if (a == b) {
    plan.out = a;
    return plan;
  }
  const auto na = shape_numel(a);
  const auto nb = shape_numel(b);
  const std::size_t rank = std::max(a.size(), b.size());
  plan.out.assign(rank, 1);
  std::vector<std::size_t> sa(rank, 0), sb(rank, 0);
  std::size_t stride_a = 1, stride_b = 1;
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t d = rank - 1 - k;
    const std::size_t da = k < a.size() ? a[a.size() - 1 - k] : 1;
    const std::size_t db = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": cannot broadcast shapes " + shape_str(a) + " and " +
                       shape_str(b));
    }
    plan.out[d] = std::max(da, db);
    sa[d] = da == 1 ? 0 : stride_a;
    sb[d] = db == 1 ? 0 : stride_b;
    stride_a *= da;
    stride_b *= db;
  }
  const auto n = shape_numel(plan.out);
  if (nb == 1 && na == n) {
    plan.kind = Broadcast::Kind::b_scalar;
    return plan;
  }
  if (na == 1 && nb == n) {
    plan.kind = Broadcast::Kind::a_scalar;
    return plan;
  }
  plan.kind = Broadcast::Kind::general;
  plan.ia.resize(n);
  plan.ib.resize(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t i = 0; i < n; ++i) {
    plan.ia[i] = oa;
    plan.ib[i] = ob;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < plan.out[d]) break;
      oa -= sa[d] * idx[d];
      ob -= sb[d] * idx[d];
      idx[d] = 0;
    }
  }
  return plan;
}

enum class BinaryKind { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* op) {
  auto plan = std::make_shared<Broadcast>(plan_broadcast(a.shape(), b.shape(), op));
  const auto n = shape_numel(plan->out);
  std::vector<double> out(n);
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = da[plan->a_index(i)];
    const double y = db[plan->b_index(i)];
    switch (kind) {
      case BinaryKind::add:
        out[i] = x + y;
        break;
      case BinaryKind::sub:
        out[i] = x - y;
        break;
      case BinaryKind::mul:
        out[i] = x * y;
        break;
    }
  }
  return make_result(plan->out, std::move(out), {a, b}, [plan, kind, n](TensorImpl& self) {
    const double* g = self.grad.data();
    if (double* ga = parent_grad(self, 0)) {
      const double* yb = parent_data(self, 1);
      for (std::size_t i = 0; i < n; ++i) {
        const double factor = kind == BinaryKind::mul ? yb[plan->b_index(i)] : 1.0;
        ga[plan->a_index(i)] += g[i] * factor;
      }
    }
    if (double* gb = parent_grad(self, 1)) {
      const double* xa = parent_data(self, 0);
      for (std::size_t i = 0; i < n; ++i) {
        double factor = 1.0;
        if (kind == BinaryKind::sub) factor = -1.0;
        if (kind == BinaryKind::mul) factor = xa[plan->a_index(i)];
        gb[plan->b_index(i)] += g[i] * factor;
      }
    }
  });
}

template <typename Forward, typename Derivative>
Tensor unary(const Tensor& x, Forward f, Derivative df) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [df](TensorImpl& self) {
    double* gx = parent_grad(self, 0);
    if (!gx) return;
    const double* xin = parent_data(self, 0);
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      gx[i] += self.grad[i] * df(xin[i], self.data[i]);
    }
  });
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "gelu") return Activation::gelu;
  throw ConfigError("unknown activation '" + std::string(name) + "' (expected relu or gelu)");
}

std::string_view activation_name(Activation kind) {
  return kind == Activation::relu ? "relu" : "gelu";
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::mul, "mul"); }

Tensor neg(const Tensor& x) { return mul_scalar(x, -1.0); }

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, double value) {
  return unary(
      x, [value](double v) { return v * value; }, [value](double, double) { return value; });
}

namespace {

thread_local FlopCounter* g_flop_counter = nullptr;

void count_flops(std::size_t rows, std::size_t inner, std::size_t cols) {
  if (g_flop_counter) g_flop_counter->add(2ull * rows * inner * cols);
}

void matmul_kernel(const double* a, const double* b, double* out, std::size_t rows,
                   std::size_t inner, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* o = out + i * cols;
    const double* ar = a + i * inner;
    for (std::size_t p = 0; p < inner; ++p) {
      const double av = ar[p];
      const double* br = b + p * cols;
      for (std::size_t j = 0; j < cols; ++j) o[j] += av * br[j];
    }
  }
}

// grad wrt a: g (rows x cols) * b^T (cols x inner)
void matmul_grad_a(const double* g, const double* b, double* ga, std::size_t rows,
                   std::size_t inner, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* gr = g + i * cols;
    double* gar = ga + i * inner;
    for (std::size_t p = 0; p < inner; ++p) {
      const double* br = b + p * cols;
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) acc += gr[j] * br[j];
      gar[p] += acc;
    }
  }
}

// grad wrt b: a^T (inner x rows) * g (rows x cols)
void matmul_grad_b(const double* a, const double* g, double* gb, std::size_t rows,
                   std::size_t inner, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* ar = a + i * inner;
    const double* gr = g + i * cols;
    for (std::size_t p = 0; p < inner; ++p) {
      const double av = ar[p];
      double* gbr = gb + p * cols;
      for (std::size_t j = 0; j < cols; ++j) gbr[j] += av * gr[j];
    }
  }
}

Shape matmul_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rank() < 1 || b.rank() != 2 || a.shape().back() != b.dim(0)) {
    throw ShapeError(std::string(op) + ": inner dimensions disagree for shapes " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  Shape out = a.shape();
  out.back() = b.dim(1);
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  Shape out_shape = matmul_shape(a, b, "matmul");
  const std::size_t inner = b.dim(0);
  const std::size_t cols = b.dim(1);
  const std::size_t rows = a.numel() / inner;
  count_flops(rows, inner, cols);
  std::vector<double> out(rows * cols, 0.0);
  matmul_kernel(a.data().data(), b.data().data(), out.data(), rows, inner, cols);
  return make_result(std::move(out_shape), std::move(out), {a, b},
                     [rows, inner, cols](TensorImpl& self) {
                       const double* g = self.grad.data();
                       if (double* ga = parent_grad(self, 0)) {
                         matmul_grad_a(g, parent_data(self, 1), ga, rows, inner, cols);
                       }
                       if (double* gb = parent_grad(self, 1)) {
                         matmul_grad_b(parent_data(self, 0), g, gb, rows, inner, cols);
                       }
                     });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  Shape out_shape = matmul_shape(x, weight, "linear");
  const std::size_t inner = weight.dim(0);
  const std::size_t cols = weight.dim(1);
  if (bias.numel() != cols) {
    throw ShapeError("linear: bias shape " + shape_str(bias.shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  }
  const std::size_t rows = x.numel() / inner;
  count_flops(rows, inner, cols);
  std::vector<double> out(rows * cols);
  const auto bv = bias.data();
  for (std::size_t i = 0; i < rows; ++i) std::copy(bv.begin(), bv.end(), out.begin() + i * cols);
  matmul_kernel(x.data().data(), weight.data().data(), out.data(), rows, inner, cols);
  return make_result(std::move(out_shape), std::move(out), {x, weight, bias},
                     [rows, inner, cols](TensorImpl& self) {
                       const double* g = self.grad.data();
                       if (double* gx = parent_grad(self, 0)) {
                         matmul_grad_a(g, parent_data(self, 1), gx, rows, inner, cols);
                       }
                       if (double* gw = parent_grad(self, 1)) {
                         matmul_grad_b(parent_data(self, 0), g, gw, rows, inner, cols);
                       }
                       if (double* gb = parent_grad(self, 2)) {
                         for (std::size_t i = 0; i < rows; ++i) {
                           for (std::size_t j = 0; j < cols; ++j) gb[j] += g[i * cols + j];
                         }
                       }
                     });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
  const auto& in_shape = x.shape();
  const std::size_t rank = in_shape.size();
  if (order.size() != rank) {
    throw AxisError("permute: order length " + std::to_string(order.size()) +
                    " does not match rank of " + shape_str(in_shape));
  }
  std::vector<bool> seen(rank, false);
  for (auto o : order) {
    if (o >= rank || seen[o]) throw AxisError("permute: invalid axis order for " + shape_str(in_shape));
    seen[o] = true;
  }
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t d = rank; d-- > 1;) in_strides[d - 1] = in_strides[d] * in_shape[d];
  Shape out_shape(rank);
  std::vector<std::size_t> src_strides(rank);
  for (std::size_t d = 0; d < rank; ++d) {
    out_shape[d] = in_shape[order[d]];
    src_strides[d] = in_strides[order[d]];
  }
  // Source offset of every output element.
  const std::size_t n = x.numel();
  auto index = std::make_shared<std::vector<std::size_t>>(n);
  {
    const std::size_t last = out_shape[rank - 1];
    const std::size_t last_stride = src_strides[rank - 1];
    std::vector<std::size_t> idx(rank, 0);
    std::size_t base = 0;
    for (std::size_t i = 0; i < n; i += last) {
      for (std::size_t j = 0; j < last; ++j) (*index)[i + j] = base + j * last_stride;
      for (std::size_t d = rank - 1; d-- > 0;) {
        ++idx[d];
        base += src_strides[d];
        if (idx[d] < out_shape[d]) break;
        base -= src_strides[d] * idx[d];
        idx[d] = 0;
      }
    }
  }
  const auto in = x.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = in[(*index)[i]];
  return make_result(std::move(out_shape), std::move(out), {x}, [index](TensorImpl& self) {
    double* gx = parent_grad(self, 0);
    if (!gx) return;
    const auto& idx = *index;
    for (std::size_t i = 0; i < idx.size(); ++i) gx[idx[i]] += self.grad[i];
  });
}

Tensor transpose_dim(const Tensor& x, std::size_t axis) {
  check_axis(x, axis, "transpose_dim");
  const std::size_t last = x.rank() - 1;
  if (axis == last) return x;
  std::vector<std::size_t> order(x.rank());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::swap(order[axis], order[last]);
  return permute(x, order);
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  return make_result(std::move(shape), x.to_vector(), {x}, [](TensorImpl& self) {
    double* gx = parent_grad(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
  });
}

Tensor flatten_last2(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("flatten_last2: rank < 2 for shape " + shape_str(x.shape()));
  Shape shape(x.shape().begin(), x.shape().end() - 1);
  shape.back() *= x.shape().back();
  return reshape(x, std::move(shape));
}

Tensor sum(const Tensor& x) {
  const auto in = x.data();
  double total = 0.0;
  for (double v : in) total += v;
  return make_result({1}, {total}, {x}, [](TensorImpl& self) {
    double* gx = parent_grad(self, 0);
    if (!gx) return;
    const double g = self.grad[0];
    const auto n = self.parents[0]->data.size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g;
  });
}

Tensor mean(const Tensor& x) { return mul_scalar(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum(const Tensor& x, std::size_t axis, bool keepdim) {
  check_axis(x, axis, "sum");
  const auto v = axis_view(x.shape(), axis);
  Shape out_shape = x.shape();
  if (keepdim) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    if (out_shape.empty()) out_shape.push_back(1);
  }
  const auto in = x.data();
  std::vector<double> out(v.outer * v.inner, 0.0);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t k = 0; k < v.n; ++k) {
      const double* row = in.data() + (o * v.n + k) * v.inner;
      double* dst = out.data() + o * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) dst[i] += row[i];
    }
  }
  return make_result(std::move(out_shape), std::move(out), {x}, [v](TensorImpl& self) {
    double* gx = parent_grad(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < v.outer; ++o) {
      const double* g = self.grad.data() + o * v.inner;
      for (std::size_t k = 0; k < v.n; ++k) {
        double* dst = gx + (o * v.n + k) * v.inner;
        for (std::size_t i = 0; i < v.inner; ++i) dst[i] += g[i];
      }
    }
  });
}

Tensor mean(const Tensor& x, std::size_t axis, bool keepdim) {
  check_axis(x, axis, "mean");
  return mul_scalar(sum(x, axis, keepdim), 1.0 / static_cast<double>(x.dim(axis)));
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t n = x.shape().back();
  if (gamma.numel() != n || beta.numel() != n) {
    throw ShapeError("layer_norm: affine parameters " + shape_str(gamma.shape()) +
                     " do not match last axis of " + shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / n;
  const auto in = x.data();
  const auto gm = gamma.data();
  const auto bt = beta.data();
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto rstd = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * n;
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += row[i];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<double>(n);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t i = 0; i < n; ++i) {
      const double h = (row[i] - mu) * rs;
      (*xhat)[r * n + i] = h;
      out[r * n + i] = gm[i] * h + bt[i];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [xhat, rstd, rows, n](TensorImpl& self) {
                       const double* g = self.grad.data();
                       const double* gm = parent_data(self, 1);
                       if (double* ggamma = parent_grad(self, 1)) {
                         for (std::size_t i = 0; i < rows * n; ++i) ggamma[i % n] += g[i] * (*xhat)[i];
                       }
                       if (double* gbeta = parent_grad(self, 2)) {
                         for (std::size_t i = 0; i < rows * n; ++i) gbeta[i % n] += g[i];
                       }
                       double* gx = parent_grad(self, 0);
                       if (!gx) return;
                       const double inv_n = 1.0 / static_cast<double>(n);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* gr = g + r * n;
                         const double* hr = xhat->data() + r * n;
                         double mean_dh = 0.0, mean_dh_h = 0.0;
                         for (std::size_t i = 0; i < n; ++i) {
                           const double dh = gr[i] * gm[i];
                           mean_dh += dh;
                           mean_dh_h += dh * hr[i];
                         }
                         mean_dh *= inv_n;
                         mean_dh_h *= inv_n;
                         for (std::size_t i = 0; i < n; ++i) {
                           const double dh = gr[i] * gm[i];
                           gx[r * n + i] += (*rstd)[r] * (dh - mean_dh - hr[i] * mean_dh_h);
                         }
                       }
                     });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& x) {
  return unary(
      x,
      [](double v) { return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v))); },
      [](double v, double) {
        const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      });
}

Tensor activation(const Tensor& x, Activation kind) {
  return kind == Activation::relu ? relu(x) : gelu(x);
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  check_axis(x, axis, "softmax");
  const auto v = axis_view(x.shape(), axis);
  const auto in = x.data();
  std::vector<double> out(x.numel());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.n * v.inner + i;
      double mx = in[base];
      for (std::size_t k = 1; k < v.n; ++k) mx = std::max(mx, in[base + k * v.inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < v.n; ++k) {
        const double e = std::exp(in[base + k * v.inner] - mx);
        out[base + k * v.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < v.n; ++k) out[base + k * v.inner] /= total;
    }
  }
  return make_result(x.shape(), std::move(out), {x}, [v](TensorImpl& self) {
    double* gx = parent_grad(self, 0);
    if (!gx) return;
    const double* y = self.data.data();
    const double* g = self.grad.data();
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t base = o * v.n * v.inner + i;
        double dot = 0.0;
        for (std::size_t k = 0; k < v.n; ++k) dot += g[base + k * v.inner] * y[base + k * v.inner];
        for (std::size_t k = 0; k < v.n; ++k) {
          const std::size_t at = base + k * v.inner;
          gx[at] += y[at] * (g[at] - dot);
        }
      }
    }
  });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor clamp_min(const Tensor& x, double lo) {
  return unary(
      x, [lo](double v) { return v > lo ? v : lo; },
      [lo](double v, double) { return v > lo ? 1.0 : 0.0; });
}

Tensor stop_gradient(const Tensor& x) {
  Tensor detached = Tensor::from(x.shape(), x.to_vector(), false);
  if (auto* tape = DetachTape::active()) return tape->intercept(detached);
  return detached;
}

Tensor repeat_interleave(const Tensor& x, std::size_t repeats, std::size_t axis) {
  check_axis(x, axis, "repeat_interleave");
  if (repeats == 0) throw ContractError("repeat_interleave: repeats must be positive");
  const auto v = axis_view(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] *= repeats;
  const auto in = x.data();
  std::vector<double> out(x.numel() * repeats);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t k = 0; k < v.n; ++k) {
      const double* src = in.data() + (o * v.n + k) * v.inner;
      for (std::size_t r = 0; r < repeats; ++r) {
        double* dst = out.data() + ((o * v.n + k) * repeats + r) * v.inner;
        std::copy(src, src + v.inner, dst);
      }
    }
  }
  return make_result(std::move(out_shape), std::move(out), {x}, [v, repeats](TensorImpl& self) {
    double* gx = parent_grad(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t k = 0; k < v.n; ++k) {
        double* dst = gx + (o * v.n + k) * v.inner;
        for (std::size_t r = 0; r < repeats; ++r) {
          const double* g = self.grad.data() + ((o * v.n + k) * repeats + r) * v.inner;
          for (std::size_t i = 0; i < v.inner; ++i) dst[i] += g[i];
        }
      }
    }
  });
}

Tensor tile(const Tensor& x, std::size_t reps, std::size_t axis) {
  check_axis(x, axis, "tile");
  if (reps == 0) throw ContractError("tile: reps must be positive");
  const auto v = axis_view(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] *= reps;
  const auto in = x.data();
  const std::size_t block = v.n * v.inner;
  std::vector<double> out(x.numel() * reps);
  for (std::size_t o = 0; o < v.outer; ++o) {
    const double* src = in.data() + o * block;
    for (std::size_t r = 0; r < reps; ++r) {
      std::copy(src, src + block, out.data() + (o * reps + r) * block);
    }
  }
  return make_result(std::move(out_shape), std::move(out), {x}, [v, reps, block](TensorImpl& self) {
    double* gx = parent_grad(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t r = 0; r < reps; ++r) {
        const double* g = self.grad.data() + (o * reps + r) * block;
        for (std::size_t i = 0; i < block; ++i) gx[o * block + i] += g[i];
      }
    }
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  check_axis(x, axis, "slice");
  if (length == 0 || start + length > x.dim(axis)) {
    throw ContractError("slice: range [" + std::to_string(start) + ", " +
                        std::to_string(start + length) + ") out of bounds for axis " +
                        std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  const auto v = axis_view(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  const auto in = x.data();
  std::vector<double> out(v.outer * length * v.inner);
  for (std::size_t o = 0; o < v.outer; ++o) {
    const double* src = in.data() + (o * v.n + start) * v.inner;
    std::copy(src, src + length * v.inner, out.data() + o * length * v.inner);
  }
  return make_result(std::move(out_shape), std::move(out), {x},
                     [v, start, length](TensorImpl& self) {
                       double* gx = parent_grad(self, 0);
                       if (!gx) return;
                       for (std::size_t o = 0; o < v.outer; ++o) {
                         const double* g = self.grad.data() + o * length * v.inner;
                         double* dst = gx + (o * v.n + start) * v.inner;
                         for (std::size_t i = 0; i < length * v.inner; ++i) dst[i] += g[i];
                       }
                     });
}

FlopCounter::FlopCounter() : previous_(g_flop_counter) { g_flop_counter = this; }
FlopCounter::~FlopCounter() { g_flop_counter = previous_; }

Tensor randn_like(const Tensor& x, std::mt19937_64& rng, double stddev) {
  return Tensor::randn(x.shape(), stddev, rng, false);
}

}  // namespace patchad
