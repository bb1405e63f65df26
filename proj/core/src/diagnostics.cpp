#include "patchad/diagnostics.hpp"

#include <cmath>
#include <numbers>

#include "patchad/errors.hpp"
#include "patchad/ops.hpp"

namespace patchad {

double gaussian_entropy(double variance) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw DomainError("gaussian_entropy: variance must be positive and finite, got " + std::to_string(variance));
  }
  return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * variance);
}

double mixture_variance(double sigma1_sq, double sigma2_sq, double k, double n, double lambda) {
  if (!(sigma1_sq > 0.0) || !(sigma2_sq > 0.0)) throw DomainError("mixture_variance: variances must be positive");
  if (!(n > 0.0) || !(k >= 0.0) || k > n) throw DomainError("mixture_variance: need 0 <= k <= n and n > 0");
  return lambda * (sigma1_sq + (k / n) * (sigma2_sq - sigma1_sq));
}

std::optional<double> feature_entropy(const Tensor& features) {
  if (features.rank() < 1) return std::nullopt;
  const std::size_t S = features.dim(0);
  if (S < 2) return std::nullopt;
  const std::size_t D = features.numel() / S;
  const auto& x = features.data();
  double total = 0.0;
  for (std::size_t d = 0; d < D; ++d) {
    double m = 0.0;
    for (std::size_t s = 0; s < S; ++s) m += x[s * D + d];
    m /= static_cast<double>(S);
    double ss = 0.0;
    for (std::size_t s = 0; s < S; ++s) ss += (x[s * D + d] - m) * (x[s * D + d] - m);
    const double var = std::max(ss / static_cast<double>(S - 1), kVarianceFloor);
    total += gaussian_entropy(var);
  }
  return total / static_cast<double>(D);
}

EntropyReport feature_entropy_report(const PatchADModel& model, const Tensor& windows) {
  EntropyReport rep;
  if (windows.rank() != 3 || windows.dim(0) < 2) {
    rep.warning = "feature entropy needs at least 2 windows; skipped";
    return rep;
  }
  NoGradGuard no_grad;
  const ForwardOutputs outs = model.forward(windows);
  double inter = 0.0, intra = 0.0;
  for (const auto& s : outs) {
    rep.inter_per_scale.push_back(*feature_entropy(s.inter));
    rep.intra_per_scale.push_back(*feature_entropy(s.intra));
    inter += rep.inter_per_scale.back();
    intra += rep.intra_per_scale.back();
  }
  rep.inter = inter / static_cast<double>(outs.size());
  rep.intra = intra / static_cast<double>(outs.size());
  return rep;
}

namespace {

double entry_variance(const Tensor& t) {
  const auto& d = t.data();
  double m = 0.0;
  for (double v : d) m += v;
  m /= static_cast<double>(d.size());
  double ss = 0.0;
  for (double v : d) ss += (v - m) * (v - m);
  return std::max(ss / static_cast<double>(d.size()), kVarianceFloor);
}

}  // namespace

BranchContrast branch_contrast(const PatchADModel& model, const Tensor& anomalous_window,
                               const Tensor& clean_window) {
  if (anomalous_window.shape() != clean_window.shape()) {
    throw ShapeError("branch_contrast: window shapes differ");
  }
  NoGradGuard no_grad;
  const ForwardOutputs a = model.forward(anomalous_window);
  const ForwardOutputs b = model.forward(clean_window);
  BranchContrast out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.inter += 0.5 * std::log(entry_variance(a[i].inter) / entry_variance(b[i].inter));
    out.intra += 0.5 * std::log(entry_variance(a[i].intra) / entry_variance(b[i].intra));
  }
  out.inter /= static_cast<double>(a.size());
  out.intra /= static_cast<double>(a.size());
  return out;
}

namespace {

struct Accum {
  double predicted = 0.0;
  double measured = 0.0;
  double fraction = 0.0;
  std::size_t vectors = 0;
};

double column_lambda(const Tensor& w) {
  const std::size_t in = w.dim(0), out = w.dim(1);
  const auto& d = w.data();
  double total = 0.0;
  for (std::size_t j = 0; j < out; ++j) {
    for (std::size_t i = 0; i < in; ++i) total += d[i * out + j] * d[i * out + j];
  }
  return total / static_cast<double>(out);
}

// y = W^T x for one input vector; adds mean(y^2) and the prediction.
void mix_vector(const std::vector<double>& x, std::size_t k, const Tensor& w, double lambda, double s1, double s2,
                Accum& acc) {
  const std::size_t in = w.dim(0), out = w.dim(1);
  const auto& d = w.data();
  double sq = 0.0;
  for (std::size_t j = 0; j < out; ++j) {
    double y = 0.0;
    for (std::size_t i = 0; i < in; ++i) y += x[i] * d[i * out + j];
    sq += y * y;
  }
  acc.measured += sq / static_cast<double>(out);
  acc.predicted += mixture_variance(s1, s2, static_cast<double>(k), static_cast<double>(in), lambda);
  acc.fraction += static_cast<double>(k) / static_cast<double>(in);
  ++acc.vectors;
}

}  // namespace

std::vector<VarianceCheck> mixing_variance_check(const PatchADModel& model, const LabeledSeries& series,
                                                 std::size_t stride) {
  series.validate();
  const std::size_t T = model.config().window;
  if (series.channels != model.config().channels) {
    throw InputError("series has " + std::to_string(series.channels) + " channels, model expects " +
                     std::to_string(model.config().channels));
  }
  const auto windows = make_windows(series.length, T, stride);
  auto is_anomalous = [&](std::size_t t) { return series.labels && (*series.labels)[t] != 0; };

  double s_normal = 0.0, s_anom = 0.0;
  std::size_t n_normal = 0, n_anom = 0;
  for (const auto& w : windows) {
    for (std::size_t c = 0; c < series.channels; ++c) {
      for (std::size_t t = w.start; t < w.start + T; ++t) {
        const double v = series.at(c, t) * series.at(c, t);
        if (is_anomalous(t)) {
          s_anom += v;
          ++n_anom;
        } else {
          s_normal += v;
          ++n_normal;
        }
      }
    }
  }
  const double s1 = std::max(n_normal ? s_normal / static_cast<double>(n_normal) : kVarianceFloor, kVarianceFloor);
  const double s2 = n_anom ? std::max(s_anom / static_cast<double>(n_anom), kVarianceFloor) : s1;

  std::vector<VarianceCheck> out;
  for (const auto& branch : model.branches()) {
    const std::size_t P = branch.patch, N = branch.count;
    const Tensor& w_inter = branch.layers.front().inter.fc1.weight;
    const Tensor& w_intra = branch.layers.front().intra.fc1.weight;
    const double lam_inter = column_lambda(w_inter);
    const double lam_intra = column_lambda(w_intra);
    Accum inter, intra;
    std::vector<double> xv;
    for (const auto& w : windows) {
      for (std::size_t c = 0; c < series.channels; ++c) {
        auto val = [&](std::size_t n, std::size_t p) { return series.at(c, w.start + n * P + p); };
        for (std::size_t p = 0; p < P; ++p) {
          xv.assign(N, 0.0);
          std::size_t k = 0;
          for (std::size_t n = 0; n < N; ++n) {
            xv[n] = val(n, p);
            k += is_anomalous(w.start + n * P + p) ? 1 : 0;
          }
          mix_vector(xv, k, w_inter, lam_inter, s1, s2, inter);
        }
        for (std::size_t n = 0; n < N; ++n) {
          xv.assign(P, 0.0);
          std::size_t m = 0;
          for (std::size_t p = 0; p < P; ++p) {
            xv[p] = val(n, p);
            m += is_anomalous(w.start + n * P + p) ? 1 : 0;
          }
          mix_vector(xv, m, w_intra, lam_intra, s1, s2, intra);
        }
      }
    }
    auto finish = [&](const char* name, double lam, const Accum& a) {
      VarianceCheck v;
      v.branch = name;
      v.patch = P;
      v.lambda = lam;
      v.sigma1_sq = s1;
      v.sigma2_sq = s2;
      const double cnt = static_cast<double>(a.vectors);
      v.mean_anomalous_fraction = a.fraction / cnt;
      v.predicted = a.predicted / cnt;
      v.measured = a.measured / cnt;
      out.push_back(v);
    };
    finish("inter", lam_inter, inter);
    finish("intra", lam_intra, intra);
  }
  return out;
}

}  // namespace patchad
