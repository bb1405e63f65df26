#include "patchad/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "patchad/errors.hpp"
#include "patchad/objective.hpp"
#include "patchad/ops.hpp"

namespace patchad {

Tensor pointwise_score(const Tensor& inter_up, const Tensor& intra_up) {
  NoGradGuard no_grad;
  return add(kl_rowwise(inter_up, intra_up), kl_rowwise(intra_up, inter_up));
}

std::vector<double> fuse_scales(const std::vector<std::vector<double>>& per_scale) {
  if (per_scale.empty()) throw ContractError("fuse_scales: no scales");
  const std::size_t n = per_scale[0].size();
  std::vector<double> out(n, 0.0);
  for (const auto& s : per_scale) {
    if (s.size() != n) {
      throw ContractError("fuse_scales: length mismatch (" + std::to_string(s.size()) + " vs " +
                          std::to_string(n) + ")");
    }
    for (std::size_t i = 0; i < n; ++i) out[i] += s[i];
  }
  const double m = static_cast<double>(per_scale.size());
  for (auto& v : out) v /= m;
  return out;
}

Tensor window_scores(const PatchADModel& model, const Tensor& x) {
  NoGradGuard no_grad;
  const ForwardOutputs outs = model.forward(x);
  Tensor acc;
  for (std::size_t i = 0; i < outs.size(); ++i) {
    const auto& s = outs[i];
    const Tensor score = pointwise_score(upsample_inter(s.inter, s.patch), upsample_intra(s.intra, s.count));
    acc = i == 0 ? score : add(acc, score);
  }
  return mul_scalar(acc, 1.0 / static_cast<double>(outs.size()));
}

ScoreSeries score_full_series(const PatchADModel& model, const LabeledSeries& series,
                              std::optional<std::size_t> stride, std::size_t batch_size) {
  series.validate();
  const std::size_t T = model.config().window;
  if (series.channels != model.config().channels) {
    throw InputError("series has " + std::to_string(series.channels) + " channels, model expects " +
                     std::to_string(model.config().channels));
  }
  if (series.length < T) {
    throw InputError("series length " + std::to_string(series.length) + " is shorter than the window " +
                     std::to_string(T));
  }
  if (batch_size == 0) throw InputError("batch size must be positive");
  const std::size_t step = stride.value_or(T);
  std::vector<std::size_t> starts;
  for (const auto& w : make_windows(series.length, T, step)) starts.push_back(w.start);
  if (starts.back() + T < series.length) starts.push_back(series.length - T);

  std::vector<double> sum(series.length, 0.0);
  std::vector<std::uint32_t> count(series.length, 0);
  for (std::size_t lo = 0; lo < starts.size(); lo += batch_size) {
    const std::size_t hi = std::min(lo + batch_size, starts.size());
    const std::span<const std::size_t> chunk(starts.data() + lo, hi - lo);
    const Tensor scores = window_scores(model, gather_windows(series, chunk, T));
    const auto& d = scores.data();
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      for (std::size_t t = 0; t < T; ++t) {
        sum[chunk[b] + t] += d[b * T + t];
        ++count[chunk[b] + t];
      }
    }
  }
  ScoreSeries out;
  out.window = T;
  out.stride = step;
  out.scores.resize(series.length);
  for (std::size_t t = 0; t < series.length; ++t) out.scores[t] = sum[t] / count[t];
  return out;
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw InputError("percentile of an empty array");
  if (!(pct >= 0.0 && pct <= 100.0)) throw DomainError("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * pct / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

Thresholded threshold_by_ratio(const std::vector<double>& scores, double sigma) {
  if (scores.empty()) throw InputError("threshold_by_ratio: empty score array");
  if (!(sigma > 0.0 && sigma < 100.0)) throw DomainError("anomaly ratio sigma must lie in (0, 100)");
  Thresholded out;
  out.threshold = percentile(scores, 100.0 - sigma);
  out.flags.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out.flags[i] = scores[i] > out.threshold ? 1 : 0;
  return out;
}

double gpd_log_likelihood(const std::vector<double>& excesses, double gamma, double sigma) {
  const double n = static_cast<double>(excesses.size());
  if (!(sigma > 0.0)) return -std::numeric_limits<double>::infinity();
  if (gamma == 0.0) {
    const double s = std::accumulate(excesses.begin(), excesses.end(), 0.0);
    return -n * std::log(sigma) - s / sigma;
  }
  double acc = 0.0;
  for (double y : excesses) {
    const double z = 1.0 + gamma * y / sigma;
    if (!(z > 0.0)) return -std::numeric_limits<double>::infinity();
    acc += std::log(z);
  }
  return -n * std::log(sigma) - (1.0 + 1.0 / gamma) * acc;
}

namespace {

struct Grimshaw {
  const std::vector<double>& y;

  double u(double x) const {
    double s = 0.0;
    for (double v : y) s += 1.0 / (1.0 + x * v);
    return s / static_cast<double>(y.size());
  }
  double v(double x) const {
    double s = 0.0;
    for (double e : y) s += std::log1p(x * e);
    return 1.0 + s / static_cast<double>(y.size());
  }
  double w(double x) const { return u(x) * v(x) - 1.0; }

  // Sign changes of w between consecutive grid points, refined by bisection.
  void roots(const std::vector<double>& grid, std::vector<double>& out) const {
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double xa = grid[i - 1], xb = grid[i];
      const double wa = w(xa), wb = w(xb);
      if (!std::isfinite(wa) || !std::isfinite(wb) || (wa < 0.0) == (wb < 0.0)) continue;
      double lo = xa, hi = xb, wlo = wa;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double wm = w(mid);
        if ((wm < 0.0) == (wlo < 0.0)) {
          lo = mid;
          wlo = wm;
        } else {
          hi = mid;
        }
      }
      out.push_back(0.5 * (lo + hi));
    }
  }
};

constexpr int kGrid = 400;

std::vector<double> linear_grid(double a, double b) {
  std::vector<double> g;
  if (!(b > a)) return g;
  for (int i = 0; i <= kGrid; ++i) g.push_back(a + (b - a) * i / kGrid);
  return g;
}

std::vector<double> log_grid(double a, double b) {
  std::vector<double> g;
  if (!(a > 0.0) || !(b > a)) return g;
  const double la = std::log(a), lb = std::log(b);
  for (int i = 0; i <= 2 * kGrid; ++i) g.push_back(std::exp(la + (lb - la) * i / (2 * kGrid)));
  return g;
}

constexpr double kChiSquare1At95 = 3.841458820694124;

}  // namespace

GpdFit fit_gpd(const std::vector<double>& excesses) {
  if (excesses.empty()) throw InputError("fit_gpd: no excesses");
  for (double y : excesses) {
    if (!(y > 0.0) || !std::isfinite(y)) throw DomainError("fit_gpd: excesses must be positive and finite");
  }
  const double ymin = *std::min_element(excesses.begin(), excesses.end());
  const double ymax = *std::max_element(excesses.begin(), excesses.end());
  const double ymean = std::accumulate(excesses.begin(), excesses.end(), 0.0) / static_cast<double>(excesses.size());

  GpdFit exp_fit{0.0, ymean, gpd_log_likelihood(excesses, 0.0, ymean)};
  GpdFit best = exp_fit;

  const Grimshaw g{excesses};
  const double eps = 1e-8;
  std::vector<double> candidates;
  // gamma < 0 side: x in (-1/ymax, 0)
  g.roots(linear_grid(-1.0 / ymax + eps / ymax, -eps / ymax), candidates);
  // gamma > 0 side. The usual lower bound 2(mean-min)/(mean*min) overshoots
  // the root when the smallest excess is tiny, so scan logarithmically from
  // near zero instead.
  if (ymean > ymin) {
    const double c = 2.0 * (ymean - ymin) / (ymin * ymin);
    g.roots(log_grid(1e-4 / ymean, std::max(c, 1e-3 / ymean)), candidates);
  }
  for (double x : candidates) {
    const double gamma = g.v(x) - 1.0;
    const double sigma = gamma / x;
    if (!(sigma > 0.0) || gamma == 0.0 || !std::isfinite(gamma)) continue;
    const double ll = gpd_log_likelihood(excesses, gamma, sigma);
    if (ll > best.log_likelihood) best = {gamma, sigma, ll};
  }
  if (best.gamma != 0.0 && 2.0 * (best.log_likelihood - exp_fit.log_likelihood) <= kChiSquare1At95) {
    return exp_fit;
  }
  return best;
}

double spot_quantile(double t, const GpdFit& fit, double q, std::size_t n, std::size_t n_peaks) {
  if (n_peaks == 0) throw InputError("spot_quantile: no peaks");
  const double r = q * static_cast<double>(n) / static_cast<double>(n_peaks);
  double z;
  if (fit.gamma == 0.0) {
    z = t - fit.sigma * std::log(r);
  } else {
    z = t + (fit.sigma / fit.gamma) * (std::pow(r, -fit.gamma) - 1.0);
  }
  return std::max(z, t);
}

SpotResult spot_threshold(const std::vector<double>& calibration, const std::vector<double>& stream,
                          const SpotOptions& options) {
  if (calibration.empty()) throw InputError("SPOT: calibration scores are empty");
  if (!(options.q > 0.0 && options.q < 1.0)) throw DomainError("SPOT: risk q must lie in (0, 1)");
  if (!(options.level > 0.0 && options.level < 1.0)) throw DomainError("SPOT: level must lie in (0, 1)");
  SpotResult res;
  res.initial_threshold = percentile(calibration, 100.0 * options.level);
  const double t = res.initial_threshold;
  std::vector<double> peaks;
  for (double v : calibration) {
    if (v > t) peaks.push_back(v - t);
  }
  res.calibration_peaks = peaks.size();
  if (peaks.size() < options.min_peaks) {
    res.fallback = true;
    res.warning = "SPOT: only " + std::to_string(peaks.size()) + " calibration peaks (need " +
                  std::to_string(options.min_peaks) + "); fell back to the ratio threshold with sigma=1";
    if (!stream.empty()) {
      const Thresholded th = threshold_by_ratio(stream, 1.0);
      res.flags = th.flags;
      res.thresholds.assign(stream.size(), th.threshold);
      res.calibration_z = th.threshold;
    }
    return res;
  }
  std::size_t n = calibration.size();
  GpdFit fit = fit_gpd(peaks);
  double z = spot_quantile(t, fit, options.q, n, peaks.size());
  res.calibration_fit = fit;
  res.calibration_z = z;
  res.flags.resize(stream.size());
  res.thresholds.resize(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const double x = stream[i];
    res.thresholds[i] = z;
    if (x > z) {
      res.flags[i] = 1;
      continue;
    }
    ++n;
    if (x > t) {
      peaks.push_back(x - t);
      fit = fit_gpd(peaks);
    }
    z = spot_quantile(t, fit, options.q, n, peaks.size());
  }
  return res;
}

}  // namespace patchad
