#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "patchad/data.hpp"
#include "patchad/model.hpp"
#include "patchad/tensor.hpp"

namespace patchad {

// Symmetric KL between the softmaxed views, per timestamp: (B, T, D) x2 -> (B, T).
Tensor pointwise_score(const Tensor& inter_up, const Tensor& intra_up);

// Elementwise mean over scales.
std::vector<double> fuse_scales(const std::vector<std::vector<double>>& per_scale);

// Fused per-timestamp scores for a batch of windows x: (B, T, C). Returns (B, T).
Tensor window_scores(const PatchADModel& model, const Tensor& x);

struct ScoreSeries {
  std::vector<double> scores;
  std::size_t window = 0;
  std::size_t stride = 0;
};

// Slides the model window over the whole series; overlapping window scores are
// averaged, and a right-aligned window covers any trailing remainder.
ScoreSeries score_full_series(const PatchADModel& model, const LabeledSeries& series,
                              std::optional<std::size_t> stride = std::nullopt,
                              std::size_t batch_size = 128);

// Type-7 (linear interpolation) percentile, pct in [0, 100].
double percentile(std::vector<double> values, double pct);

struct Thresholded {
  double threshold = 0.0;
  std::vector<std::uint8_t> flags;
};

// threshold = (100 - sigma)-th percentile; flag iff score > threshold.
Thresholded threshold_by_ratio(const std::vector<double>& scores, double sigma);

struct GpdFit {
  double gamma = 0.0;
  double sigma = 0.0;
  double log_likelihood = 0.0;
};

double gpd_log_likelihood(const std::vector<double>& excesses, double gamma, double sigma);

// Grimshaw's maximum-likelihood fit. The exponential (gamma = 0) fit is kept
// unless a gamma != 0 root beats it by the likelihood-ratio test at 5%.
GpdFit fit_gpd(const std::vector<double>& excesses);

// Tail quantile z_q for risk q after n observations with n_peaks exceedances of t.
double spot_quantile(double t, const GpdFit& fit, double q, std::size_t n, std::size_t n_peaks);

struct SpotOptions {
  double q = 1e-4;
  double level = 0.98;  // initial threshold quantile of the calibration scores
  std::size_t min_peaks = 10;
};

struct SpotResult {
  double initial_threshold = 0.0;  // t
  double calibration_z = 0.0;      // z_q after calibration
  GpdFit calibration_fit;
  std::size_t calibration_peaks = 0;
  std::vector<std::uint8_t> flags;
  std::vector<double> thresholds;  // z_q in force at each stream point
  bool fallback = false;
  std::optional<std::string> warning;
};

SpotResult spot_threshold(const std::vector<double>& calibration, const std::vector<double>& stream,
                          const SpotOptions& options = {});

}  // namespace patchad
