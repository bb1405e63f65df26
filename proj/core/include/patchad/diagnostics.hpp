#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "patchad/data.hpp"
#include "patchad/model.hpp"
#include "patchad/tensor.hpp"

namespace patchad {

inline constexpr double kVarianceFloor = 1e-12;

// 0.5 * ln(2*pi*e*variance). Throws DomainError for variance <= 0.
double gaussian_entropy(double variance);

// lambda * (s1 + (k / n) * (s2 - s1)).
double mixture_variance(double sigma1_sq, double sigma2_sq, double k, double n, double lambda);

// Rows of `features` along axis 0 are samples; every other entry is a
// dimension. Mean over dimensions of gaussian_entropy(sample variance), with
// the variance floored at kVarianceFloor. nullopt for fewer than 2 samples.
std::optional<double> feature_entropy(const Tensor& features);

struct EntropyReport {
  std::optional<double> inter;  // averaged over scales
  std::optional<double> intra;
  std::vector<double> inter_per_scale;
  std::vector<double> intra_per_scale;
  std::optional<std::string> warning;
};

// Entropy of the final inter / intra views with windows as samples.
EntropyReport feature_entropy_report(const PatchADModel& model, const Tensor& windows);

// Entropy of one window's view entries minus that of a reference window, i.e.
// 0.5 * ln(var_a / var_b), averaged over scales.
struct BranchContrast {
  double inter = 0.0;
  double intra = 0.0;
};
BranchContrast branch_contrast(const PatchADModel& model, const Tensor& anomalous_window,
                               const Tensor& clean_window);

// Predicted vs measured output variance of the first encoder layer's inter
// (width N) and intra (width P) mixer FC applied to the raw patch grid.
// lambda is the mean squared column norm of that FC weight; sigma1^2 and
// sigma2^2 are the second moments of normal and anomalous points.
struct VarianceCheck {
  std::string branch;
  std::size_t patch = 0;
  double lambda = 0.0;
  double sigma1_sq = 0.0;
  double sigma2_sq = 0.0;
  double mean_anomalous_fraction = 0.0;
  double predicted = 0.0;
  double measured = 0.0;
};
std::vector<VarianceCheck> mixing_variance_check(const PatchADModel& model, const LabeledSeries& series,
                                                 std::size_t stride);

}  // namespace patchad
