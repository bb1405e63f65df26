#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchad/tensor.hpp"

namespace patchad {

// Per-channel z-score statistics. Only fit() (train data) or from_stats()
// (checkpoint restore) can produce one, so test data never feeds the fit.
class ZScore {
 public:
  static constexpr double kMinStd = 1e-12;

  static ZScore from_stats(std::vector<double> mean, std::vector<double> stddev);

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return stddev_; }
  std::size_t channels() const { return mean_.size(); }

  bool operator==(const ZScore&) const = default;

 private:
  ZScore(std::vector<double> mean, std::vector<double> stddev);
  friend class ZScoreFitter;

  std::vector<double> mean_;
  std::vector<double> stddev_;
};

// Multivariate series stored channel-major: values[c * length + t].
struct LabeledSeries {
  std::size_t channels = 0;
  std::size_t length = 0;
  std::vector<double> values;
  std::optional<std::vector<std::uint8_t>> labels;
  std::vector<std::string> channel_names;
  std::optional<ZScore> normalization;

  double at(std::size_t channel, std::size_t t) const { return values[channel * length + t]; }
  double& at(std::size_t channel, std::size_t t) { return values[channel * length + t]; }
  std::span<const double> channel(std::size_t c) const {
    return std::span<const double>(values).subspan(c * length, length);
  }

  // Throws InputError when the invariants do not hold.
  void validate() const;
};

LabeledSeries make_series(std::size_t channels, std::size_t length, std::vector<double> values);

// Rectangular numeric CSV with a header row, one row per timestamp. The named
// label column (if any) is split out as labels.
LabeledSeries load_csv(const std::filesystem::path& path,
                       const std::optional<std::string>& label_column = std::nullopt);
LabeledSeries parse_csv(const std::string& text,
                        const std::optional<std::string>& label_column = std::nullopt,
                        const std::string& source = "<memory>");
void save_series_csv(const std::filesystem::path& path, const LabeledSeries& series);

// Raw binary: "PADS", u32 version, u32 C, u64 T, f64 values (channel-major),
// u8 has_labels, then T label bytes when present.
void save_series_binary(const std::filesystem::path& path, const LabeledSeries& series);
LabeledSeries load_series_binary(const std::filesystem::path& path);

// Score CSV: header `timestamp,score,flag,threshold`, one row per timestamp.
struct ScoreTable {
  std::vector<double> scores;
  std::vector<std::uint8_t> flags;
  std::vector<double> thresholds;
};

void save_scores(const std::filesystem::path& path, const ScoreTable& table);
ScoreTable load_scores(const std::filesystem::path& path);

// Loads .csv or .pads by extension.
LabeledSeries load_series(const std::filesystem::path& path,
                          const std::optional<std::string>& label_column = std::nullopt);

class ZScoreFitter {
 public:
  // Population statistics (denominator n).
  static ZScore fit(const LabeledSeries& train);
};

LabeledSeries apply_zscore(const LabeledSeries& series, const ZScore& stats);

struct NormalizedSplit {
  ZScore stats;
  LabeledSeries train;
  std::vector<LabeledSeries> others;
};

// Fits on `train` only and applies the same statistics to every series.
NormalizedSplit zscore_fit_apply(const LabeledSeries& train, const std::vector<LabeledSeries>& others);

struct Window {
  std::size_t index = 0;
  std::size_t start = 0;
};

// Windows [k*stride, k*stride + window) that fit entirely inside the series.
std::vector<Window> make_windows(std::size_t total_length, std::size_t window, std::size_t stride);

// Stacks windows into a (B, window, C) tensor.
Tensor gather_windows(const LabeledSeries& series, std::span<const std::size_t> starts,
                      std::size_t window);

// Iterates make_windows() output in fixed-size batches.
class WindowBatches {
 public:
  WindowBatches(const LabeledSeries& series, std::size_t window, std::size_t stride,
                std::size_t batch_size);

  std::size_t window_count() const { return windows_.size(); }
  std::size_t batch_count() const;
  const std::vector<Window>& windows() const { return windows_; }

  // Window starts of batch i, in order.
  std::vector<std::size_t> batch_starts(std::size_t i) const;
  Tensor batch(std::size_t i) const;

  // Deterministic reordering of the windows (training shuffle flag).
  void shuffle(std::uint64_t seed);

 private:
  const LabeledSeries* series_;
  std::size_t window_;
  std::size_t batch_size_;
  std::vector<Window> windows_;
};

}  // namespace patchad
