#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "patchad/data.hpp"
#include "patchad/model.hpp"
#include "patchad/objective.hpp"

namespace patchad {

struct TrainConfig {
  ModelConfig model;
  std::size_t epochs = 3;
  std::size_t batch_size = 128;
  double learning_rate = 1e-4;
  std::optional<std::size_t> stride;  // default: window
  std::uint64_t seed = 0;             // copied into model.seed by train()
  bool diagnostics = true;            // per-epoch feature entropy
  BaseDistance loss = BaseDistance::kl;
  bool shuffle = false;

  std::size_t effective_stride() const { return stride.value_or(model.window); }

  // Throws ConfigError.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double total = 0.0;
  double cont = 0.0;
  double proj = 0.0;
  double rec = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::optional<double> inter_entropy;
  std::optional<double> intra_entropy;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::vector<std::string> warnings;

  // One JSON object per line: {"kind":"step",...} and {"kind":"epoch",...}.
  std::string to_jsonl() const;
};

struct TrainResult {
  PatchADModel model;
  TrainLog log;
  // Set when a non-finite loss or gradient stopped training; `model` then
  // holds the parameters from before the failing step.
  std::optional<std::string> halted;
};

// Called after every optimizer step (and once per epoch with step == nullptr).
using TrainObserver = std::function<void(const StepRecord* step, const EpochRecord* epoch)>;

// `series` must already be normalised and match model.channels.
TrainResult train(const LabeledSeries& series, const TrainConfig& config, const TrainObserver& observer = {});

// Loss bundle values for one batch without updating anything.
StepRecord evaluate_losses(const PatchADModel& model, const Tensor& batch, double constraint, BaseDistance kind);

}  // namespace patchad
