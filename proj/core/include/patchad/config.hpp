#pragma once

#include <string>
#include <string_view>

#include "patchad/model.hpp"
#include "patchad/trainer.hpp"

namespace patchad {

// Canonical JSON (sorted keys, compact). Used verbatim in checkpoints.
std::string model_config_to_json(const ModelConfig& config);
// Every key required; unknown keys rejected. Throws ConfigError.
ModelConfig model_config_from_json(std::string_view text);

// Flat training config file. Every key optional; unknown keys rejected.
//   window, patch_sizes, d_model, layers, constraint, activation,
//   reconstruct_from, share_mixers, epochs, batch_size, learning_rate,
//   stride, seed, diagnostics, loss, shuffle
// Channel count always comes from the data.
TrainConfig train_config_from_json(std::string_view text, TrainConfig defaults = {});
// Same keys, all materialised (stride null when it follows the window).
std::string train_config_to_json(const TrainConfig& config, int indent = 2);

std::string_view reconstruct_from_name(ReconstructFrom r);
ReconstructFrom parse_reconstruct_from(std::string_view name);

}  // namespace patchad
