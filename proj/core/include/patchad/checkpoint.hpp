#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "patchad/data.hpp"
#include "patchad/model.hpp"

namespace patchad {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (little-endian):
//   "PADC" | u32 version | u64 len + ModelConfig JSON | u64 FNV-1a of the JSON
//   | u32 tensor count | per tensor: u64 len + name, u64 n + n f64
//   | u8 has_norm [| u32 C | C f64 means | C f64 stds]
std::string checkpoint_bytes(const PatchADModel& model, const std::optional<ZScore>& normalization);
void save_checkpoint(const std::filesystem::path& path, const PatchADModel& model,
                     const std::optional<ZScore>& normalization = std::nullopt);

struct LoadedCheckpoint {
  PatchADModel model;
  std::optional<ZScore> normalization;
};

// Throws CheckpointError naming the failing section.
LoadedCheckpoint parse_checkpoint(const std::string& bytes, const std::string& source = "<memory>");
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Loads parameters into an existing model; ConfigMismatchError when the file
// was written for a different configuration.
std::optional<ZScore> load_checkpoint_into(const std::filesystem::path& path, PatchADModel& model);

}  // namespace patchad
