#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "patchad/data.hpp"

namespace patchad {

enum class AnomalyType { global_point, contextual_point, seasonal, group_point, trend };

AnomalyType parse_anomaly_type(std::string_view name);
std::string_view anomaly_type_name(AnomalyType type);

struct AnomalySpec {
  AnomalyType type = AnomalyType::global_point;
  std::size_t start = 0;
  std::size_t duration = 1;
  double magnitude = 1.0;
  int channel = -1;  // -1: every channel
};

struct SynthSpec {
  std::size_t length = 1000;
  std::size_t channels = 1;
  double period = 50.0;
  double amplitude = 1.0;
  double noise_std = 0.1;
  std::vector<AnomalySpec> anomalies;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

// Per channel: amplitude * sin(2*pi*t/period) + N(0, noise_std^2), then each
// anomaly applied in list order over [start, start + duration):
//   global_point      + magnitude * (clean channel std)
//   contextual_point  moved to local_mean -/+ max(3, magnitude) * noise_std,
//                     local window = 2 periods centred on t, opposite side of
//                     the clean value, clamped into the clean global range
//   seasonal          sine period multiplied by magnitude
//   group_point       base + N(0, magnitude^2 * noise_std^2) replaces the noise
//   trend             + magnitude * noise_std * (t - start + 1)
LabeledSeries synth_generate(const SynthSpec& spec);

SynthSpec synth_spec_from_json(std::string_view text);
std::string synth_spec_to_json(const SynthSpec& spec);

}  // namespace patchad
