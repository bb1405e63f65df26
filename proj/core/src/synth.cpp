#include "patchad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "json.hpp"
#include "patchad/errors.hpp"

namespace patchad {

AnomalyType parse_anomaly_type(std::string_view name) {
  if (name == "global_point") return AnomalyType::global_point;
  if (name == "contextual_point") return AnomalyType::contextual_point;
  if (name == "seasonal") return AnomalyType::seasonal;
  if (name == "group_point") return AnomalyType::group_point;
  if (name == "trend") return AnomalyType::trend;
  throw ConfigError("unknown anomaly type '" + std::string(name) +
                    "' (expected global_point, contextual_point, seasonal, group_point or trend)");
}

std::string_view anomaly_type_name(AnomalyType type) {
  switch (type) {
    case AnomalyType::global_point:
      return "global_point";
    case AnomalyType::contextual_point:
      return "contextual_point";
    case AnomalyType::seasonal:
      return "seasonal";
    case AnomalyType::group_point:
      return "group_point";
    case AnomalyType::trend:
      return "trend";
  }
  return "global_point";
}

void SynthSpec::validate() const {
  if (length == 0) throw ConfigError("synth: length must be positive");
  if (channels == 0) throw ConfigError("synth: channels must be positive");
  if (!(period > 0.0) || !std::isfinite(period)) throw ConfigError("synth: period must be positive");
  if (!std::isfinite(amplitude)) throw ConfigError("synth: amplitude must be finite");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("synth: noise_std must be >= 0");
  for (std::size_t i = 0; i < anomalies.size(); ++i) {
    const auto& a = anomalies[i];
    const std::string tag = "synth: anomaly " + std::to_string(i) + ": ";
    if (a.duration == 0) throw ConfigError(tag + "duration must be positive");
    if (a.start >= length || a.duration > length - a.start) {
      throw ConfigError(tag + "window [" + std::to_string(a.start) + ", " + std::to_string(a.start + a.duration) +
                        ") lies outside [0, " + std::to_string(length) + ")");
    }
    if (!(a.magnitude > 0.0) || !std::isfinite(a.magnitude)) throw ConfigError(tag + "magnitude must be positive");
    if (a.channel < -1 || a.channel >= static_cast<int>(channels)) {
      throw ConfigError(tag + "channel " + std::to_string(a.channel) + " out of range");
    }
    if (a.type == AnomalyType::group_point && !(a.magnitude > 1.0)) {
      throw ConfigError(tag + "group_point magnitude must exceed 1 so the injected variance is larger");
    }
    if (a.type == AnomalyType::seasonal && a.magnitude == 1.0) {
      throw ConfigError(tag + "seasonal magnitude 1 leaves the period unchanged");
    }
  }
}

namespace {

double sine(double amplitude, double period, std::size_t t) {
  return amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period);
}

double population_std(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / n);
}

}  // namespace

LabeledSeries synth_generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t T = spec.length;
  const std::size_t C = spec.channels;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<std::vector<double>> noise(C, std::vector<double>(T));
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t t = 0; t < T; ++t) noise[c][t] = spec.noise_std * unit(rng);
  }
  std::vector<std::vector<double>> clean(C, std::vector<double>(T));
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t t = 0; t < T; ++t) clean[c][t] = sine(spec.amplitude, spec.period, t) + noise[c][t];
  }

  LabeledSeries out;
  out.channels = C;
  out.length = T;
  out.values.resize(C * T);
  for (std::size_t c = 0; c < C; ++c) {
    std::copy(clean[c].begin(), clean[c].end(), out.values.begin() + static_cast<std::ptrdiff_t>(c * T));
    out.channel_names.push_back("c" + std::to_string(c));
  }
  std::vector<std::uint8_t> labels(T, 0);

  const auto half = static_cast<std::size_t>(std::ceil(spec.period));
  for (const auto& a : spec.anomalies) {
    const std::size_t lo = a.start;
    const std::size_t hi = a.start + a.duration;
    for (std::size_t c = 0; c < C; ++c) {
      if (a.channel >= 0 && static_cast<std::size_t>(a.channel) != c) continue;
      const auto& base = clean[c];
      switch (a.type) {
        case AnomalyType::global_point: {
          const double spike = a.magnitude * population_std(base);
          for (std::size_t t = lo; t < hi; ++t) out.at(c, t) += spike;
          break;
        }
        case AnomalyType::contextual_point: {
          const auto [mn, mx] = std::minmax_element(base.begin(), base.end());
          const double shift = std::max(3.0, a.magnitude) * spec.noise_std;
          for (std::size_t t = lo; t < hi; ++t) {
            const std::size_t w0 = t >= half ? t - half : 0;
            const std::size_t w1 = std::min(T, t + half);
            double local = 0.0;
            for (std::size_t u = w0; u < w1; ++u) local += base[u];
            local /= static_cast<double>(w1 - w0);
            const double dir = base[t] > local ? -1.0 : 1.0;
            out.at(c, t) = std::clamp(local + dir * shift, *mn, *mx);
          }
          break;
        }
        case AnomalyType::seasonal:
          for (std::size_t t = lo; t < hi; ++t) {
            out.at(c, t) = sine(spec.amplitude, spec.period * a.magnitude, t) + noise[c][t];
          }
          break;
        case AnomalyType::group_point:
          for (std::size_t t = lo; t < hi; ++t) {
            out.at(c, t) = sine(spec.amplitude, spec.period, t) + a.magnitude * spec.noise_std * unit(rng);
          }
          break;
        case AnomalyType::trend:
          for (std::size_t t = lo; t < hi; ++t) {
            out.at(c, t) += a.magnitude * spec.noise_std * static_cast<double>(t - lo + 1);
          }
          break;
      }
    }
    for (std::size_t t = lo; t < hi; ++t) labels[t] = 1;
  }
  out.labels = std::move(labels);
  return out;
}

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return it.key() == k; }) == known.end()) {
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
  }
}

template <typename T>
T get_field(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": field '" + key + "': " + e.what());
  }
}

}  // namespace

SynthSpec synth_spec_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("synth spec: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("synth spec: top level must be an object");
  reject_unknown(doc, {"length", "channels", "period", "amplitude", "noise_std", "anomalies", "seed"}, "synth spec");
  SynthSpec s;
  s.length = get_field<std::size_t>(doc, "length", s.length, "synth spec");
  s.channels = get_field<std::size_t>(doc, "channels", s.channels, "synth spec");
  s.period = get_field<double>(doc, "period", s.period, "synth spec");
  s.amplitude = get_field<double>(doc, "amplitude", s.amplitude, "synth spec");
  s.noise_std = get_field<double>(doc, "noise_std", s.noise_std, "synth spec");
  s.seed = get_field<std::uint64_t>(doc, "seed", s.seed, "synth spec");
  if (doc.contains("anomalies")) {
    const auto& arr = doc["anomalies"];
    if (!arr.is_array()) throw ConfigError("synth spec: 'anomalies' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "synth spec: anomalies[" + std::to_string(i) + "]";
      const auto& a = arr[i];
      if (!a.is_object()) throw ConfigError(where + ": must be an object");
      reject_unknown(a, {"type", "start", "duration", "magnitude", "channel"}, where);
      if (!a.contains("type")) throw ConfigError(where + ": missing 'type'");
      AnomalySpec spec;
      spec.type = parse_anomaly_type(get_field<std::string>(a, "type", "", where));
      spec.start = get_field<std::size_t>(a, "start", spec.start, where);
      spec.duration = get_field<std::size_t>(a, "duration", spec.duration, where);
      spec.magnitude = get_field<double>(a, "magnitude", spec.magnitude, where);
      spec.channel = get_field<int>(a, "channel", spec.channel, where);
      s.anomalies.push_back(spec);
    }
  }
  s.validate();
  return s;
}

std::string synth_spec_to_json(const SynthSpec& spec) {
  json doc;
  doc["length"] = spec.length;
  doc["channels"] = spec.channels;
  doc["period"] = spec.period;
  doc["amplitude"] = spec.amplitude;
  doc["noise_std"] = spec.noise_std;
  doc["seed"] = spec.seed;
  doc["anomalies"] = json::array();
  for (const auto& a : spec.anomalies) {
    doc["anomalies"].push_back({{"type", std::string(anomaly_type_name(a.type))},
                                {"start", a.start},
                                {"duration", a.duration},
                                {"magnitude", a.magnitude},
                                {"channel", a.channel}});
  }
  return doc.dump(2);
}

}  // namespace patchad
