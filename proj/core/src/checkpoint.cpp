#include "patchad/checkpoint.hpp"

#include <algorithm>
#include <cstring>

#include "patchad/config.hpp"
#include "patchad/errors.hpp"
#include "patchad/io.hpp"

namespace patchad {

std::string checkpoint_bytes(const PatchADModel& model, const std::optional<ZScore>& normalization) {
  if (normalization && normalization->channels() != model.config().channels) {
    throw ContractError("checkpoint: normalization covers " + std::to_string(normalization->channels()) +
                        " channels, model has " + std::to_string(model.config().channels));
  }
  const std::string cfg = model_config_to_json(model.config());
  ByteWriter w;
  w.raw("PADC");
  w.u32(kCheckpointVersion);
  w.u64(cfg.size());
  w.raw(cfg);
  w.u64(fnv1a64(cfg));
  const auto params = model.named_parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.u64(p.name.size());
    w.raw(p.name);
    const auto d = p.tensor.data();
    w.u64(d.size());
    for (double v : d) w.f64(v);
  }
  w.u8(normalization ? 1 : 0);
  if (normalization) {
    w.u32(static_cast<std::uint32_t>(normalization->channels()));
    for (double v : normalization->mean()) w.f64(v);
    for (double v : normalization->stddev()) w.f64(v);
  }
  return w.bytes();
}

void save_checkpoint(const std::filesystem::path& path, const PatchADModel& model,
                     const std::optional<ZScore>& normalization) {
  write_file_atomic(path, checkpoint_bytes(model, normalization));
}

namespace {

struct Header {
  ModelConfig config;
  std::string config_json;
};

Header read_header(ByteReader& r, const std::string& where) {
  if (r.raw(4, "magic") != "PADC") throw CheckpointError(where + "section 'magic': not a PADC checkpoint");
  const auto version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(where + "section 'version': unsupported version " + std::to_string(version));
  }
  const auto len = r.u64("config");
  Header h;
  h.config_json = std::string(r.raw(static_cast<std::size_t>(std::min<std::uint64_t>(len, r.remaining() + 1)), "config"));
  const auto hash = r.u64("config hash");
  if (hash != fnv1a64(h.config_json)) throw CheckpointError(where + "section 'config hash': hash does not match config block");
  try {
    h.config = model_config_from_json(h.config_json);
  } catch (const ConfigError& e) {
    throw CheckpointError(where + "section 'config': " + e.what());
  }
  return h;
}

// Reads tensors into `model` (whose configuration must match the header).
std::optional<ZScore> read_body(ByteReader& r, PatchADModel& model, const std::string& where) {
  auto params = model.named_parameters();
  const auto count = r.u32("tensor count");
  if (count != params.size()) {
    throw CheckpointError(where + "section 'tensor count': file has " + std::to_string(count) + " tensors, model has " +
                          std::to_string(params.size()));
  }
  for (auto& p : params) {
    const auto name_len = r.u64("tensor name");
    const std::string name(r.raw(static_cast<std::size_t>(std::min<std::uint64_t>(name_len, r.remaining() + 1)), "tensor name"));
    if (name != p.name) {
      throw CheckpointError(where + "section 'tensor " + p.name + "': found tensor '" + name + "' instead");
    }
    const auto n = r.u64("tensor data");
    if (n != p.tensor.numel()) {
      throw CheckpointError(where + "section 'tensor " + p.name + "': " + std::to_string(n) + " values, expected " +
                            std::to_string(p.tensor.numel()));
    }
    auto dst = p.tensor.mutable_data();
    for (auto& v : dst) v = r.f64("tensor data");
  }
  std::optional<ZScore> norm;
  if (r.u8("normalization")) {
    const auto C = r.u32("normalization");
    if (C != model.config().channels) throw CheckpointError(where + "section 'normalization': channel count mismatch");
    std::vector<double> mean(C), stddev(C);
    for (auto& v : mean) v = r.f64("normalization");
    for (auto& v : stddev) v = r.f64("normalization");
    try {
      norm = ZScore::from_stats(std::move(mean), std::move(stddev));
    } catch (const InputError& e) {
      throw CheckpointError(where + "section 'normalization': " + e.what());
    }
  }
  if (r.remaining() != 0) throw CheckpointError(where + "section 'trailer': unexpected trailing bytes");
  return norm;
}

}  // namespace

LoadedCheckpoint parse_checkpoint(const std::string& bytes, const std::string& source) {
  const std::string where = source + ": ";
  ByteReader r(bytes);
  try {
    const Header h = read_header(r, where);
    PatchADModel model(h.config);
    auto norm = read_body(r, model, where);
    return {std::move(model), std::move(norm)};
  } catch (const TruncatedInput& t) {
    throw CheckpointError(where + "section '" + t.section + "': file is truncated");
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path), path.string());
}

std::optional<ZScore> load_checkpoint_into(const std::filesystem::path& path, PatchADModel& model) {
  const std::string bytes = read_file(path);
  const std::string where = path.string() + ": ";
  ByteReader r(bytes);
  try {
    const Header h = read_header(r, where);
    if (!(h.config == model.config())) {
      throw ConfigMismatchError(where + "checkpoint config " + h.config_json + " does not match model config " +
                                model_config_to_json(model.config()));
    }
    // Decode into a scratch model first so a failure leaves `model` untouched.
    PatchADModel scratch(h.config);
    auto norm = read_body(r, scratch, where);
    auto dst = model.named_parameters();
    const auto src = scratch.named_parameters();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      const auto s = src[i].tensor.data();
      std::copy(s.begin(), s.end(), dst[i].tensor.mutable_data().begin());
    }
    return norm;
  } catch (const TruncatedInput& t) {
    throw CheckpointError(where + "section '" + t.section + "': file is truncated");
  }
}

}  // namespace patchad
