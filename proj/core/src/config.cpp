#include "patchad/config.hpp"

#include <algorithm>
#include <initializer_list>

#include "json.hpp"
#include "patchad/errors.hpp"

namespace patchad {

using nlohmann::json;

std::string_view reconstruct_from_name(ReconstructFrom r) {
  return r == ReconstructFrom::last_layer ? "last_layer" : "reweighted";
}

ReconstructFrom parse_reconstruct_from(std::string_view name) {
  if (name == "reweighted") return ReconstructFrom::reweighted;
  if (name == "last_layer") return ReconstructFrom::last_layer;
  throw ConfigError("unknown reconstruct_from '" + std::string(name) + "' (expected reweighted or last_layer)");
}

namespace {

json parse_object(std::string_view text, const char* what) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(what) + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(std::string(what) + ": top level must be an object");
  return doc;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const char* what) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return it.key() == k; })) {
      throw ConfigError(std::string(what) + ": unknown key '" + it.key() + "'");
    }
  }
}

template <typename T>
T field(const json& obj, const char* key, const char* what) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": field '" + key + "': " + e.what());
  }
}

// Rejects negative or fractional numbers for count-like fields.
std::size_t count_field(const json& obj, const char* key, const char* what) {
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) {
    throw ConfigError(std::string(what) + ": field '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::vector<std::size_t> patch_list(const json& obj, const char* what) {
  const json& v = obj.at("patch_sizes");
  if (!v.is_array()) throw ConfigError(std::string(what) + ": 'patch_sizes' must be an array");
  std::vector<std::size_t> out;
  for (const auto& p : v) {
    if (!p.is_number_unsigned()) throw ConfigError(std::string(what) + ": 'patch_sizes' entries must be positive integers");
    out.push_back(p.get<std::size_t>());
  }
  return out;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& c) {
  json doc;
  doc["window"] = c.window;
  doc["patch_sizes"] = c.patch_sizes;
  doc["channels"] = c.channels;
  doc["d_model"] = c.d_model;
  doc["layers"] = c.layers;
  doc["constraint"] = c.constraint;
  doc["activation"] = std::string(activation_name(c.activation));
  doc["seed"] = c.seed;
  doc["reconstruct_from"] = std::string(reconstruct_from_name(c.reconstruct_from));
  doc["share_mixers"] = c.share_mixers;
  return doc.dump();
}

ModelConfig model_config_from_json(std::string_view text) {
  constexpr const char* what = "model config";
  const json doc = parse_object(text, what);
  const std::initializer_list<const char*> keys = {"window", "patch_sizes", "channels", "d_model", "layers",
                                                   "constraint", "activation", "seed", "reconstruct_from",
                                                   "share_mixers"};
  reject_unknown(doc, keys, what);
  for (const char* k : keys) {
    if (!doc.contains(k)) throw ConfigError(std::string(what) + ": missing key '" + k + "'");
  }
  ModelConfig c;
  c.window = count_field(doc, "window", what);
  c.patch_sizes = patch_list(doc, what);
  c.channels = count_field(doc, "channels", what);
  c.d_model = count_field(doc, "d_model", what);
  c.layers = count_field(doc, "layers", what);
  c.constraint = field<double>(doc, "constraint", what);
  try {
    c.activation = parse_activation(field<std::string>(doc, "activation", what));
  } catch (const Error& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
  c.seed = field<std::uint64_t>(doc, "seed", what);
  c.reconstruct_from = parse_reconstruct_from(field<std::string>(doc, "reconstruct_from", what));
  c.share_mixers = field<bool>(doc, "share_mixers", what);
  c.validate();
  return c;
}

TrainConfig train_config_from_json(std::string_view text, TrainConfig cfg) {
  constexpr const char* what = "config";
  const json doc = parse_object(text, what);
  reject_unknown(doc,
                 {"window", "patch_sizes", "d_model", "layers", "constraint", "activation", "reconstruct_from",
                  "share_mixers", "epochs", "batch_size", "learning_rate", "stride", "seed", "diagnostics", "loss",
                  "shuffle"},
                 what);
  auto has = [&](const char* k) { return doc.contains(k); };
  if (has("window")) cfg.model.window = count_field(doc, "window", what);
  if (has("patch_sizes")) cfg.model.patch_sizes = patch_list(doc, what);
  if (has("d_model")) cfg.model.d_model = count_field(doc, "d_model", what);
  if (has("layers")) cfg.model.layers = count_field(doc, "layers", what);
  if (has("constraint")) cfg.model.constraint = field<double>(doc, "constraint", what);
  if (has("activation")) {
    try {
      cfg.model.activation = parse_activation(field<std::string>(doc, "activation", what));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string(what) + ": " + e.what());
    }
  }
  if (has("reconstruct_from")) {
    cfg.model.reconstruct_from = parse_reconstruct_from(field<std::string>(doc, "reconstruct_from", what));
  }
  if (has("share_mixers")) cfg.model.share_mixers = field<bool>(doc, "share_mixers", what);
  if (has("epochs")) cfg.epochs = count_field(doc, "epochs", what);
  if (has("batch_size")) cfg.batch_size = count_field(doc, "batch_size", what);
  if (has("learning_rate")) cfg.learning_rate = field<double>(doc, "learning_rate", what);
  if (has("stride")) {
    if (doc["stride"].is_null()) {
      cfg.stride.reset();
    } else {
      cfg.stride = count_field(doc, "stride", what);
    }
  }
  if (has("seed")) cfg.seed = field<std::uint64_t>(doc, "seed", what);
  if (has("diagnostics")) cfg.diagnostics = field<bool>(doc, "diagnostics", what);
  if (has("loss")) cfg.loss = parse_base_distance(field<std::string>(doc, "loss", what));
  if (has("shuffle")) cfg.shuffle = field<bool>(doc, "shuffle", what);
  return cfg;
}

std::string train_config_to_json(const TrainConfig& c, int indent) {
  json doc;
  doc["window"] = c.model.window;
  doc["patch_sizes"] = c.model.patch_sizes;
  doc["d_model"] = c.model.d_model;
  doc["layers"] = c.model.layers;
  doc["constraint"] = c.model.constraint;
  doc["activation"] = std::string(activation_name(c.model.activation));
  doc["reconstruct_from"] = std::string(reconstruct_from_name(c.model.reconstruct_from));
  doc["share_mixers"] = c.model.share_mixers;
  doc["epochs"] = c.epochs;
  doc["batch_size"] = c.batch_size;
  doc["learning_rate"] = c.learning_rate;
  doc["stride"] = c.stride ? json(*c.stride) : json(nullptr);
  doc["seed"] = c.seed;
  doc["diagnostics"] = c.diagnostics;
  doc["loss"] = std::string(base_distance_name(c.loss));
  doc["shuffle"] = c.shuffle;
  return doc.dump(indent);
}

}  // namespace patchad
