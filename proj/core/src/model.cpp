#include "patchad/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "patchad/errors.hpp"

namespace patchad {

void ModelConfig::validate() const {
  if (window == 0) throw ConfigError("window must be positive");
  if (channels == 0) throw ConfigError("channels must be positive");
  if (d_model == 0) throw ConfigError("d_model must be >= 1");
  if (layers == 0) throw ConfigError("layers must be >= 1");
  if (!(constraint >= 0.0 && constraint <= 1.0)) {
    throw ConfigError("constraint c must lie in [0, 1], got " + std::to_string(constraint));
  }
  if (patch_sizes.empty()) throw ConfigError("patch_sizes must not be empty");
  for (auto p : patch_sizes) {
    if (p == 0 || window % p != 0) {
      throw ConfigError("patch size " + std::to_string(p) + " does not divide window " +
                        std::to_string(window));
    }
  }
}

namespace {

LinearLayer make_linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return {Tensor::randn({in, out}, std::sqrt(2.0 / static_cast<double>(in)), rng, true),
          Tensor::zeros({out}, true)};
}

MixerMlp make_mixer(std::size_t axis, std::size_t width, std::mt19937_64& rng) {
  MixerMlp m;
  m.axis = axis;
  m.gamma = Tensor::full({width}, 1.0, true);
  m.beta = Tensor::zeros({width}, true);
  m.fc1 = make_linear(width, width, rng);
  m.fc2 = make_linear(width, width, rng);
  return m;
}

ProjectHead make_head(std::size_t width, std::mt19937_64& rng) {
  return {make_linear(width, width, rng), make_linear(width, width, rng)};
}

LinearLayer copy_linear(const LinearLayer& l) { return {l.weight.clone(), l.bias.clone()}; }

MixerMlp copy_mixer(const MixerMlp& m) {
  return {m.axis, m.gamma.clone(), m.beta.clone(), copy_linear(m.fc1), copy_linear(m.fc2)};
}

ProjectHead copy_head(const ProjectHead& h) { return {copy_linear(h.fc1), copy_linear(h.fc2)}; }

}  // namespace

PatchADModel::PatchADModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const std::size_t C = config_.channels;
  const std::size_t D = config_.d_model;
  const std::size_t T = config_.window;
  for (auto P : config_.patch_sizes) {
    ScaleBranch b;
    b.patch = P;
    b.count = T / P;
    const std::size_t N = b.count;
    b.embed_inter = make_linear(P, D, rng);
    b.embed_intra = make_linear(N, D, rng);
    for (std::size_t l = 0; l < config_.layers; ++l) {
      EncoderLayer layer;
      layer.channel = make_mixer(1, C, rng);
      layer.inter = make_mixer(2, N, rng);
      layer.intra = make_mixer(2, P, rng);
      layer.mixrep = make_mixer(3, D, rng);
      if (!config_.share_mixers) {
        layer.channel_intra = make_mixer(1, C, rng);
        layer.mixrep_intra = make_mixer(3, D, rng);
      }
      layer.inter_proj = make_head(D, rng);
      layer.intra_proj = make_head(D, rng);
      b.layers.push_back(std::move(layer));
    }
    b.inter_logits = Tensor::zeros({config_.layers}, true);
    b.intra_logits = Tensor::zeros({config_.layers}, true);
    b.rec_inter = make_linear(N * D, T, rng);
    b.rec_intra = make_linear(P * D, T, rng);
    branches_.push_back(std::move(b));
  }
}

PatchADModel PatchADModel::clone() const {
  PatchADModel copy = *this;
  for (auto& b : copy.branches_) {
    b.embed_inter = copy_linear(b.embed_inter);
    b.embed_intra = copy_linear(b.embed_intra);
    for (auto& layer : b.layers) {
      layer.channel = copy_mixer(layer.channel);
      layer.inter = copy_mixer(layer.inter);
      layer.intra = copy_mixer(layer.intra);
      layer.mixrep = copy_mixer(layer.mixrep);
      if (layer.channel_intra) layer.channel_intra = copy_mixer(*layer.channel_intra);
      if (layer.mixrep_intra) layer.mixrep_intra = copy_mixer(*layer.mixrep_intra);
      layer.inter_proj = copy_head(layer.inter_proj);
      layer.intra_proj = copy_head(layer.intra_proj);
    }
    b.inter_logits = b.inter_logits.clone();
    b.intra_logits = b.intra_logits.clone();
    b.rec_inter = copy_linear(b.rec_inter);
    b.rec_intra = copy_linear(b.rec_intra);
  }
  return copy;
}

std::vector<NamedParameter> PatchADModel::named_parameters() const {
  std::vector<NamedParameter> out;
  auto push_linear = [&out](const std::string& name, const std::string& module, const LinearLayer& l) {
    out.push_back({name + ".weight", module, l.weight});
    out.push_back({name + ".bias", module, l.bias});
  };
  auto push_mixer = [&](const std::string& name, const std::string& module, const MixerMlp& m) {
    out.push_back({name + ".norm.gamma", module, m.gamma});
    out.push_back({name + ".norm.beta", module, m.beta});
    push_linear(name + ".fc1", module, m.fc1);
    push_linear(name + ".fc2", module, m.fc2);
  };
  for (const auto& b : branches_) {
    const std::string scale = "scale" + std::to_string(b.patch);
    push_linear(scale + ".embed_inter", "value_embedding", b.embed_inter);
    push_linear(scale + ".embed_intra", "value_embedding", b.embed_intra);
    for (std::size_t l = 0; l < b.layers.size(); ++l) {
      const auto& layer = b.layers[l];
      const std::string prefix = scale + ".layer" + std::to_string(l);
      push_mixer(prefix + ".channel_mixer", "channel_mixer", layer.channel);
      if (layer.channel_intra) {
        push_mixer(prefix + ".channel_mixer_intra", "channel_mixer", *layer.channel_intra);
      }
      push_mixer(prefix + ".inter_mixer", "inter_mixer", layer.inter);
      push_mixer(prefix + ".intra_mixer", "intra_mixer", layer.intra);
      push_mixer(prefix + ".mixrep_mixer", "mixrep_mixer", layer.mixrep);
      if (layer.mixrep_intra) {
        push_mixer(prefix + ".mixrep_mixer_intra", "mixrep_mixer", *layer.mixrep_intra);
      }
      push_linear(prefix + ".inter_proj.fc1", "project_head", layer.inter_proj.fc1);
      push_linear(prefix + ".inter_proj.fc2", "project_head", layer.inter_proj.fc2);
      push_linear(prefix + ".intra_proj.fc1", "project_head", layer.intra_proj.fc1);
      push_linear(prefix + ".intra_proj.fc2", "project_head", layer.intra_proj.fc2);
    }
    out.push_back({scale + ".reweight.inter_logits", "reweight", b.inter_logits});
    out.push_back({scale + ".reweight.intra_logits", "reweight", b.intra_logits});
    push_linear(scale + ".rec_inter", "reconstruction", b.rec_inter);
    push_linear(scale + ".rec_intra", "reconstruction", b.rec_intra);
  }
  return out;
}

std::vector<Tensor> PatchADModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& p : named_parameters()) out.push_back(p.tensor);
  return out;
}

Tensor positional_table(std::size_t length, std::size_t channels) {
  std::vector<double> table(length * channels);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t pair = c - (c % 2);
      const double freq = std::pow(10000.0, static_cast<double>(pair) / static_cast<double>(channels));
      const double angle = static_cast<double>(t) / freq;
      table[t * channels + c] = (c % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::from({length, channels}, std::move(table));
}

Tensor positional_embed(const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("positional_embed expects (B, T, C), got " + shape_str(x.shape()));
  return add(x, positional_table(x.dim(1), x.dim(2)));
}

Tensor patching(const Tensor& x, std::size_t patch) {
  if (x.rank() != 3) throw ShapeError("patching expects (B, T, C), got " + shape_str(x.shape()));
  const std::size_t B = x.dim(0), T = x.dim(1), C = x.dim(2);
  if (patch == 0 || T % patch != 0) {
    throw ConfigError("patch size " + std::to_string(patch) + " does not divide window " +
                      std::to_string(T));
  }
  return reshape(permute(x, {0, 2, 1}), {B, C, T / patch, patch});
}

Tensor unpatch(const Tensor& patches) {
  if (patches.rank() != 4) {
    throw ShapeError("unpatch expects (B, C, N, P), got " + shape_str(patches.shape()));
  }
  const std::size_t B = patches.dim(0), C = patches.dim(1);
  const std::size_t T = patches.dim(2) * patches.dim(3);
  return permute(reshape(patches, {B, C, T}), {0, 2, 1});
}

ValueEmbeddings value_embed(const Tensor& patches, const LinearLayer& embed_inter,
                            const LinearLayer& embed_intra) {
  if (patches.rank() != 4) {
    throw ShapeError("value_embed expects (B, C, N, P), got " + shape_str(patches.shape()));
  }
  return {linear(patches, embed_inter.weight, embed_inter.bias),
          linear(transpose_dim(patches, 2), embed_intra.weight, embed_intra.bias)};
}

Tensor mlp_block(const Tensor& x, const MixerMlp& mixer, Activation act) {
  Tensor h = transpose_dim(x, mixer.axis);
  h = layer_norm(h, mixer.gamma, mixer.beta);
  h = linear(h, mixer.fc1.weight, mixer.fc1.bias);
  h = activation(h, act);
  h = linear(h, mixer.fc2.weight, mixer.fc2.bias);
  h = transpose_dim(h, mixer.axis);
  return add(h, x);
}

EncoderState encoder_layer(const EncoderState& in, const EncoderLayer& layer, Activation act) {
  const MixerMlp& channel_intra = layer.channel_intra ? *layer.channel_intra : layer.channel;
  const MixerMlp& mixrep_intra = layer.mixrep_intra ? *layer.mixrep_intra : layer.mixrep;
  Tensor n = mlp_block(in.inter, layer.channel, act);
  Tensor p = mlp_block(in.intra, channel_intra, act);
  n = mlp_block(n, layer.inter, act);
  p = mlp_block(p, layer.intra, act);
  n = mlp_block(n, layer.mixrep, act);
  p = mlp_block(p, mixrep_intra, act);
  return {n, p};
}

Tensor project_head(const Tensor& h, const ProjectHead& head) {
  return linear(linear(h, head.fc1.weight, head.fc1.bias), head.fc2.weight, head.fc2.bias);
}

Tensor reweight_combine(const std::vector<Tensor>& layers, const Tensor& logits) {
  if (layers.empty()) throw ContractError("reweight_combine: empty layer list");
  if (logits.numel() != layers.size()) {
    throw ShapeError("reweight_combine: " + std::to_string(logits.numel()) + " logits for " +
                     std::to_string(layers.size()) + " layers");
  }
  const Tensor weights = softmax(reshape(logits, {layers.size()}), 0);
  Tensor out = mul(slice(weights, 0, 0, 1), layers[0]);
  for (std::size_t l = 1; l < layers.size(); ++l) {
    if (layers[l].shape() != layers[0].shape()) {
      throw ShapeError("reweight_combine: layer shapes differ: " + shape_str(layers[0].shape()) +
                       " vs " + shape_str(layers[l].shape()));
    }
    out = add(out, mul(slice(weights, 0, l, 1), layers[l]));
  }
  return out;
}

Tensor reconstruct(const Tensor& inter, const Tensor& intra, const LinearLayer& rec_inter,
                   const LinearLayer& rec_intra) {
  Tensor x1 = linear(flatten_last2(inter), rec_inter.weight, rec_inter.bias);  // (B, C, T)
  Tensor x2 = linear(flatten_last2(intra), rec_intra.weight, rec_intra.bias);
  return permute(add(x1, x2), {0, 2, 1});
}

ForwardOutputs PatchADModel::forward(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(1) != config_.window || x.dim(2) != config_.channels) {
    throw ShapeError("model_forward expects (B, " + std::to_string(config_.window) + ", " +
                     std::to_string(config_.channels) + "), got " + shape_str(x.shape()));
  }
  const Tensor embedded = positional_embed(x);
  ForwardOutputs outputs;
  outputs.reserve(branches_.size());
  for (const auto& b : branches_) {
    const Tensor patches = patching(embedded, b.patch);
    auto [inter0, intra0] = value_embed(patches, b.embed_inter, b.embed_intra);
    EncoderState state{inter0, intra0};

    std::vector<Tensor> full_inter, full_intra, mean_inter, mean_intra, proj_inter, proj_intra;
    for (const auto& layer : b.layers) {
      state = encoder_layer(state, layer, config_.activation);
      full_inter.push_back(state.inter);
      full_intra.push_back(state.intra);
      Tensor n = mean(state.inter, 1);
      Tensor p = mean(state.intra, 1);
      proj_inter.push_back(project_head(n, layer.inter_proj));
      proj_intra.push_back(project_head(p, layer.intra_proj));
      mean_inter.push_back(std::move(n));
      mean_intra.push_back(std::move(p));
    }

    ScaleOutputs out;
    out.patch = b.patch;
    out.count = b.count;
    out.inter = reweight_combine(mean_inter, b.inter_logits);
    out.intra = reweight_combine(mean_intra, b.intra_logits);
    out.inter_proj = reweight_combine(proj_inter, b.inter_logits);
    out.intra_proj = reweight_combine(proj_intra, b.intra_logits);
    if (config_.reconstruct_from == ReconstructFrom::reweighted) {
      out.reconstruction = reconstruct(reweight_combine(full_inter, b.inter_logits),
                                       reweight_combine(full_intra, b.intra_logits), b.rec_inter,
                                       b.rec_intra);
    } else {
      out.reconstruction = reconstruct(full_inter.back(), full_intra.back(), b.rec_inter, b.rec_intra);
    }
    outputs.push_back(std::move(out));
  }
  return outputs;
}

ParamCount param_count(const PatchADModel& model) {
  ParamCount count;
  for (const auto& p : model.named_parameters()) {
    count.total += p.tensor.numel();
    count.by_module[p.module] += p.tensor.numel();
  }
  return count;
}

std::uint64_t estimate_flops(const ModelConfig& config) {
  config.validate();
  const std::uint64_t C = config.channels, D = config.d_model, T = config.window;
  std::uint64_t macs = 0;
  for (auto patch : config.patch_sizes) {
    const std::uint64_t P = patch, N = T / patch;
    macs += C * N * P * D * 2;  // both value embeddings
    const std::uint64_t per_layer = 2 * C * C * (N + P) * D  // channel mixer, both paths
                                    + 2 * N * N * C * D      // inter mixer
                                    + 2 * P * P * C * D      // intra mixer
                                    + 2 * D * D * C * (N + P)  // mixrep mixer
                                    + 2 * D * D * (N + P);     // project heads
    macs += per_layer * config.layers;
    macs += C * (N * D) * T + C * (P * D) * T;  // reconstruction
  }
  return 2 * macs;
}

}  // namespace patchad
