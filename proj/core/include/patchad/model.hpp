#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "patchad/ops.hpp"
#include "patchad/tensor.hpp"

namespace patchad {

enum class ReconstructFrom { reweighted, last_layer };

struct ModelConfig {
  std::size_t window = 105;
  std::vector<std::size_t> patch_sizes{3, 5};
  std::size_t channels = 1;
  std::size_t d_model = 40;
  std::size_t layers = 3;
  double constraint = 0.2;
  Activation activation = Activation::gelu;
  std::uint64_t seed = 0;
  ReconstructFrom reconstruct_from = ReconstructFrom::reweighted;
  // false builds separate Channel/MixRep mixers per path (ablation only).
  bool share_mixers = true;

  // Throws ConfigError on the first violated invariant.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct LinearLayer {
  Tensor weight;  // (in, out)
  Tensor bias;    // (out)
};

// LayerNorm -> FC -> activation -> FC along one axis, with residual.
struct MixerMlp {
  std::size_t axis = 0;
  Tensor gamma;
  Tensor beta;
  LinearLayer fc1;
  LinearLayer fc2;
};

// Two stacked FCs, no norm, no activation.
struct ProjectHead {
  LinearLayer fc1;
  LinearLayer fc2;
};

struct EncoderLayer {
  MixerMlp channel;  // shared by both paths
  MixerMlp inter;
  MixerMlp intra;
  MixerMlp mixrep;  // shared by both paths
  std::optional<MixerMlp> channel_intra;  // only when share_mixers == false
  std::optional<MixerMlp> mixrep_intra;
  ProjectHead inter_proj;
  ProjectHead intra_proj;
};

struct ScaleBranch {
  std::size_t patch = 0;  // P
  std::size_t count = 0;  // N = T / P
  LinearLayer embed_inter;  // P -> D
  LinearLayer embed_intra;  // N -> D
  std::vector<EncoderLayer> layers;
  Tensor inter_logits;  // (L) ReWeight logits
  Tensor intra_logits;
  LinearLayer rec_inter;  // N*D -> T
  LinearLayer rec_intra;  // P*D -> T
};

// Views produced by one scale branch for a batch of windows.
struct ScaleOutputs {
  std::size_t patch = 0;
  std::size_t count = 0;
  Tensor inter;           // (B, N, D)
  Tensor intra;           // (B, P, D)
  Tensor inter_proj;      // (B, N, D)
  Tensor intra_proj;      // (B, P, D)
  Tensor reconstruction;  // (B, T, C)
};

using ForwardOutputs = std::vector<ScaleOutputs>;

struct NamedParameter {
  std::string name;
  std::string module;  // breakdown bucket
  Tensor tensor;
};

struct ParamCount {
  std::size_t total = 0;
  std::map<std::string, std::size_t> by_module;
};

class PatchADModel {
 public:
  explicit PatchADModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const std::vector<ScaleBranch>& branches() const { return branches_; }
  std::vector<ScaleBranch>& branches() { return branches_; }

  // x: (B, T, C), already normalised.
  ForwardOutputs forward(const Tensor& x) const;

  // Deterministic module order; shared parameters appear once.
  std::vector<NamedParameter> named_parameters() const;
  std::vector<Tensor> parameters() const;

  // Deep copy of every parameter value.
  PatchADModel clone() const;

 private:
  ModelConfig config_;
  std::vector<ScaleBranch> branches_;
};

// Fixed sinusoidal encoding: even channel 2i holds sin(t / 10000^(2i/C)),
// odd channel 2i+1 the matching cos.
Tensor positional_table(std::size_t length, std::size_t channels);
Tensor positional_embed(const Tensor& x);

// (B, T, C) -> (B, C, N, P)
Tensor patching(const Tensor& x, std::size_t patch);
// (B, C, N, P) -> (B, T, C)
Tensor unpatch(const Tensor& patches);

struct ValueEmbeddings {
  Tensor inter;  // (B, C, N, D)
  Tensor intra;  // (B, C, P, D)
};
ValueEmbeddings value_embed(const Tensor& patches, const LinearLayer& embed_inter,
                            const LinearLayer& embed_intra);

Tensor mlp_block(const Tensor& x, const MixerMlp& mixer, Activation act);

struct EncoderState {
  Tensor inter;  // (B, C, N, D)
  Tensor intra;  // (B, C, P, D)
};
EncoderState encoder_layer(const EncoderState& in, const EncoderLayer& layer, Activation act);

Tensor project_head(const Tensor& h, const ProjectHead& head);

// sum_l softmax(logits)_l * layers[l]
Tensor reweight_combine(const std::vector<Tensor>& layers, const Tensor& logits);

// (B, C, N, D), (B, C, P, D) -> (B, T, C)
Tensor reconstruct(const Tensor& inter, const Tensor& intra, const LinearLayer& rec_inter,
                   const LinearLayer& rec_intra);

ParamCount param_count(const PatchADModel& model);

// Multiply-add count of every matmul in one forward pass of a single window,
// times two.
std::uint64_t estimate_flops(const ModelConfig& config);

}  // namespace patchad
