#pragma once

#include <string_view>
#include <vector>

#include "patchad/model.hpp"
#include "patchad/tensor.hpp"

namespace patchad {

// Row-wise base distance between softmax-normalised D-vectors.
enum class BaseDistance { kl, l2, jsd };

BaseDistance parse_base_distance(std::string_view name);
std::string_view base_distance_name(BaseDistance kind);

inline constexpr double kProbabilityFloor = 1e-12;

// (B, N, D) -> (B, N*P, D); each row repeated P times in a row.
Tensor upsample_inter(const Tensor& inter, std::size_t patch);
// (B, P, D) -> (B, N*P, D); the whole P-row block tiled N times.
Tensor upsample_intra(const Tensor& intra, std::size_t count);

// KL(softmax(a_t) || softmax(b_t)) per row: (B, T, D) x2 -> (B, T).
Tensor kl_rowwise(const Tensor& a, const Tensor& b);
Tensor row_distance(const Tensor& a, const Tensor& b, BaseDistance kind);
// Same distances on rows that are already probability vectors.
Tensor prob_distance(const Tensor& p, const Tensor& q, BaseDistance kind);

// mean over B x T of dist(a, sg(b)) + dist(sg(b), a). Gradient reaches `a` only.
Tensor discrepancy(const Tensor& a, const Tensor& b, BaseDistance kind = BaseDistance::kl);

// (disc(N, P) - disc(P, N)) / T, on upsampled views.
Tensor cont_loss(const Tensor& inter_up, const Tensor& intra_up, BaseDistance kind = BaseDistance::kl);

// Cross pairing of raw and projected views, each term normalised by T.
Tensor proj_loss(const Tensor& inter_up, const Tensor& intra_up, const Tensor& inter_proj_up,
                 const Tensor& intra_proj_up, BaseDistance kind = BaseDistance::kl);

Tensor rec_loss(const Tensor& reconstruction, const Tensor& x);

struct ScaleLoss {
  Tensor cont;
  Tensor proj;
  Tensor rec;
  Tensor total;
};

struct LossBundle {
  Tensor l_cont;  // mean over scales
  Tensor l_proj;
  Tensor l_rec;
  Tensor total;  // (1 - c) * l_cont + c * l_proj + l_rec
  std::vector<ScaleLoss> per_scale;
};

LossBundle total_loss(const ForwardOutputs& outputs, const Tensor& x, double constraint,
                      BaseDistance kind = BaseDistance::kl);

}  // namespace patchad
