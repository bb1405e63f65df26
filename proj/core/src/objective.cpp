#include "patchad/objective.hpp"

#include <string>

#include "patchad/errors.hpp"
#include "patchad/ops.hpp"

namespace patchad {

BaseDistance parse_base_distance(std::string_view name) {
  if (name == "kl") return BaseDistance::kl;
  if (name == "l2") return BaseDistance::l2;
  if (name == "jsd") return BaseDistance::jsd;
  throw ConfigError("unknown loss variant '" + std::string(name) + "' (expected kl, l2 or jsd)");
}

std::string_view base_distance_name(BaseDistance kind) {
  switch (kind) {
    case BaseDistance::kl:
      return "kl";
    case BaseDistance::l2:
      return "l2";
    case BaseDistance::jsd:
      return "jsd";
  }
  return "kl";
}

Tensor upsample_inter(const Tensor& inter, std::size_t patch) {
  if (inter.rank() != 3) throw ShapeError("upsample_inter expects (B, N, D), got " + shape_str(inter.shape()));
  return repeat_interleave(inter, patch, 1);
}

Tensor upsample_intra(const Tensor& intra, std::size_t count) {
  if (intra.rank() != 3) throw ShapeError("upsample_intra expects (B, P, D), got " + shape_str(intra.shape()));
  return tile(intra, count, 1);
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes differ: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

Tensor safe_log(const Tensor& p) { return log(clamp_min(p, kProbabilityFloor)); }

// Per-row KL(p || q) over the last axis of probability tensors.
Tensor kl_probs(const Tensor& p, const Tensor& q) {
  const std::size_t last = p.rank() - 1;
  return sum(mul(p, sub(safe_log(p), safe_log(q))), last);
}

Tensor distance_probs(const Tensor& p, const Tensor& q, BaseDistance kind) {
  const std::size_t last = p.rank() - 1;
  switch (kind) {
    case BaseDistance::kl:
      return kl_probs(p, q);
    case BaseDistance::l2:
      return mean(square(sub(p, q)), last);
    case BaseDistance::jsd: {
      const Tensor m = mul_scalar(add(p, q), 0.5);
      return mul_scalar(add(kl_probs(p, m), kl_probs(q, m)), 0.5);
    }
  }
  return kl_probs(p, q);
}

}  // namespace

Tensor kl_rowwise(const Tensor& a, const Tensor& b) {
  return row_distance(a, b, BaseDistance::kl);
}

Tensor prob_distance(const Tensor& p, const Tensor& q, BaseDistance kind) {
  require_same_shape(p, q, "prob_distance");
  return distance_probs(p, q, kind);
}

Tensor row_distance(const Tensor& a, const Tensor& b, BaseDistance kind) {
  require_same_shape(a, b, "row_distance");
  const std::size_t last = a.rank() - 1;
  return distance_probs(softmax(a, last), softmax(b, last), kind);
}

Tensor discrepancy(const Tensor& a, const Tensor& b, BaseDistance kind) {
  require_same_shape(a, b, "discrepancy");
  const std::size_t last = a.rank() - 1;
  const Tensor p = softmax(a, last);
  const Tensor q = softmax(stop_gradient(b), last);
  return mean(add(distance_probs(p, q, kind), distance_probs(q, p, kind)));
}

Tensor cont_loss(const Tensor& inter_up, const Tensor& intra_up, BaseDistance kind) {
  require_same_shape(inter_up, intra_up, "cont_loss");
  const double length = static_cast<double>(inter_up.dim(1));
  return mul_scalar(sub(discrepancy(inter_up, intra_up, kind), discrepancy(intra_up, inter_up, kind)),
                    1.0 / length);
}

Tensor proj_loss(const Tensor& inter_up, const Tensor& intra_up, const Tensor& inter_proj_up,
                 const Tensor& intra_proj_up, BaseDistance kind) {
  return add(cont_loss(inter_proj_up, intra_up, kind), cont_loss(inter_up, intra_proj_up, kind));
}

Tensor rec_loss(const Tensor& reconstruction, const Tensor& x) {
  require_same_shape(reconstruction, x, "rec_loss");
  return mean(square(sub(reconstruction, x)));
}

LossBundle total_loss(const ForwardOutputs& outputs, const Tensor& x, double constraint,
                      BaseDistance kind) {
  if (!(constraint >= 0.0 && constraint <= 1.0)) {
    throw ContractError("total_loss: constraint must lie in [0, 1], got " + std::to_string(constraint));
  }
  if (outputs.empty()) throw ContractError("total_loss: no scale outputs");
  LossBundle bundle;
  for (const auto& s : outputs) {
    const Tensor n_up = upsample_inter(s.inter, s.patch);
    const Tensor p_up = upsample_intra(s.intra, s.count);
    const Tensor np_up = upsample_inter(s.inter_proj, s.patch);
    const Tensor pp_up = upsample_intra(s.intra_proj, s.count);
    ScaleLoss sl;
    sl.cont = cont_loss(n_up, p_up, kind);
    sl.proj = proj_loss(n_up, p_up, np_up, pp_up, kind);
    sl.rec = rec_loss(s.reconstruction, x);
    sl.total = add(add(mul_scalar(sl.cont, 1.0 - constraint), mul_scalar(sl.proj, constraint)), sl.rec);
    bundle.per_scale.push_back(std::move(sl));
  }
  const double inv_m = 1.0 / static_cast<double>(outputs.size());
  auto average = [&](Tensor ScaleLoss::*field) {
    Tensor acc = bundle.per_scale[0].*field;
    for (std::size_t i = 1; i < bundle.per_scale.size(); ++i) acc = add(acc, bundle.per_scale[i].*field);
    return mul_scalar(acc, inv_m);
  };
  bundle.l_cont = average(&ScaleLoss::cont);
  bundle.l_proj = average(&ScaleLoss::proj);
  bundle.l_rec = average(&ScaleLoss::rec);
  bundle.total = add(add(mul_scalar(bundle.l_cont, 1.0 - constraint),
                         mul_scalar(bundle.l_proj, constraint)),
                     bundle.l_rec);
  return bundle;
}

}  // namespace patchad
