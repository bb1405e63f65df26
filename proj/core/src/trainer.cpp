#include "patchad/trainer.hpp"

#include <chrono>
#include <cmath>

#include "json.hpp"
#include "patchad/adam.hpp"
#include "patchad/diagnostics.hpp"
#include "patchad/errors.hpp"

namespace patchad {

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (stride && *stride == 0) throw ConfigError("stride must be >= 1");
}

std::string TrainLog::to_jsonl() const {
  using nlohmann::json;
  std::string out;
  std::size_t e = 0;
  auto emit_epoch = [&](const EpochRecord& r) {
    json j{{"kind", "epoch"}, {"epoch", r.epoch}, {"wall_seconds", r.wall_seconds}};
    j["inter_entropy"] = r.inter_entropy ? json(*r.inter_entropy) : json(nullptr);
    j["intra_entropy"] = r.intra_entropy ? json(*r.intra_entropy) : json(nullptr);
    out += j.dump() + "\n";
  };
  for (const auto& s : steps) {
    while (e < epochs.size() && epochs[e].epoch < s.epoch) emit_epoch(epochs[e++]);
    json j{{"kind", "step"}, {"step", s.step},   {"epoch", s.epoch}, {"total", s.total},
           {"l_cont", s.cont}, {"l_proj", s.proj}, {"l_rec", s.rec}};
    out += j.dump() + "\n";
  }
  while (e < epochs.size()) emit_epoch(epochs[e++]);
  for (const auto& w : warnings) out += json{{"kind", "warning"}, {"message", w}}.dump() + "\n";
  return out;
}

StepRecord evaluate_losses(const PatchADModel& model, const Tensor& batch, double constraint, BaseDistance kind) {
  NoGradGuard no_grad;
  const LossBundle b = total_loss(model.forward(batch), batch, constraint, kind);
  StepRecord r;
  r.total = b.total.item();
  r.cont = b.l_cont.item();
  r.proj = b.l_proj.item();
  r.rec = b.l_rec.item();
  return r;
}

TrainResult train(const LabeledSeries& series, const TrainConfig& config, const TrainObserver& observer) {
  config.validate();
  series.validate();
  ModelConfig mc = config.model;
  mc.seed = config.seed;
  if (series.channels != mc.channels) {
    throw InputError("training series has " + std::to_string(series.channels) + " channels, config expects " +
                     std::to_string(mc.channels));
  }
  TrainResult result{PatchADModel(mc), {}, std::nullopt};
  PatchADModel& model = result.model;
  TrainLog& log = result.log;

  WindowBatches batches(series, mc.window, config.effective_stride(), config.batch_size);
  std::vector<Tensor> params = model.parameters();
  AdamState adam(params, AdamOptions{config.learning_rate});

  Tensor probe;
  if (config.diagnostics) {
    const std::size_t n = std::min<std::size_t>(batches.window_count(), 256);
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < n; ++i) starts.push_back(batches.windows()[i].start);
    probe = gather_windows(series, starts, mc.window);
  }

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (config.shuffle) batches.shuffle(config.seed + epoch);
    for (std::size_t b = 0; b < batches.batch_count(); ++b) {
      const Tensor x = batches.batch(b);
      zero_grads(params);
      const LossBundle bundle = total_loss(model.forward(x), x, mc.constraint, config.loss);
      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.total = bundle.total.item();
      rec.cont = bundle.l_cont.item();
      rec.proj = bundle.l_proj.item();
      rec.rec = bundle.l_rec.item();
      if (!std::isfinite(rec.total)) {
        result.halted = "non-finite loss at step " + std::to_string(step) + " (epoch " + std::to_string(epoch) +
                        "): total=" + std::to_string(rec.total) + " l_cont=" + std::to_string(rec.cont) +
                        " l_proj=" + std::to_string(rec.proj) + " l_rec=" + std::to_string(rec.rec);
        log.warnings.push_back(*result.halted);
        zero_grads(params);
        return result;
      }
      bundle.total.backward();
      try {
        adam_step(params, adam);
      } catch (const NumericError& e) {
        result.halted = "step " + std::to_string(step) + " (epoch " + std::to_string(epoch) + "): " + e.what();
        log.warnings.push_back(*result.halted);
        zero_grads(params);
        return result;
      }
      log.steps.push_back(rec);
      if (observer) observer(&log.steps.back(), nullptr);
      ++step;
    }
    zero_grads(params);
    EpochRecord er;
    er.epoch = epoch;
    if (config.diagnostics) {
      const EntropyReport rep = feature_entropy_report(model, probe);
      er.inter_entropy = rep.inter;
      er.intra_entropy = rep.intra;
      if (rep.warning) log.warnings.push_back(*rep.warning);
    }
    er.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.epochs.push_back(er);
    if (observer) observer(nullptr, &log.epochs.back());
  }
  return result;
}

}  // namespace patchad
