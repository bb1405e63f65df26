#include "cli.hpp"

#include <iostream>

#include "CLI11.hpp"
#include "patchad/errors.hpp"
#include "patchad/metrics.hpp"

namespace patchad::cli {

namespace {

// Converts the library's error classes into the documented exit codes.
int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigMismatchError*>(&e)) return kExitConfig;
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const DomainError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const InputError*>(&e) || dynamic_cast<const IoError*>(&e) ||
      dynamic_cast<const CheckpointError*>(&e) || dynamic_cast<const ShapeError*>(&e)) {
    return kExitData;
  }
  return kExitNumeric;
}

template <typename T>
void optional_option(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help,
                     const std::string& shown_default) {
  app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help)
      ->type_name(std::is_floating_point_v<T> ? "FLOAT" : "UINT")
      ->default_str(shown_default);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"PatchAD: patch-based MLP-Mixer time-series anomaly detector", "patchad"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Fit a model on a series and write a checkpoint");
  t->add_option("--data", train.data, "Training series (.csv or .pads)")->required();
  t->add_option("--config", train.config, "Training config JSON (or a train run manifest)");
  t->add_option("--out", train.out, "Checkpoint path; the log and manifest are written next to it")->required();
  t->add_option("--label-column", train.label_column, "CSV column excluded from the inputs when present");
  optional_option(t, "--seed", train.seed, "Seed (overrides PATCHAD_SEED and the config)", "env, config or 0");
  t->add_flag("--quiet", train.quiet, "No per-epoch progress on stderr")->default_str("off");

  ScoreArgs score;
  auto* s = app.add_subcommand("score", "Score a series with a trained checkpoint");
  s->add_option("--model", score.model, "Checkpoint written by train")->required();
  s->add_option("--data", score.data, "Series to score (.csv or .pads)")->required();
  s->add_option("--out", score.out, "Score CSV (timestamp,score,flag,threshold)")->required();
  s->add_option("--sigma", score.sigma, "Percent of points flagged by the ratio threshold");
  auto* spot = s->add_flag("--spot", score.spot, "Use the SPOT streaming threshold instead of --sigma")->default_str("off");
  auto* calib = s->add_option("--calib", score.calib, "Calibration series for SPOT (normal data)");
  spot->needs(calib);
  s->add_option("--q", score.q, "SPOT risk level");
  s->add_option("--level", score.level, "SPOT initial threshold quantile");
  optional_option(s, "--stride", score.stride, "Sliding-window stride", "window");
  s->add_option("--batch-size", score.batch_size, "Windows per forward pass");
  s->add_option("--label-column", score.label_column, "CSV column excluded from the inputs when present");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate a score file against ground-truth labels");
  e->add_option("--scores", eval.scores, "Score CSV written by score")->required();
  e->add_option("--labels", eval.labels, "Series file carrying the labels")->required();
  e->add_option("--label-column", eval.label_column, "Label column in a CSV labels file");
  auto* sigma = e->add_option("--sigma", eval.sigma, "Ratio threshold in percent");
  e->add_option("--sigma-sweep", eval.sigma_sweep, "Comma-separated sigmas; one report each")
      ->delimiter(',')
      ->default_str("none")
      ->excludes(sigma);
  e->add_flag("--use-flags", eval.use_flags, "Evaluate the flag column of the score file instead of a sigma")->default_str("off");
  optional_option(e, "--vus-l-max", eval.vus_l_max, "Largest VUS buffer width", "4x mean segment");
  e->add_option("--out", eval.out, "Write the report JSON here");
  e->add_flag("--json", eval.json, "Print JSON instead of the table")->default_str("off");

  SynthArgs synth;
  auto* y = app.add_subcommand("synth", "Generate a labelled synthetic series");
  y->add_option("--spec", synth.spec, "Generator spec JSON (defaults when omitted)");
  y->add_option("--out", synth.out, "Output series (.csv or .pads)")->required();
  optional_option(y, "--seed", synth.seed, "Seed (overrides PATCHAD_SEED and the spec)", "env, spec or 0");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Parameter count, analytic FLOPs and forward latency");
  b->add_option("--model", bench.model, "Checkpoint to measure");
  b->add_option("--config", bench.config, "Training config JSON to measure (ignored with --model)");
  b->add_option("--channels", bench.channels, "Channel count when no checkpoint is given");
  b->add_option("--window-sizes", bench.window_sizes, "Comma-separated window lengths to sweep")
      ->delimiter(',')
      ->default_str("model window");
  b->add_option("--patch-sizes", bench.patch_sizes, "Patch sizes (checkpoint or config value when given)")
      ->delimiter(',')
      ->default_str("5,7");
  b->add_option("--iterations", bench.iterations, "Timed forward passes per configuration")
      ->check(CLI::PositiveNumber);
  b->add_option("--out", bench.out, "Write the report JSON here");

  DiagArgs diag;
  auto* d = app.add_subcommand("diag", "Feature entropy and mixing-variance diagnostics");
  d->add_option("--model", diag.model, "Checkpoint to inspect")->required();
  d->add_option("--data", diag.data, "Series (.csv or .pads); labels enable the variance check")->required();
  optional_option(d, "--stride", diag.stride, "Window stride", "window");
  d->add_option("--max-windows", diag.max_windows, "Windows used as entropy samples")->check(CLI::PositiveNumber);
  d->add_option("--label-column", diag.label_column, "Label column in a CSV file");
  d->add_option("--out", diag.out, "Write the report JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ok) {
    return app.exit(ok, out, err);
  } catch (const CLI::ParseError& pe) {
    app.exit(pe, out, err);
    return kExitConfig;
  }

  Invocation inv;
  for (int i = 0; i < argc; ++i) inv.argv.emplace_back(argv[i]);
  try {
    if (t->parsed()) return cmd_train(train, {"train", inv.argv}, out, err);
    if (s->parsed()) return cmd_score(score, {"score", inv.argv}, out, err);
    if (e->parsed()) return cmd_eval(eval, {"eval", inv.argv}, out, err);
    if (y->parsed()) return cmd_synth(synth, {"synth", inv.argv}, out, err);
    if (b->parsed()) return cmd_bench(bench, {"bench", inv.argv}, out, err);
    if (d->parsed()) return cmd_diag(diag, {"diag", inv.argv}, out, err);
  } catch (const std::exception& ex) {
    err << "patchad: error: " << ex.what() << "\n";
    return exit_code_for(ex);
  }
  return kExitConfig;
}

}  // namespace patchad::cli
