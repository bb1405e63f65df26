#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <random>

#include "cli.hpp"
#include "json.hpp"
#include "patchad/checkpoint.hpp"
#include "patchad/config.hpp"
#include "patchad/data.hpp"
#include "patchad/diagnostics.hpp"
#include "patchad/errors.hpp"
#include "patchad/io.hpp"
#include "patchad/metrics.hpp"
#include "patchad/scoring.hpp"
#include "patchad/synth.hpp"
#include "patchad/trainer.hpp"

namespace fs = std::filesystem;

namespace patchad::cli {

namespace {

using ojson = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

// 12 significant digits keeps reports stable across platforms.
ojson r12(std::optional<double> v) {
  if (!v) return nullptr;
  return std::stod(fmt("%.12g", *v));
}

nlohmann::json parse_json_file(const std::string& path, const char* what) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string(what) + " '" + path + "': invalid JSON: " + e.what());
  }
}

std::vector<std::string> header_cells(const std::string& text) {
  std::vector<std::string> cells;
  const std::string header = text.substr(0, text.find('\n'));
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = header.find(',', pos);
    std::string cell = header.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return cells;
}

// CSV label column is split out when the header has it.
LabeledSeries load_input(const std::string& path, const std::string& label_column, bool need_labels) {
  if (fs::path(path).extension() == ".pads") {
    LabeledSeries s = load_series_binary(path);
    if (need_labels && !s.labels) throw InputError(path + ": series file carries no labels");
    return s;
  }
  const std::string text = read_file(path);
  const auto cells = header_cells(text);
  const bool has = std::find(cells.begin(), cells.end(), label_column) != cells.end();
  if (need_labels && !has) throw InputError(path + ": no '" + label_column + "' column in the header");
  return parse_csv(text, has ? std::optional<std::string>(label_column) : std::nullopt, path);
}

// Labels only; the file may hold nothing but the label column.
std::vector<std::uint8_t> load_labels(const std::string& path, const std::string& label_column) {
  if (fs::path(path).extension() == ".pads") return *load_input(path, label_column, true).labels;
  const std::string text = read_file(path);
  const auto cells = header_cells(text);
  const auto it = std::find(cells.begin(), cells.end(), label_column);
  if (it == cells.end()) throw InputError(path + ": no '" + label_column + "' column in the header");
  if (cells.size() > 1) return *parse_csv(text, label_column, path).labels;
  std::vector<std::uint8_t> out;
  std::size_t row = 1, pos = text.find('\n');
  while (pos != std::string::npos && pos + 1 < text.size()) {
    const std::size_t next = text.find('\n', pos + 1);
    std::string cell = text.substr(pos + 1, next == std::string::npos ? std::string::npos : next - pos - 1);
    pos = next;
    ++row;
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    if (cell.empty()) continue;
    if (cell != "0" && cell != "1") {
      throw ParseError(path + ": row " + std::to_string(row) + ", column 1: label must be 0 or 1, got '" + cell + "'");
    }
    out.push_back(cell == "1");
  }
  if (out.empty()) throw ParseError(path + ": no data rows");
  return out;
}

void write_output_series(const std::string& path, const LabeledSeries& s) {
  if (fs::path(path).extension() == ".pads") {
    save_series_binary(path, s);
  } else {
    save_series_csv(path, s);
  }
}

void check_channels(const LabeledSeries& s, const ModelConfig& cfg, const std::string& path) {
  if (s.channels != cfg.channels) {
    throw InputError(path + ": data has " + std::to_string(s.channels) + " channels, model expects " +
                     std::to_string(cfg.channels));
  }
}

LabeledSeries normalize_for(const LoadedCheckpoint& ckpt, const LabeledSeries& s, std::ostream& err) {
  if (!ckpt.normalization) {
    err << "patchad: warning: checkpoint has no normalization stats; using raw values\n";
    return s;
  }
  return apply_zscore(s, *ckpt.normalization);
}

class Manifest {
 public:
  Manifest(const Invocation& inv) : start_(Clock::now()) {
    doc_["command"] = inv.command;
    doc_["tool_version"] = kToolVersion;
    doc_["seed"] = nullptr;
    doc_["config"] = nullptr;
    doc_["inputs"] = ojson::object();
    doc_["outputs"] = ojson::object();
    doc_["argv"] = inv.argv;
  }
  void seed(std::uint64_t s) { doc_["seed"] = s; }
  void config(const std::string& json_text) { doc_["config"] = ojson::parse(json_text); }
  void input(const char* key, const std::string& path) {
    if (!path.empty()) doc_["inputs"][key] = absolute(path);
  }
  void output(const char* key, const std::string& path) { doc_["outputs"][key] = absolute(path); }
  ojson& extra() { return doc_; }

  // Written next to the primary output as <out>.manifest.json.
  void write(const std::string& primary_out) {
    doc_["wall_seconds"] = std::chrono::duration<double>(Clock::now() - start_).count();
    write_file_atomic(primary_out + ".manifest.json", doc_.dump(2) + "\n");
  }

 private:
  ojson doc_;
  Clock::time_point start_;
};

ojson eval_json(const EvalReport& r) {
  ojson j;
  j["sigma"] = r12(r.sigma);
  j["threshold"] = r12(r.threshold);
  j["acc"] = r12(r.acc);
  j["precision"] = r12(r.precision);
  j["recall"] = r12(r.recall);
  j["pa_f1"] = r12(r.pa_f1);
  j["f1_cls"] = r12(r.f1_cls);
  j["auc"] = r12(r.auc);
  j["aff_precision"] = r12(r.aff_precision);
  j["aff_recall"] = r12(r.aff_recall);
  j["aff_f1"] = r12(r.aff_f1);
  j["vus_roc"] = r12(r.vus_roc);
  j["vus_pr"] = r12(r.vus_pr);
  j["vus_l_max"] = r.vus_l_max;
  auto counts = [](const Confusion& c) {
    ojson o;
    o["tp"] = c.tp;
    o["fp"] = c.fp;
    o["fn"] = c.fn;
    o["tn"] = c.tn;
    return o;
  };
  j["counts"]["raw"] = counts(r.raw);
  j["counts"]["adjusted"] = counts(r.adjusted);
  j["gaps"] = ojson::object();
  for (const auto& [k, v] : r.gaps) j["gaps"][k] = v;
  return j;
}

void print_eval_table(const EvalReport& r, std::ostream& out) {
  auto row = [&](const char* name, std::optional<double> v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "  %-14s %s\n", name, v ? fmt("%.6f", *v).c_str() : "undefined");
    out << buf;
  };
  out << "PA metrics\n";
  row("sigma", r.sigma);
  row("threshold", r.threshold);
  row("acc", r.acc);
  row("precision", r.precision);
  row("recall", r.recall);
  row("pa_f1", r.pa_f1);
  out << "non-PA metrics\n";
  row("f1_cls", r.f1_cls);
  row("auc", r.auc);
  row("aff_precision", r.aff_precision);
  row("aff_recall", r.aff_recall);
  row("aff_f1", r.aff_f1);
  row("vus_roc", r.vus_roc);
  row("vus_pr", r.vus_pr);
  out << "  vus_l_max      " << r.vus_l_max << "\n";
  out << "  raw      tp=" << r.raw.tp << " fp=" << r.raw.fp << " fn=" << r.raw.fn << " tn=" << r.raw.tn << "\n";
  out << "  adjusted tp=" << r.adjusted.tp << " fp=" << r.adjusted.fp << " fn=" << r.adjusted.fn
      << " tn=" << r.adjusted.tn << "\n";
  for (const auto& [k, v] : r.gaps) out << "  undefined " << k << ": " << v << "\n";
}

}  // namespace

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> config,
                           std::uint64_t fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv("PATCHAD_SEED"); env && *env) {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || env[0] == '-') {
      throw ConfigError(std::string("PATCHAD_SEED must be a non-negative integer, got '") + env + "'");
    }
    return v;
  }
  if (config) return *config;
  return fallback;
}

int cmd_train(const TrainArgs& a, const Invocation& inv, std::ostream& out, std::ostream& err) {
  TrainConfig cfg;
  std::optional<std::uint64_t> config_seed;
  if (!a.config.empty()) {
    nlohmann::json doc = parse_json_file(a.config, "config");
    // a train manifest replays its resolved config
    if (doc.is_object() && doc.contains("command") && doc.contains("config")) doc = doc["config"];
    cfg = train_config_from_json(doc.dump());
    if (doc.contains("seed")) config_seed = cfg.seed;
  }
  cfg.seed = resolve_seed(a.seed, config_seed);

  const LabeledSeries raw = load_input(a.data, a.label_column, false);
  cfg.model.channels = raw.channels;
  cfg.validate();
  const NormalizedSplit split = zscore_fit_apply(raw, {});

  std::size_t epoch_steps = 0;
  double epoch_total = 0.0, epoch_rec = 0.0;
  auto observer = [&](const StepRecord* s, const EpochRecord* e) {
    if (s) {
      ++epoch_steps;
      epoch_total += s->total;
      epoch_rec += s->rec;
      return;
    }
    if (!a.quiet && e) {
      const double n = static_cast<double>(std::max<std::size_t>(epoch_steps, 1));
      err << "epoch " << e->epoch + 1 << "/" << cfg.epochs << "  loss " << fmt("%.6f", epoch_total / n) << "  rec "
          << fmt("%.6f", epoch_rec / n);
      if (e->inter_entropy) err << "  H_inter " << fmt("%.4f", *e->inter_entropy);
      if (e->intra_entropy) err << "  H_intra " << fmt("%.4f", *e->intra_entropy);
      err << "  " << fmt("%.2f", e->wall_seconds) << "s\n";
    }
    epoch_steps = 0;
    epoch_total = epoch_rec = 0.0;
  };
  const TrainResult result = train(split.train, cfg, observer);

  const std::string log_path = a.out + ".log.jsonl";
  save_checkpoint(a.out, result.model, split.stats);
  write_file_atomic(log_path, result.log.to_jsonl());

  Manifest m(inv);
  m.seed(cfg.seed);
  TrainConfig resolved = cfg;
  m.config(train_config_to_json(resolved));
  m.extra()["channels"] = cfg.model.channels;
  m.input("data", a.data);
  m.input("config", a.config);
  m.output("checkpoint", a.out);
  m.output("log", log_path);
  m.extra()["steps"] = result.log.steps.size();
  m.extra()["halted"] = result.halted ? ojson(*result.halted) : ojson(nullptr);
  m.write(a.out);

  for (const auto& w : result.log.warnings) {
    if (!result.halted || w != *result.halted) err << "patchad: warning: " << w << "\n";
  }
  if (result.halted) {
    err << "patchad: error: training halted: " << *result.halted << "\n"
        << "patchad: last good parameters saved to " << a.out << "\n";
    return kExitNumeric;
  }
  out << "trained " << result.log.steps.size() << " steps on " << raw.length << "x" << raw.channels
      << " series; checkpoint " << a.out << "\n";
  return kExitOk;
}

int cmd_score(const ScoreArgs& a, const Invocation& inv, std::ostream& out, std::ostream& err) {
  if (!a.spot && !(a.sigma >= 0.0 && a.sigma <= 100.0)) throw ConfigError("--sigma must lie in [0, 100]");
  if (a.stride && *a.stride == 0) throw ConfigError("--stride must be positive");
  if (a.batch_size == 0) throw ConfigError("--batch-size must be positive");
  const LoadedCheckpoint ckpt = load_checkpoint(a.model);
  const ModelConfig& mc = ckpt.model.config();
  const LabeledSeries raw = load_input(a.data, a.label_column, false);
  check_channels(raw, mc, a.data);
  const LabeledSeries series = normalize_for(ckpt, raw, err);
  const ScoreSeries scored = score_full_series(ckpt.model, series, a.stride, a.batch_size);

  ScoreTable table;
  table.scores = scored.scores;
  Manifest m(inv);
  ojson settings;
  if (a.spot) {
    const LabeledSeries calib_raw = load_input(a.calib, a.label_column, false);
    check_channels(calib_raw, mc, a.calib);
    const LabeledSeries calib = normalize_for(ckpt, calib_raw, err);
    const std::vector<double> calib_scores = score_full_series(ckpt.model, calib, a.stride, a.batch_size).scores;
    SpotOptions opts;
    opts.q = a.q;
    opts.level = a.level;
    const SpotResult spot = spot_threshold(calib_scores, table.scores, opts);
    if (spot.warning) err << "patchad: warning: " << *spot.warning << "\n";
    table.flags = spot.flags;
    table.thresholds = spot.thresholds;
    settings["method"] = "spot";
    settings["q"] = a.q;
    settings["level"] = a.level;
    settings["initial_threshold"] = spot.initial_threshold;
    settings["calibration_z"] = spot.calibration_z;
    settings["gamma"] = spot.calibration_fit.gamma;
    settings["gpd_sigma"] = spot.calibration_fit.sigma;
    settings["calibration_peaks"] = spot.calibration_peaks;
    settings["fallback"] = spot.fallback;
    m.input("calib", a.calib);
  } else {
    const Thresholded th = threshold_by_ratio(table.scores, a.sigma);
    table.flags = th.flags;
    table.thresholds.assign(table.scores.size(), th.threshold);
    settings["method"] = "ratio";
    settings["sigma"] = a.sigma;
    settings["threshold"] = th.threshold;
  }
  save_scores(a.out, table);

  settings["stride"] = scored.stride;
  settings["batch_size"] = a.batch_size;
  m.config(model_config_to_json(mc));
  m.seed(mc.seed);
  m.extra()["scoring"] = settings;
  m.input("model", a.model);
  m.input("data", a.data);
  m.output("scores", a.out);
  m.write(a.out);

  const auto flagged = std::count(table.flags.begin(), table.flags.end(), 1);
  out << "scored " << table.scores.size() << " points; flagged " << flagged << "; wrote " << a.out << "\n";
  return kExitOk;
}

int cmd_eval(const EvalArgs& a, const Invocation& inv, std::ostream& out, std::ostream&) {
  const ScoreTable table = load_scores(a.scores);
  const std::vector<std::uint8_t> labels = load_labels(a.labels, a.label_column);
  if (labels.size() != table.scores.size()) {
    throw InputError("score file has " + std::to_string(table.scores.size()) + " points, labels file has " +
                     std::to_string(labels.size()));
  }
  std::vector<double> sigmas = a.sigma_sweep.empty() ? std::vector<double>{a.sigma} : a.sigma_sweep;
  for (double s : sigmas) {
    if (!(s >= 0.0 && s <= 100.0)) throw ConfigError("sigma values must lie in [0, 100]");
  }
  if (a.use_flags) sigmas.resize(1);

  std::vector<EvalReport> reports;
  for (double s : sigmas) {
    EvalOptions opts;
    opts.sigma = s;
    opts.vus_l_max = a.vus_l_max;
    if (a.use_flags) {
      opts.flags = table.flags;
      const bool constant = !table.thresholds.empty() &&
                            std::all_of(table.thresholds.begin(), table.thresholds.end(),
                                        [&](double t) { return t == table.thresholds.front(); });
      if (constant) opts.threshold = table.thresholds.front();
    }
    reports.push_back(evaluate(table.scores, labels, opts));
  }

  ojson doc;
  if (a.sigma_sweep.empty() || a.use_flags) {
    doc = eval_json(reports.front());
  } else {
    doc = ojson::array();
    for (const auto& r : reports) doc.push_back(eval_json(r));
  }
  const std::string text = doc.dump(2) + "\n";
  if (a.json) {
    out << text;
  } else {
    for (std::size_t i = 0; i < reports.size(); ++i) {
      if (i) out << "\n";
      print_eval_table(reports[i], out);
    }
  }
  if (!a.out.empty()) {
    write_file_atomic(a.out, text);
    Manifest m(inv);
    ojson cfg;
    cfg["sigmas"] = sigmas;
    cfg["use_flags"] = a.use_flags;
    cfg["vus_l_max"] = a.vus_l_max ? ojson(*a.vus_l_max) : ojson(nullptr);
    cfg["label_column"] = a.label_column;
    m.extra()["config"] = cfg;
    m.input("scores", a.scores);
    m.input("labels", a.labels);
    m.output("report", a.out);
    m.write(a.out);
  }
  return kExitOk;
}

int cmd_synth(const SynthArgs& a, const Invocation& inv, std::ostream& out, std::ostream&) {
  SynthSpec spec;
  std::optional<std::uint64_t> spec_seed;
  if (!a.spec.empty()) {
    const std::string text = read_file(a.spec);
    spec = synth_spec_from_json(text);
    if (parse_json_file(a.spec, "spec").contains("seed")) spec_seed = spec.seed;
  }
  spec.seed = resolve_seed(a.seed, spec_seed);
  const LabeledSeries s = synth_generate(spec);
  write_output_series(a.out, s);

  Manifest m(inv);
  m.seed(spec.seed);
  m.config(synth_spec_to_json(spec));
  m.input("spec", a.spec);
  m.output("series", a.out);
  m.write(a.out);
  const auto anomalous = std::count(s.labels->begin(), s.labels->end(), 1);
  out << "wrote " << s.length << "x" << s.channels << " series with " << anomalous << " anomalous points to "
      << a.out << "\n";
  return kExitOk;
}

double median_forward_seconds(const PatchADModel& model, std::size_t iterations, std::uint64_t seed) {
  const ModelConfig& c = model.config();
  std::mt19937_64 rng(seed);
  const Tensor x = Tensor::randn({1, c.window, c.channels}, 1.0, rng);
  NoGradGuard no_grad;
  for (int i = 0; i < 3; ++i) model.forward(x);
  std::vector<double> times;
  times.reserve(iterations);
  for (std::size_t i = 0; i < iterations; ++i) {
    const auto t0 = Clock::now();
    const auto outputs = model.forward(x);
    times.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t n = times.size();
  return n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("fit_line needs at least two matching points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw InputError("fit_line needs at least two distinct x values");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
  }
  f.r2 = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

int cmd_bench(const BenchArgs& a, const Invocation& inv, std::ostream& out, std::ostream&) {
  std::optional<LoadedCheckpoint> ckpt;
  ModelConfig base;
  if (!a.model.empty()) {
    ckpt = load_checkpoint(a.model);
    base = ckpt->model.config();
  } else {
    if (!a.config.empty()) base = train_config_from_json(read_file(a.config)).model;
    base.channels = a.channels;
  }
  if (!a.patch_sizes.empty()) {
    base.patch_sizes = a.patch_sizes;
  } else if (!a.window_sizes.empty() && a.model.empty() && a.config.empty()) {
    base.patch_sizes = {5, 7};
  }
  const std::vector<std::size_t> windows = a.window_sizes.empty() ? std::vector<std::size_t>{base.window}
                                                                  : a.window_sizes;
  ojson rows = ojson::array();
  std::vector<double> xs, ys;
  out << "window   params      flops/window   median ms\n";
  for (std::size_t w : windows) {
    ModelConfig cfg = base;
    cfg.window = w;
    cfg.validate();
    const bool reuse = ckpt && cfg == ckpt->model.config();
    const PatchADModel model = reuse ? ckpt->model.clone() : PatchADModel(cfg);
    const ParamCount pc = param_count(model);
    const std::uint64_t flops = estimate_flops(cfg);
    const double ms = 1e3 * median_forward_seconds(model, a.iterations);
    char line[128];
    std::snprintf(line, sizeof line, "%-8zu %-11zu %-14llu %.4f\n", w, pc.total,
                  static_cast<unsigned long long>(flops), ms);
    out << line;
    ojson row;
    row["window"] = w;
    row["params"] = pc.total;
    row["flops"] = flops;
    row["median_ms"] = ms;
    row["by_module"] = pc.by_module;
    rows.push_back(row);
    xs.push_back(static_cast<double>(w));
    ys.push_back(ms);
  }
  const ParamCount first = param_count(ckpt && windows.front() == base.window ? ckpt->model : PatchADModel([&] {
    ModelConfig c = base;
    c.window = windows.front();
    return c;
  }()));
  out << "parameters by module (window " << windows.front() << "):\n";
  for (const auto& [k, v] : first.by_module) out << "  " << k << " " << v << "\n";

  ojson doc;
  doc["config"] = ojson::parse(model_config_to_json(base));
  doc["iterations"] = a.iterations;
  doc["rows"] = rows;
  if (windows.size() >= 3) {
    const LineFit f = fit_line(xs, ys);
    doc["fit"] = {{"slope_ms_per_step", f.slope}, {"intercept_ms", f.intercept}, {"r2", f.r2}};
    out << "linear fit: slope " << fmt("%.6f", f.slope) << " ms/step, R^2 " << fmt("%.4f", f.r2) << "\n";
  }
  if (!a.out.empty()) {
    write_file_atomic(a.out, doc.dump(2) + "\n");
    Manifest m(inv);
    m.config(model_config_to_json(base));
    m.extra()["window_sizes"] = windows;
    m.extra()["iterations"] = a.iterations;
    m.input("model", a.model);
    m.input("config", a.config);
    m.output("report", a.out);
    m.write(a.out);
  }
  return kExitOk;
}

int cmd_diag(const DiagArgs& a, const Invocation& inv, std::ostream& out, std::ostream& err) {
  if (a.stride && *a.stride == 0) throw ConfigError("--stride must be positive");
  const LoadedCheckpoint ckpt = load_checkpoint(a.model);
  const ModelConfig& mc = ckpt.model.config();
  const LabeledSeries raw = load_input(a.data, a.label_column, false);
  check_channels(raw, mc, a.data);
  const LabeledSeries series = normalize_for(ckpt, raw, err);
  const std::size_t stride = a.stride.value_or(mc.window);

  const auto windows = make_windows(series.length, mc.window, stride);
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < std::min(windows.size(), a.max_windows); ++i) starts.push_back(windows[i].start);
  const EntropyReport ent = feature_entropy_report(ckpt.model, gather_windows(series, starts, mc.window));

  ojson doc;
  doc["windows"] = starts.size();
  doc["entropy"]["inter"] = ent.inter ? ojson(*ent.inter) : ojson(nullptr);
  doc["entropy"]["intra"] = ent.intra ? ojson(*ent.intra) : ojson(nullptr);
  doc["entropy"]["inter_per_scale"] = ent.inter_per_scale;
  doc["entropy"]["intra_per_scale"] = ent.intra_per_scale;
  doc["entropy"]["warning"] = ent.warning ? ojson(*ent.warning) : ojson(nullptr);
  auto opt = [](std::optional<double> v) { return v ? fmt("%.6f", *v) : std::string("undefined"); };
  out << "feature entropy over " << starts.size() << " windows\n";
  out << "  inter " << opt(ent.inter) << "\n  intra " << opt(ent.intra) << "\n";
  for (std::size_t i = 0; i < ent.inter_per_scale.size(); ++i) {
    out << "  scale P=" << mc.patch_sizes[i] << ": inter " << fmt("%.6f", ent.inter_per_scale[i]) << ", intra "
        << fmt("%.6f", ent.intra_per_scale[i]) << "\n";
  }
  if (ent.warning) err << "patchad: warning: " << *ent.warning << "\n";

  if (series.labels) {
    ojson checks = ojson::array();
    out << "mixing variance (predicted vs measured)\n";
    for (const auto& v : mixing_variance_check(ckpt.model, series, stride)) {
      ojson c;
      c["branch"] = v.branch;
      c["patch"] = v.patch;
      c["lambda"] = v.lambda;
      c["sigma1_sq"] = v.sigma1_sq;
      c["sigma2_sq"] = v.sigma2_sq;
      c["mean_anomalous_fraction"] = v.mean_anomalous_fraction;
      c["predicted"] = v.predicted;
      c["measured"] = v.measured;
      checks.push_back(c);
      out << "  " << v.branch << " P=" << v.patch << ": predicted " << fmt("%.6g", v.predicted) << ", measured "
          << fmt("%.6g", v.measured) << "\n";
    }
    doc["variance_check"] = checks;
  } else {
    doc["variance_check"] = nullptr;
    out << "mixing variance: skipped (data has no labels)\n";
  }

  if (!a.out.empty()) {
    write_file_atomic(a.out, doc.dump(2) + "\n");
    Manifest m(inv);
    m.config(model_config_to_json(mc));
    m.seed(mc.seed);
    m.extra()["stride"] = stride;
    m.extra()["max_windows"] = a.max_windows;
    m.input("model", a.model);
    m.input("data", a.data);
    m.output("report", a.out);
    m.write(a.out);
  }
  return kExitOk;
}

}  // namespace patchad::cli
