#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "patchad/model.hpp"

namespace patchad::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Full command line including the program name. Normal output goes to `out`,
// diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct TrainArgs {
  std::string data;
  std::string config;
  std::string out;
  std::string label_column = "label";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

struct ScoreArgs {
  std::string model;
  std::string data;
  std::string out;
  std::string calib;
  std::string label_column = "label";
  double sigma = 1.0;
  bool spot = false;
  double q = 1e-4;
  double level = 0.98;
  std::optional<std::size_t> stride;
  std::size_t batch_size = 128;
};

struct EvalArgs {
  std::string scores;
  std::string labels;
  std::string out;
  std::string label_column = "label";
  double sigma = 1.0;
  std::vector<double> sigma_sweep;
  bool use_flags = false;
  std::optional<std::size_t> vus_l_max;
  bool json = false;
};

struct SynthArgs {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct BenchArgs {
  std::string model;
  std::string config;
  std::string out;
  std::vector<std::size_t> window_sizes;
  std::vector<std::size_t> patch_sizes;
  std::size_t channels = 1;
  std::size_t iterations = 100;
};

struct DiagArgs {
  std::string model;
  std::string data;
  std::string out;
  std::string label_column = "label";
  std::optional<std::size_t> stride;
  std::size_t max_windows = 256;
};

struct Invocation {
  std::string command;
  std::vector<std::string> argv;
};

int cmd_train(const TrainArgs& a, const Invocation& inv, std::ostream& out, std::ostream& err);
int cmd_score(const ScoreArgs& a, const Invocation& inv, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalArgs& a, const Invocation& inv, std::ostream& out, std::ostream& err);
int cmd_synth(const SynthArgs& a, const Invocation& inv, std::ostream& out, std::ostream& err);
int cmd_bench(const BenchArgs& a, const Invocation& inv, std::ostream& out, std::ostream& err);
int cmd_diag(const DiagArgs& a, const Invocation& inv, std::ostream& out, std::ostream& err);

// flag > PATCHAD_SEED > config > fallback. Throws ConfigError on a malformed
// environment value.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> config,
                           std::uint64_t fallback = 0);

// Median wall-clock seconds of one single-window forward pass (no autograd).
double median_forward_seconds(const PatchADModel& model, std::size_t iterations, std::uint64_t seed = 0);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace patchad::cli
