#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "patchad/checkpoint.hpp"
#include "patchad/data.hpp"
#include "patchad/io.hpp"
#include "patchad/model.hpp"

#include <unistd.h>

namespace fs = std::filesystem;

namespace patchad::cli {
namespace {

const fs::path kFixtures = PATCHAD_FIXTURE_DIR;
const fs::path kGolden = PATCHAD_GOLDEN_DIR;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result patchad(std::vector<std::string> args) {
  args.insert(args.begin(), "patchad");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Wall-clock fields are the only nondeterministic part of a run.
std::string without_wall_time(const std::string& jsonl) {
  std::istringstream in(jsonl);
  std::string line, out;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    j.erase("wall_seconds");
    out += j.dump() + "\n";
  }
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    static int counter = 0;
    dir_ = fs::temp_directory_path() / ("patchad_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir_);
    ::unsetenv("PATCHAD_SEED");
  }
  void TearDown() override {
    ::unsetenv("PATCHAD_SEED");
    fs::remove_all(dir_);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    write_file_atomic(path(name), text);
    return path(name);
  }

  // 2-channel synthetic series plus a small model config.
  void small_setup() {
    write("spec.json", R"({"length": 600, "channels": 2, "seed": 5, "anomalies": [
      {"type": "global_point", "start": 250, "duration": 1, "magnitude": 8},
      {"type": "group_point", "start": 400, "duration": 12, "magnitude": 20}]})");
    ASSERT_EQ(patchad({"synth", "--spec", path("spec.json"), "--out", path("s.csv")}).code, 0);
    write("cfg.json", R"({"window": 20, "patch_sizes": [4, 5], "d_model": 8, "layers": 2, "epochs": 1,
      "batch_size": 16, "stride": 10, "learning_rate": 0.001, "diagnostics": false})");
  }

  fs::path dir_;
};

TEST_F(CliTest, HelpMatchesGoldenFiles) {
  for (const std::string cmd : {"", "train", "score", "eval", "synth", "bench", "diag"}) {
    const Result r = cmd.empty() ? patchad({"--help"}) : patchad({cmd, "--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, read_file(kGolden / ("help_" + (cmd.empty() ? std::string("main") : cmd) + ".txt")))
        << "help for '" << cmd << "' changed";
  }
}

TEST_F(CliTest, HelpListsDefaults) {
  const Result r = patchad({"score", "--help"});
  for (const char* s : {"--sigma FLOAT [1]", "--q FLOAT [0.0001]", "--level FLOAT [0.98]", "--stride UINT [window]",
                        "--spot [off]", "--batch-size UINT [128]"}) {
    EXPECT_NE(r.out.find(s), std::string::npos) << s;
  }
}

TEST_F(CliTest, EvalReproducesOracleJsonByteForByte) {
  const std::string scores = (kFixtures / "metrics_200_scores.csv").string();
  const std::string labels = (kFixtures / "metrics_200_labels.csv").string();
  const std::string expected = read_file(kFixtures / "metrics_200_expected_sigma5.json");
  const Result r = patchad({"eval", "--scores", scores, "--labels", labels, "--sigma", "5", "--out", path("r.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(path("r.json")), expected);
  EXPECT_NE(r.out.find("pa_f1"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("r.json.manifest.json")));

  const Result j = patchad({"eval", "--scores", scores, "--labels", labels, "--sigma", "5", "--json"});
  EXPECT_EQ(j.out, expected);
}

TEST_F(CliTest, EvalSigmaSweepEmitsOneReportPerSigma) {
  const std::string scores = (kFixtures / "metrics_200_scores.csv").string();
  const std::string labels = (kFixtures / "metrics_200_labels.csv").string();
  const Result r = patchad({"eval", "--scores", scores, "--labels", labels, "--sigma-sweep", "1,5,10", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::ordered_json::parse(r.out);
  ASSERT_TRUE(doc.is_array());
  ASSERT_EQ(doc.size(), 3u);
  EXPECT_EQ(doc[0]["sigma"], 1.0);
  EXPECT_EQ(doc[2]["sigma"], 10.0);
  EXPECT_EQ(doc[1].dump(2) + "\n", read_file(kFixtures / "metrics_200_expected_sigma5.json"));
  EXPECT_EQ(patchad({"eval", "--scores", scores, "--labels", labels, "--sigma", "1", "--sigma-sweep", "2"}).code, 1);
}

TEST_F(CliTest, EvalPerfectAndSingleClass) {
  std::string sc = "timestamp,score,flag,threshold\n", lb = "label\n", zero = "label\n";
  for (int t = 0; t < 100; ++t) {
    const int y = (t >= 40 && t < 45) || t == 80;
    sc += std::to_string(t) + "," + std::to_string(y) + ",0,0\n";
    lb += std::to_string(y) + "\n";
    zero += "0\n";
  }
  write("sc.csv", sc);
  write("lb.csv", lb);
  write("zero.csv", zero);
  const Result r = patchad({"eval", "--scores", path("sc.csv"), "--labels", path("lb.csv"), "--sigma", "10",
                            "--vus-l-max", "0", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  for (const char* k : {"acc", "precision", "recall", "pa_f1", "f1_cls", "auc", "aff_precision", "aff_recall",
                        "aff_f1", "vus_roc", "vus_pr"}) {
    EXPECT_EQ(doc[k], 1.0) << k;
  }

  const Result one = patchad({"eval", "--scores", path("sc.csv"), "--labels", path("zero.csv"), "--json"});
  EXPECT_EQ(one.code, 0) << one.err;
  const auto d1 = nlohmann::json::parse(one.out);
  EXPECT_TRUE(d1["auc"].is_null());
  EXPECT_TRUE(d1["vus_roc"].is_null());
  EXPECT_TRUE(d1["gaps"].contains("auc"));
  const Result table = patchad({"eval", "--scores", path("sc.csv"), "--labels", path("zero.csv")});
  EXPECT_NE(table.out.find("undefined"), std::string::npos);
}

TEST_F(CliTest, EvalInputErrors) {
  const std::string scores = (kFixtures / "metrics_200_scores.csv").string();
  write("short.csv", "label\n0\n1\n");
  const Result r = patchad({"eval", "--scores", scores, "--labels", path("short.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("200"), std::string::npos);
  write("nolabel.csv", "a\n0\n");
  EXPECT_EQ(patchad({"eval", "--scores", scores, "--labels", path("nolabel.csv")}).code, 2);
  EXPECT_EQ(patchad({"eval", "--scores", path("missing.csv"), "--labels", path("short.csv")}).code, 2);
}

TEST_F(CliTest, SynthSeedPrecedence) {
  write("spec.json", R"({"length": 50, "seed": 3})");
  write("noseed.json", R"({"length": 50})");
  auto seed_of = [&](const std::string& out) {
    return nlohmann::json::parse(read_file(out + ".manifest.json"))["seed"].get<std::uint64_t>();
  };
  ASSERT_EQ(patchad({"synth", "--spec", path("spec.json"), "--out", path("a.csv")}).code, 0);
  EXPECT_EQ(seed_of(path("a.csv")), 3u);
  ASSERT_EQ(patchad({"synth", "--spec", path("noseed.json"), "--out", path("b.csv")}).code, 0);
  EXPECT_EQ(seed_of(path("b.csv")), 0u);
  ::setenv("PATCHAD_SEED", "5", 1);
  ASSERT_EQ(patchad({"synth", "--spec", path("spec.json"), "--out", path("c.csv")}).code, 0);
  EXPECT_EQ(seed_of(path("c.csv")), 5u);
  ASSERT_EQ(patchad({"synth", "--spec", path("spec.json"), "--out", path("d.csv"), "--seed", "7"}).code, 0);
  EXPECT_EQ(seed_of(path("d.csv")), 7u);
  ::setenv("PATCHAD_SEED", "x1", 1);
  EXPECT_EQ(patchad({"synth", "--spec", path("spec.json"), "--out", path("e.csv")}).code, 1);
  ::unsetenv("PATCHAD_SEED");
  // the seed reaches the generator
  EXPECT_NE(read_file(path("a.csv")), read_file(path("d.csv")));
  ASSERT_EQ(patchad({"synth", "--spec", path("noseed.json"), "--out", path("f.pads"), "--seed", "7"}).code, 0);
  EXPECT_EQ(load_series(path("f.pads")).values, load_csv(path("d.csv"), std::string("label")).values);
}

TEST_F(CliTest, ResolveSeedOrder) {
  EXPECT_EQ(resolve_seed(std::nullopt, std::nullopt, 9), 9u);
  EXPECT_EQ(resolve_seed(std::nullopt, 4, 9), 4u);
  ::setenv("PATCHAD_SEED", "6", 1);
  EXPECT_EQ(resolve_seed(std::nullopt, 4, 9), 6u);
  EXPECT_EQ(resolve_seed(2, 4, 9), 2u);
}

TEST_F(CliTest, TrainIsDeterministicAndReplayable) {
  small_setup();
  const std::string before = read_file(path("s.csv"));
  const auto train = [&](const std::string& out, std::vector<std::string> extra) {
    std::vector<std::string> args = {"train", "--quiet", "--data", path("s.csv"), "--out", path(out)};
    args.insert(args.end(), extra.begin(), extra.end());
    return patchad(args);
  };
  ASSERT_EQ(train("a.padc", {"--config", path("cfg.json"), "--seed", "7"}).code, 0);
  ASSERT_EQ(train("b.padc", {"--config", path("cfg.json"), "--seed", "7"}).code, 0);
  EXPECT_EQ(read_file(path("a.padc")), read_file(path("b.padc")));
  EXPECT_EQ(without_wall_time(read_file(path("a.padc.log.jsonl"))),
            without_wall_time(read_file(path("b.padc.log.jsonl"))));
  EXPECT_EQ(read_file(path("s.csv")), before);  // input untouched

  const auto manifest = nlohmann::json::parse(read_file(path("a.padc.manifest.json")));
  EXPECT_EQ(manifest["command"], "train");
  EXPECT_EQ(manifest["seed"], 7);
  EXPECT_EQ(manifest["config"]["window"], 20);
  EXPECT_EQ(manifest["config"]["epochs"], 1);
  EXPECT_EQ(manifest["config"]["loss"], "kl");  // defaults materialised
  EXPECT_EQ(manifest["tool_version"], kToolVersion);
  EXPECT_TRUE(manifest.contains("wall_seconds"));
  EXPECT_EQ(manifest["inputs"]["data"], fs::absolute(path("s.csv")).lexically_normal().string());

  // the manifest alone reproduces the run
  ASSERT_EQ(train("c.padc", {"--config", path("a.padc.manifest.json")}).code, 0);
  EXPECT_EQ(read_file(path("c.padc")), read_file(path("a.padc")));

  ::setenv("PATCHAD_SEED", "7", 1);
  ASSERT_EQ(train("d.padc", {"--config", path("cfg.json")}).code, 0);
  EXPECT_EQ(read_file(path("d.padc")), read_file(path("a.padc")));
  ::unsetenv("PATCHAD_SEED");
  ASSERT_EQ(train("e.padc", {"--config", path("cfg.json")}).code, 0);
  EXPECT_NE(read_file(path("e.padc")), read_file(path("a.padc")));

  // normalization stats come from the training data
  const auto ckpt = load_checkpoint(path("a.padc"));
  ASSERT_TRUE(ckpt.normalization.has_value());
  EXPECT_EQ(*ckpt.normalization, ZScoreFitter::fit(load_csv(path("s.csv"), std::string("label"))));
  EXPECT_EQ(ckpt.model.config().channels, 2u);
}

TEST_F(CliTest, TrainErrors) {
  small_setup();
  const Result missing = patchad({"train", "--data", path("nope.csv"), "--out", path("m.padc")});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find(path("nope.csv")), std::string::npos);
  write("bad.json", R"({"epoch": 3})");
  const Result bad = patchad({"train", "--data", path("s.csv"), "--config", path("bad.json"), "--out", path("m.padc")});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("epoch"), std::string::npos);
  write("div.json", R"({"window": 20, "patch_sizes": [3]})");
  EXPECT_EQ(patchad({"train", "--data", path("s.csv"), "--config", path("div.json"), "--out", path("m.padc")}).code, 1);
  EXPECT_EQ(patchad({"train", "--out", path("m.padc")}).code, 1);  // --data is required

  std::string rows = "a,b\n";
  for (int t = 0; t < 60; ++t) rows += (t == 33 ? std::string("nan") : std::to_string(t % 7)) + ",1\n";
  write("nan.csv", rows);
  const Result nan = patchad({"train", "--quiet", "--data", path("nan.csv"), "--config", path("cfg.json"), "--out",
                              path("nan.padc")});
  EXPECT_EQ(nan.code, 3);
  EXPECT_NE(nan.err.find("non-finite"), std::string::npos) << nan.err;
  EXPECT_TRUE(fs::exists(path("nan.padc")));
  EXPECT_TRUE(fs::exists(path("nan.padc.manifest.json")));
}

TEST_F(CliTest, ScoreDiagBench) {
  small_setup();
  ASSERT_EQ(patchad({"train", "--quiet", "--data", path("s.csv"), "--config", path("cfg.json"), "--out",
                     path("m.padc")})
                .code,
            0);
  const Result r = patchad({"score", "--model", path("m.padc"), "--data", path("s.csv"), "--out", path("sc.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const ScoreTable t = load_scores(path("sc.csv"));
  ASSERT_EQ(t.scores.size(), 600u);
  for (double s : t.scores) EXPECT_TRUE(std::isfinite(s));
  const auto flagged = std::count(t.flags.begin(), t.flags.end(), 1);
  EXPECT_GE(flagged, 5);  // sigma 1 on 600 points
  EXPECT_LE(flagged, 6);
  EXPECT_TRUE(fs::exists(path("sc.csv.manifest.json")));

  // same scores after another load
  ASSERT_EQ(patchad({"score", "--model", path("m.padc"), "--data", path("s.csv"), "--out", path("sc2.csv")}).code, 0);
  EXPECT_EQ(read_file(path("sc.csv")), read_file(path("sc2.csv")));

  const Result spot = patchad({"score", "--model", path("m.padc"), "--data", path("s.csv"), "--out", path("sp.csv"),
                               "--spot", "--calib", path("s.csv")});
  EXPECT_EQ(spot.code, 0) << spot.err;
  EXPECT_EQ(load_scores(path("sp.csv")).scores, t.scores);
  EXPECT_EQ(patchad({"score", "--model", path("m.padc"), "--data", path("s.csv"), "--out", path("sp.csv"), "--spot"})
                .code,
            1);

  write("three.csv", "a,b,c\n1,2,3\n4,5,6\n");
  const Result mismatch =
      patchad({"score", "--model", path("m.padc"), "--data", path("three.csv"), "--out", path("x.csv")});
  EXPECT_EQ(mismatch.code, 2);
  EXPECT_NE(mismatch.err.find("3 channels"), std::string::npos) << mismatch.err;
  EXPECT_NE(mismatch.err.find("expects 2"), std::string::npos) << mismatch.err;
  write("junk.padc", "PADC not really");
  EXPECT_EQ(patchad({"score", "--model", path("junk.padc"), "--data", path("s.csv"), "--out", path("x.csv")}).code, 2);

  const Result eval = patchad({"eval", "--scores", path("sc.csv"), "--labels", path("s.csv"), "--json"});
  EXPECT_EQ(eval.code, 0) << eval.err;

  const Result diag = patchad({"diag", "--model", path("m.padc"), "--data", path("s.csv"), "--out", path("d.json")});
  ASSERT_EQ(diag.code, 0) << diag.err;
  const auto dj = nlohmann::json::parse(read_file(path("d.json")));
  EXPECT_TRUE(std::isfinite(dj["entropy"]["inter"].get<double>()));
  EXPECT_TRUE(std::isfinite(dj["entropy"]["intra"].get<double>()));
  EXPECT_EQ(dj["variance_check"].size(), 4u);  // inter + intra per scale

  const Result bench =
      patchad({"bench", "--model", path("m.padc"), "--iterations", "5", "--out", path("b.json")});
  ASSERT_EQ(bench.code, 0) << bench.err;
  const auto bj = nlohmann::json::parse(read_file(path("b.json")));
  const auto ckpt = load_checkpoint(path("m.padc"));
  EXPECT_EQ(bj["rows"][0]["params"].get<std::size_t>(), param_count(ckpt.model).total);
  EXPECT_EQ(bj["rows"][0]["flops"].get<std::uint64_t>(), estimate_flops(ckpt.model.config()));
  EXPECT_GT(bj["rows"][0]["median_ms"].get<double>(), 0.0);

  // no stray temp files from the atomic writes
  for (const auto& e : fs::directory_iterator(dir_)) {
    EXPECT_EQ(e.path().string().find(".tmp."), std::string::npos) << e.path();
  }
}

TEST_F(CliTest, BenchDefaultConfigAndSweep) {
  const Result r = patchad({"bench", "--channels", "26", "--iterations", "1", "--out", path("b.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto bj = nlohmann::json::parse(read_file(path("b.json")));
  ModelConfig cfg;
  cfg.channels = 26;
  EXPECT_EQ(bj["rows"][0]["params"].get<std::size_t>(), param_count(PatchADModel(cfg)).total);
  EXPECT_NE(r.out.find("parameters by module"), std::string::npos);

  const Result sweep = patchad({"bench", "--window-sizes", "35,70,105", "--iterations", "2", "--out", path("s.json")});
  ASSERT_EQ(sweep.code, 0) << sweep.err;
  const auto sj = nlohmann::json::parse(read_file(path("s.json")));
  EXPECT_EQ(sj["rows"].size(), 3u);
  EXPECT_EQ(sj["config"]["patch_sizes"], nlohmann::json::array({5, 7}));
  EXPECT_TRUE(sj.contains("fit"));
  EXPECT_EQ(patchad({"bench", "--window-sizes", "36", "--iterations", "1"}).code, 1);
}

}  // namespace
}  // namespace patchad::cli
