#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "patchad/checkpoint.hpp"
#include "patchad/config.hpp"
#include "patchad/errors.hpp"
#include "patchad/io.hpp"
#include "patchad/scoring.hpp"
#include "patchad/trainer.hpp"

#include <unistd.h>

namespace fs = std::filesystem;

namespace patchad {
namespace {

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("patchad_trainer_" + std::to_string(::getpid()) + "_" + name);
}

LabeledSeries sine_series(std::size_t length, std::size_t channels = 1) {
  std::vector<double> v(channels * length);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < length; ++t) {
      v[c * length + t] = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 20.0 + 0.7 * c);
    }
  }
  return make_series(channels, length, std::move(v));
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.model.window = 20;
  cfg.model.patch_sizes = {4, 5};
  cfg.model.channels = 1;
  cfg.model.d_model = 8;
  cfg.model.layers = 2;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e-3;
  cfg.stride = 5;
  cfg.seed = 4;
  cfg.diagnostics = false;
  return cfg;
}

std::vector<std::vector<double>> param_values(const PatchADModel& m) {
  std::vector<std::vector<double>> out;
  for (const auto& p : m.parameters()) out.push_back(p.to_vector());
  return out;
}

TEST(TrainerTest, StepCountIsCeilWindowsOverBatch) {
  TrainConfig cfg = small_config();
  cfg.epochs = 1;
  const auto series = sine_series(400);  // (400 - 20) / 5 + 1 = 77 windows
  const auto r = train(series, cfg);
  EXPECT_EQ(r.log.steps.size(), 5u);
  cfg.epochs = 2;
  cfg.batch_size = 77;
  EXPECT_EQ(train(series, cfg).log.steps.size(), 2u);
  cfg.batch_size = 1000;
  cfg.stride.reset();  // stride = window -> 20 windows
  EXPECT_EQ(train(series, cfg).log.steps.size(), 2u);
}

TEST(TrainerTest, ReconstructionLossDecreasesOnSine) {
  const TrainConfig cfg = small_config();
  const auto series = sine_series(400);
  WindowBatches all(series, cfg.model.window, cfg.effective_stride(), 1000);
  const Tensor x = all.batch(0);
  ModelConfig mc = cfg.model;
  mc.seed = cfg.seed;
  const StepRecord before = evaluate_losses(PatchADModel(mc), x, mc.constraint, BaseDistance::kl);
  const auto r = train(series, cfg);
  ASSERT_FALSE(r.halted);
  const StepRecord after = evaluate_losses(r.model, x, mc.constraint, BaseDistance::kl);
  EXPECT_LT(after.rec, before.rec);
  EXPECT_LT(r.log.steps.back().rec, r.log.steps.front().rec);
}

TEST(TrainerTest, SameSeedSameParameters) {
  TrainConfig cfg = small_config();
  cfg.diagnostics = true;
  const auto series = sine_series(300, 2);
  cfg.model.channels = 2;
  const auto a = train(series, cfg);
  const auto b = train(series, cfg);
  EXPECT_EQ(param_values(a.model), param_values(b.model));
  ASSERT_EQ(a.log.steps.size(), b.log.steps.size());
  for (std::size_t i = 0; i < a.log.steps.size(); ++i) EXPECT_EQ(a.log.steps[i].total, b.log.steps[i].total);
  cfg.seed = 5;
  EXPECT_NE(param_values(train(series, cfg).model), param_values(a.model));
  // the shuffle flag changes the batch order but stays deterministic
  cfg.shuffle = true;
  EXPECT_EQ(param_values(train(series, cfg).model), param_values(train(series, cfg).model));
}

TEST(TrainerTest, NonFiniteLossHaltsWithLastGoodParameters) {
  TrainConfig cfg = small_config();
  cfg.batch_size = 1;
  cfg.stride.reset();
  cfg.epochs = 1;
  auto series = sine_series(200);
  series.at(0, 45) = std::numeric_limits<double>::quiet_NaN();  // inside window 2
  const auto r = train(series, cfg);
  ASSERT_TRUE(r.halted.has_value());
  EXPECT_NE(r.halted->find("step 2"), std::string::npos) << *r.halted;
  EXPECT_EQ(r.log.steps.size(), 2u);
  ASSERT_FALSE(r.log.warnings.empty());

  // the returned parameters are exactly those after the two good steps
  const auto prefix = make_series(1, 40, std::vector<double>(series.values.begin(), series.values.begin() + 40));
  const auto good = train(prefix, cfg);
  ASSERT_FALSE(good.halted);
  EXPECT_EQ(param_values(r.model), param_values(good.model));
}

TEST(TrainerTest, LogJsonLines) {
  TrainConfig cfg = small_config();
  cfg.diagnostics = true;
  std::size_t step_calls = 0, epoch_calls = 0;
  const auto r = train(sine_series(400), cfg, [&](const StepRecord* s, const EpochRecord* e) {
    step_calls += s != nullptr;
    epoch_calls += e != nullptr;
  });
  EXPECT_EQ(step_calls, 15u);
  EXPECT_EQ(epoch_calls, 3u);
  std::istringstream in(r.log.to_jsonl());
  std::string line;
  std::size_t steps = 0, epochs = 0;
  long last_step = -1;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j["kind"] == "step") {
      EXPECT_EQ(j["step"].get<long>(), last_step + 1);
      last_step = j["step"].get<long>();
      for (const char* k : {"total", "l_cont", "l_proj", "l_rec", "epoch"}) EXPECT_TRUE(j.contains(k)) << k;
      ++steps;
    } else if (j["kind"] == "epoch") {
      EXPECT_TRUE(j["inter_entropy"].is_number());
      EXPECT_TRUE(j["intra_entropy"].is_number());
      EXPECT_GE(j["wall_seconds"].get<double>(), 0.0);
      EXPECT_EQ(j["epoch"].get<std::size_t>(), epochs);
      ++epochs;
    }
  }
  EXPECT_EQ(steps, 15u);
  EXPECT_EQ(epochs, 3u);
}

TEST(TrainerTest, LossVariantsTrain) {
  for (BaseDistance kind : {BaseDistance::l2, BaseDistance::jsd}) {
    TrainConfig cfg = small_config();
    cfg.epochs = 1;
    cfg.loss = kind;
    const auto r = train(sine_series(200), cfg);
    EXPECT_FALSE(r.halted);
    for (const auto& s : r.log.steps) EXPECT_TRUE(std::isfinite(s.total));
  }
}

TEST(TrainerTest, ViewsStayDistinct) {
  const TrainConfig cfg = small_config();
  const auto series = sine_series(400);
  const auto r = train(series, cfg);
  ASSERT_FALSE(r.halted);
  const auto s = score_full_series(r.model, series);
  double mean = 0;
  for (double v : s.scores) mean += v;
  mean /= static_cast<double>(s.scores.size());
  EXPECT_GT(mean, 1e-6);
}

TEST(TrainerTest, ConfigValidation) {
  TrainConfig cfg = small_config();
  cfg.epochs = 0;
  EXPECT_THROW(train(sine_series(100), cfg), ConfigError);
  cfg = small_config();
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.model.patch_sizes = {3};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  EXPECT_THROW(train(sine_series(100, 2), cfg), InputError);
}

TEST(ConfigJsonTest, RoundTripAndRejection) {
  TrainConfig cfg = small_config();
  cfg.loss = BaseDistance::jsd;
  cfg.model.activation = Activation::relu;
  cfg.model.reconstruct_from = ReconstructFrom::last_layer;
  cfg.shuffle = true;
  EXPECT_EQ(train_config_from_json(train_config_to_json(cfg)), cfg);
  TrainConfig no_stride = small_config();
  no_stride.stride.reset();
  EXPECT_EQ(train_config_from_json(train_config_to_json(no_stride)), no_stride);

  const TrainConfig partial = train_config_from_json(R"({"epochs": 5})");
  EXPECT_EQ(partial.epochs, 5u);
  EXPECT_EQ(partial.batch_size, 128u);
  EXPECT_THROW(train_config_from_json(R"({"epoch": 5})"), ConfigError);
  EXPECT_THROW(train_config_from_json(R"({"epochs": -1})"), ConfigError);
  EXPECT_THROW(train_config_from_json(R"({"loss": "hinge"})"), ConfigError);
  EXPECT_THROW(train_config_from_json("[1]"), ConfigError);

  EXPECT_EQ(model_config_from_json(model_config_to_json(cfg.model)), cfg.model);
  EXPECT_THROW(model_config_from_json(R"({"window": 20})"), ConfigError);
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg_ = small_config();
    cfg_.epochs = 1;
    series_ = sine_series(200);
    model_ = std::make_unique<PatchADModel>(train(series_, cfg_).model);
    stats_ = ZScoreFitter::fit(series_);
  }
  void TearDown() override {
    for (const char* n : {"a.padc", "b.padc", "c.padc"}) fs::remove(temp_path(n));
  }

  TrainConfig cfg_;
  LabeledSeries series_;
  std::unique_ptr<PatchADModel> model_;
  std::optional<ZScore> stats_;
};

TEST_F(CheckpointTest, SaveLoadSaveIsByteIdentical) {
  save_checkpoint(temp_path("a.padc"), *model_, stats_);
  const auto loaded = load_checkpoint(temp_path("a.padc"));
  save_checkpoint(temp_path("b.padc"), loaded.model, loaded.normalization);
  EXPECT_EQ(read_file(temp_path("a.padc")), read_file(temp_path("b.padc")));
  EXPECT_EQ(loaded.normalization, stats_);
  EXPECT_EQ(loaded.model.config(), model_->config());
  EXPECT_EQ(param_values(loaded.model), param_values(*model_));

  save_checkpoint(temp_path("c.padc"), *model_);
  EXPECT_FALSE(load_checkpoint(temp_path("c.padc")).normalization.has_value());
}

TEST_F(CheckpointTest, LoadedModelScoresBitwiseEqual) {
  save_checkpoint(temp_path("a.padc"), *model_, stats_);
  const auto loaded = load_checkpoint(temp_path("a.padc"));
  EXPECT_EQ(score_full_series(loaded.model, series_).scores, score_full_series(*model_, series_).scores);
  PatchADModel fresh(model_->config());
  load_checkpoint_into(temp_path("a.padc"), fresh);
  EXPECT_EQ(score_full_series(fresh, series_).scores, score_full_series(*model_, series_).scores);
}

TEST_F(CheckpointTest, ConfigMismatch) {
  save_checkpoint(temp_path("a.padc"), *model_, stats_);
  ModelConfig other = model_->config();
  other.d_model = 12;
  PatchADModel wrong(other);
  EXPECT_THROW(load_checkpoint_into(temp_path("a.padc"), wrong), ConfigMismatchError);
  other = model_->config();
  other.constraint = 0.3;  // same shapes, different config
  PatchADModel wrong2(other);
  EXPECT_THROW(load_checkpoint_into(temp_path("a.padc"), wrong2), ConfigMismatchError);
}

TEST_F(CheckpointTest, CorruptionNamesTheSection) {
  const std::string bytes = checkpoint_bytes(*model_, stats_);
  auto error_of = [](const std::string& b) -> std::string {
    try {
      parse_checkpoint(b);
    } catch (const CheckpointError& e) {
      return e.what();
    }
    return "";
  };
  // every truncation point fails with a named section
  for (std::size_t n = 0; n < bytes.size(); n += 1 + n / 16) {
    const std::string m = error_of(bytes.substr(0, n));
    EXPECT_NE(m.find("section '"), std::string::npos) << "prefix " << n << ": " << m;
  }
  std::string bad = bytes;
  bad[1] = 'X';
  EXPECT_NE(error_of(bad).find("magic"), std::string::npos);
  bad = bytes;
  bad[4] = 9;
  EXPECT_NE(error_of(bad).find("version"), std::string::npos);
  bad = bytes;
  bad[20] ^= 1;  // inside the config JSON
  EXPECT_NE(error_of(bad).find("section 'config"), std::string::npos);
  EXPECT_NE(error_of(bytes + "x").find("trailer"), std::string::npos);
  EXPECT_TRUE(error_of(bytes).empty());
}

}  // namespace
}  // namespace patchad
