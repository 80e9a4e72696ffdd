#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "pmseg/checkpoint.hpp"
#include "pmseg/error.hpp"
#include "pmseg/evaluate.hpp"
#include "pmseg/train.hpp"

using namespace pmseg;
namespace fs = std::filesystem;

namespace {

// 16x16 images, half of them holding one bright square.
std::vector<Sample> bright_squares(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::uniform_int_distribution<int> pos(1, 9), side(4, 6);
  std::vector<Sample> out;
  for (std::size_t k = 0; k < n; ++k) {
    Sample s;
    s.id = "sq" + std::to_string(k);
    s.subject = s.id;
    s.source = "toy";
    s.feature = FeatureImage(16, 16);
    s.label = LabelMap(16, 16);
    if (k % 2 == 0) {
      const int r = pos(gen), c = pos(gen), a = side(gen);
      for (int i = r; i < r + a; ++i)
        for (int j = c; j < c + a; ++j) s.label(i, j) = 1;
    }
    for (std::size_t i = 0; i < 256; ++i) s.feature[i] = (s.label[i] ? 0.9 : 0.1) + noise(gen);
    s.complete_label = s.label;
    s.presence = PresenceArray::all(2, true);
    s.geometry = identity_geometry(16, 16);
    out.push_back(std::move(s));
  }
  return out;
}

TrainConfig toy_config(const std::string& loss, std::size_t steps) {
  TrainConfig cfg;
  cfg.net.levels = 1;
  cfg.net.base_channels = 4;
  cfg.net.out_channels = 2;
  cfg.net.seed = 5;
  cfg.net.input_mean = 0.3;
  cfg.net.input_std = 0.35;
  cfg.sampler.batch_size = 4;
  cfg.sampler.seed = 6;
  cfg.loss = parse_loss_preset(loss);
  cfg.max_steps = steps;
  cfg.plateau_window = 50;
  cfg.learning_rate = 1e-2;
  cfg.fallback_learning_rate = 1e-3;
  return cfg;
}

double window_mean(const std::vector<LogRow>& log, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += log[i].loss;
  return s / static_cast<double>(end - begin);
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("pmseg_train_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

}  // namespace

TEST(Train, SmokeRunLearnsBrightSquares) {
  const auto samples = bright_squares(40, 1);
  const TrainConfig cfg = toy_config("xent_or", 500);
  const std::vector<std::set<std::string>> sources{{"toy"}, {"toy"}};
  const TrainResult r = train(samples, cfg, initial_state(cfg), {&samples, sources});
  ASSERT_TRUE(r.failure.empty()) << r.failure;
  ASSERT_GE(r.log.size(), 100u);
  EXPECT_LT(window_mean(r.log, 50, 100), window_mean(r.log, 0, 50));
  EXPECT_LT(window_mean(r.log, r.log.size() - 50, r.log.size()), window_mean(r.log, 0, 50));
  ASSERT_EQ(r.log.back().dice.size(), 2u);
  EXPECT_GT(r.log.back().dice[1], 0.8);
}

TEST(Train, FixedSeedGivesIdenticalLog) {
  const auto samples = bright_squares(20, 2);
  const TrainConfig cfg = toy_config("xent_plus+0.1*dice_soft", 30);
  const TrainResult a = train(samples, cfg, initial_state(cfg));
  const TrainResult b = train(samples, cfg, initial_state(cfg));
  EXPECT_EQ(log_to_csv(a.log, {"background", "square"}), log_to_csv(b.log, {"background", "square"}));
  EXPECT_EQ(a.state.params, b.state.params);
}

TEST(Train, BaseMaskWithEverythingTrustedEqualsUnmasked) {
  const auto samples = bright_squares(20, 3);
  const TrainResult masked = train(samples, toy_config("xent_base", 25), initial_state(toy_config("xent_base", 25)));
  const TrainResult plain = train(samples, toy_config("xent", 25), initial_state(toy_config("xent", 25)));
  EXPECT_EQ(masked.state.params, plain.state.params);
}

TEST(Train, PlateauDropsLearningRateThenStops) {
  // One sample, a negligible learning rate: the loss never improves.
  const auto samples = bright_squares(1, 4);
  TrainConfig cfg = toy_config("xent_or", 1000);
  cfg.sampler.exclude_empty = true;
  cfg.plateau_window = 5;
  cfg.learning_rate = 1e-12;
  cfg.fallback_learning_rate = 1e-13;
  const TrainResult r = train(samples, cfg, initial_state(cfg));
  EXPECT_EQ(r.state.reason, StopReason::Converged);
  EXPECT_EQ(r.state.step, 20u);
  EXPECT_EQ(r.log[9].lr, 1e-12);
  EXPECT_EQ(r.log[10].lr, 1e-13);
  EXPECT_EQ(r.state.phase, 1);
}

TEST(Train, NonFiniteInputHaltsWithLastGoodParams) {
  auto samples = bright_squares(4, 5);
  samples[0].feature[7] = std::nan("");
  const TrainConfig cfg = toy_config("xent_or", 10);
  const TrainState start = initial_state(cfg);
  const TrainResult r = train(samples, cfg, start);
  EXPECT_EQ(r.state.reason, StopReason::Diverged);
  EXPECT_FALSE(r.failure.empty());
  EXPECT_TRUE(std::all_of(r.state.params.tensors.begin(), r.state.params.tensors.end(),
                          [](const Tensor& t) { return t.all_finite(); }));
}

TEST(Train, ClassCountMismatchRejected) {
  auto samples = bright_squares(4, 6);
  TrainConfig cfg = toy_config("xent_or", 2);
  cfg.net.out_channels = 3;
  EXPECT_THROW(train(samples, cfg, initial_state(cfg)), ConfigError);
}

TEST(Train, LogCsvLayout) {
  std::vector<LogRow> log{{1, 0.5, 1e-3, {}, 0}, {2, 0.25, 1e-3, {0.9, 0.75}, 12}};
  EXPECT_EQ(log_to_csv(log, {"background", "square"}),
            "step,loss,lr,background_fp,dice_background,dice_square\n"
            "1,0.5,0.001,,,\n"
            "2,0.25,0.001,12,0.90000000000000002,0.75\n");
}

TEST_F(TempDir, CheckpointRoundTrip) {
  const auto samples = bright_squares(10, 7);
  const TrainConfig cfg = toy_config("xent_or", 5);
  const Checkpoint ck{cfg.net, {"background", "square"}, "", "xent_or", train(samples, cfg, initial_state(cfg)).state};
  save_checkpoint(ck, dir_);
  EXPECT_EQ(load_checkpoint(dir_), ck);
}

TEST_F(TempDir, CorruptCheckpointRejected) {
  const TrainConfig cfg = toy_config("xent_or", 5);
  save_checkpoint({cfg.net, {"background", "square"}, "", "xent_or", initial_state(cfg)}, dir_);
  fs::path victim;
  for (const auto& e : fs::directory_iterator(dir_ / "params")) victim = e.path();
  std::ofstream(victim, std::ios::app) << "junk";
  EXPECT_THROW(load_checkpoint(dir_), ConfigError);
}

TEST_F(TempDir, ResumeFromCheckpointIsBitExact) {
  const auto samples = bright_squares(20, 8);
  TrainConfig cfg = toy_config("xent_plus", 24);
  cfg.plateau_window = 4;
  const TrainResult straight = train(samples, cfg, initial_state(cfg));

  TrainConfig half = cfg;
  half.max_steps = 10;
  const TrainResult first = train(samples, half, initial_state(cfg));
  save_checkpoint({cfg.net, {"background", "square"}, "", "xent_plus", first.state}, dir_);
  const TrainResult second = train(samples, cfg, load_checkpoint(dir_).state);

  EXPECT_EQ(second.state.params, straight.state.params);
  EXPECT_EQ(second.state.adam, straight.state.adam);
  EXPECT_EQ(second.state.losses, straight.state.losses);
  EXPECT_EQ(second.state.phase, straight.state.phase);
}

TEST(Evaluate, PerfectOracleScoresOne) {
  auto samples = bright_squares(6, 9);
  std::vector<Tensor> probs;
  for (const auto& s : samples) probs.push_back(one_hot(s.complete_label, 2));
  const PooledDice d = score_predictions(samples, probs, {{"toy"}, {"toy"}});
  EXPECT_EQ(d.dice(0), 1.0);
  EXPECT_EQ(d.dice(1), 1.0);
  EXPECT_EQ(d.background_false_positives, 0u);
  EXPECT_EQ(d.images[1], 6u);
}

TEST(Evaluate, ClassesScoredOnlyOnAnnotatingSources) {
  auto samples = bright_squares(4, 10);
  samples[2].source = "other";
  std::vector<Tensor> probs;
  for (const auto& s : samples) probs.push_back(one_hot(LabelMap(16, 16), 2));  // predicts nothing
  const PooledDice d = score_predictions(samples, probs, {{"toy", "other"}, {"toy"}});
  EXPECT_EQ(d.images[0], 4u);
  EXPECT_EQ(d.images[1], 3u);
  EXPECT_EQ(d.dice(1), 0.0);
}

TEST(Evaluate, AnnotatingSourcesFollowPresence) {
  DatasetManifest m;
  m.class_names = {"background", "liver", "spleen"};
  m.sources = {{"liver", {{1, 1}}, {}, false}, {"both", {{1, 1}, {2, 2}}, {2}, true}};
  const auto a = annotating_sources(m);
  EXPECT_EQ(a[0], (std::set<std::string>{"both"}));
  EXPECT_EQ(a[1], (std::set<std::string>{"liver", "both"}));
  EXPECT_TRUE(a[2].empty());
}
