#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "fixtures.hpp"
#include "pmseg/error.hpp"
#include "pmseg/labels.hpp"
#include "pmseg/losses.hpp"

using namespace pmseg;

namespace {

constexpr double kEps = 1e-7;

using LossFn = std::function<NodeId(Tape&, NodeId)>;

double value(const Tensor& p, const LossFn& fn) {
  Tape t;
  return t.value(fn(t, t.constant(p))).item();
}

// Three channels over two pixels. Class 1 has y=[1,0], p=[0.6,0.4] (soft
// dice 0.6); the other channels absorb the remaining mass.
Tensor two_pixel_map() { return Tensor({3, 1, 2}, std::vector<double>{0.4, 0.6, 0.6, 0.4, 0.0, 0.0}); }
LabelMap two_pixel_labels() { return fixture::labels(1, 2, {1, 0}); }

}  // namespace

TEST(SoftDice, HandExample) {
  const Tensor y({2, 1, 4}, std::vector<double>{0, 1, 1, 0, 1, 0, 0, 1});
  const Tensor p({2, 1, 4}, std::vector<double>{0.2, 0.8, 1.0, 0.0, 0.8, 0.2, 0.0, 1.0});
  EXPECT_NEAR(value(p, [&](Tape& t, NodeId q) { return softdice_per_class(t, y, q, 1, kEps); }), 0.9, 1e-7);
}

TEST(SoftDice, PerfectAndEmpty) {
  const Tensor y = one_hot(fixture::labels(1, 3, {0, 1, 0}), 3);
  EXPECT_NEAR(value(y, [&](Tape& t, NodeId q) { return softdice_per_class(t, y, q, 1, kEps); }), 1.0, 1e-12);
  // Class 2 is absent from both y and p.
  EXPECT_EQ(value(y, [&](Tape& t, NodeId q) { return softdice_per_class(t, y, q, 2, kEps); }), 1.0);
}

TEST(MaskedSoftDice, OnlyTrustedClassCounts) {
  const Tensor y = one_hot(two_pixel_labels(), 3);
  const auto k = fixture::presence({false, true, false});
  EXPECT_NEAR(value(two_pixel_map(), [&](Tape& t, NodeId q) { return masked_softdice_loss(t, y, q, k, kEps); }),
              0.4, 1e-7);
  EXPECT_NEAR(value(two_pixel_map(), [&](Tape& t, NodeId q) { return masked_logdice_loss(t, y, q, k, kEps); }),
              -std::log(0.6), 1e-7);
}

TEST(MaskedSoftDice, AllFalsePresenceRejected) {
  const Tensor y = one_hot(two_pixel_labels(), 3);
  const auto k = PresenceArray::all(3, false);
  EXPECT_THROW(value(two_pixel_map(), [&](Tape& t, NodeId q) { return masked_softdice_loss(t, y, q, k, kEps); }),
               std::invalid_argument);
  EXPECT_THROW(value(two_pixel_map(), [&](Tape& t, NodeId q) { return masked_logdice_loss(t, y, q, k, kEps); }),
               std::invalid_argument);
}

TEST(MaskedCrossentropy, HandExample) {
  const Tensor y = one_hot(fixture::labels(1, 2, {1, 1}), 2);
  const Tensor p({2, 1, 2}, std::vector<double>{0.5, 0.1, 0.5, 0.9});
  const PresenceMask w(1, 2, std::vector<double>{1.0, 0.0});
  EXPECT_NEAR(value(p, [&](Tape& t, NodeId q) { return masked_crossentropy(t, y, q, w); }), std::log(2.0), 1e-15);
}

TEST(MaskedCrossentropy, NegativeWeightsRejected) {
  const Tensor y = one_hot(fixture::labels(1, 2, {1, 1}), 2);
  const PresenceMask w(1, 2, std::vector<double>{1.0, -1.0});
  EXPECT_THROW(value(y, [&](Tape& t, NodeId q) { return masked_crossentropy(t, y, q, w); }), std::invalid_argument);
  EXPECT_THROW(value(y, [&](Tape& t, NodeId q) { return masked_mae(t, y, q, w); }), std::invalid_argument);
}

TEST(MaskedCrossentropy, EmptyMaskGivesZero) {
  const Tensor y = one_hot(fixture::labels(1, 2, {1, 0}), 2);
  const PresenceMask w(1, 2, std::vector<double>{0.0, 0.0});
  EXPECT_EQ(value(Tensor({2, 1, 2}, 0.5), [&](Tape& t, NodeId q) { return masked_crossentropy(t, y, q, w); }), 0.0);
}

TEST(Crossentropy, FloorKeepsZeroProbabilityFinite) {
  const Tensor y = one_hot(fixture::labels(1, 1, {1}), 2);
  const Tensor p({2, 1, 1}, std::vector<double>{1.0, 0.0});
  EXPECT_NEAR(value(p, [&](Tape& t, NodeId q) { return crossentropy(t, y, q); }), -std::log(kProbabilityFloor),
              1e-9);
}

TEST(CombinedLoss, LinearCombination) {
  Tape t;
  const WeightedLoss parts[] = {{1.0, t.constant(Tensor::scalar(0.7))}, {0.1, t.constant(Tensor::scalar(0.3))}};
  EXPECT_NEAR(t.value(combined_loss(t, parts)).item(), 0.73, 1e-15);
  EXPECT_THROW(combined_loss(t, std::span<const WeightedLoss>{}), std::invalid_argument);
}

TEST(Tversky, HalfWeightsEqualSoftDice) {
  std::mt19937_64 gen(31);
  const auto inst = fixture::random_instance(gen, 4, 4, 3);
  const Tensor y = one_hot(inst.y, 3);
  // The smoothing terms differ (eps vs eps/2 after scaling), so compare without them.
  for (std::size_t c = 0; c < 3; ++c)
    EXPECT_NEAR(value(inst.p, [&](Tape& t, NodeId q) { return tversky_index(t, y, q, c, 0.5, 0.5, 0.0); }),
                value(inst.p, [&](Tape& t, NodeId q) { return softdice_per_class(t, y, q, c, 0.0); }), 1e-14);
}

TEST(Tversky, HandExampleAndPerfect) {
  const Tensor y({2, 1, 2}, std::vector<double>{0, 1, 1, 0});
  const Tensor p({2, 1, 2}, std::vector<double>{0.5, 0.5, 0.5, 0.5});
  EXPECT_NEAR(value(p, [&](Tape& t, NodeId q) { return tversky_index(t, y, q, 1, 0.7, 0.3, kEps); }), 0.5, 1e-7);
  EXPECT_NEAR(value(y, [&](Tape& t, NodeId q) { return tversky_index(t, y, q, 1, 0.7, 0.3, kEps); }), 1.0, 1e-15);
}

TEST(FocalTversky, HandExampleGammaTwo) {
  // Class 1: y=[1,0], p=[0.5,0.5] gives TI 0.5.
  const Tensor y = one_hot(two_pixel_labels(), 3);
  const Tensor p({3, 1, 2}, std::vector<double>{0.5, 0.5, 0.5, 0.5, 0.0, 0.0});
  const auto k = fixture::presence({false, true, false});
  EXPECT_NEAR(value(p, [&](Tape& t, NodeId q) { return masked_focal_tversky(t, y, q, k, 0.7, 0.3, 2.0, kEps); }),
              std::sqrt(0.5), 1e-7);
}

TEST(FocalTversky, GammaOneIsMaskedMeanOfMisses) {
  std::mt19937_64 gen(32);
  const auto inst = fixture::random_instance(gen, 4, 4, 3);
  const Tensor y = one_hot(inst.y, 3);
  const auto all = PresenceArray::all(3, true);
  double mean = 0.0;
  for (std::size_t c = 0; c < 3; ++c)
    mean += 1.0 - value(inst.p, [&](Tape& t, NodeId q) { return tversky_index(t, y, q, c, 0.7, 0.3, kEps); });
  EXPECT_NEAR(value(inst.p, [&](Tape& t, NodeId q) { return masked_focal_tversky(t, y, q, all, 0.7, 0.3, 1.0, kEps); }),
              mean / 3.0, 1e-14);
}

TEST(MaskedMae, OnePixel) {
  const Tensor y = one_hot(fixture::labels(1, 1, {1}), 2);
  const Tensor p({2, 1, 1}, std::vector<double>{0.25, 0.75});
  const PresenceMask w(1, 1, std::vector<double>{1.0});
  EXPECT_NEAR(value(p, [&](Tape& t, NodeId q) { return masked_mae(t, y, q, w); }), 0.5, 1e-15);
}

TEST(Losses, PerfectPredictionGivesZero) {
  const LabelMap labels = fixture::labels(2, 2, {0, 1, 2, 1});
  const Tensor y = one_hot(labels, 3);
  std::mt19937_64 gen(33);
  for (int trial = 0; trial < 20; ++trial) {
    const auto k = fixture::random_instance(gen, 1, 1, 3).k;
    const PresenceMask w(2, 2, std::vector<double>{0.0, 1.0, 2.0, 1.0});
    EXPECT_NEAR(value(y, [&](Tape& t, NodeId q) { return masked_softdice_loss(t, y, q, k, kEps); }), 0.0, 1e-12);
    EXPECT_NEAR(value(y, [&](Tape& t, NodeId q) { return masked_logdice_loss(t, y, q, k, kEps); }), 0.0, 1e-12);
    EXPECT_NEAR(value(y, [&](Tape& t, NodeId q) { return masked_focal_tversky(t, y, q, k, 0.7, 0.3, 4.0 / 3, kEps); }),
                0.0, 1e-12);
    EXPECT_EQ(value(y, [&](Tape& t, NodeId q) { return masked_crossentropy(t, y, q, w); }), 0.0);
    EXPECT_EQ(value(y, [&](Tape& t, NodeId q) { return masked_mae(t, y, q, w); }), 0.0);
  }
}

TEST(Losses, NonNegativeOnRandomInstances) {
  std::mt19937_64 gen(34);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = fixture::random_instance(gen, 5, 5, 3);
    const Tensor y = one_hot(inst.y, 3);
    const PresenceMask w = build_mask_plus(inst.y, predict_labels(inst.p), inst.k);
    EXPECT_GE(value(inst.p, [&](Tape& t, NodeId q) { return masked_softdice_loss(t, y, q, inst.k, kEps); }), 0.0);
    EXPECT_GE(value(inst.p, [&](Tape& t, NodeId q) { return masked_logdice_loss(t, y, q, inst.k, kEps); }), 0.0);
    EXPECT_GE(value(inst.p, [&](Tape& t, NodeId q) { return masked_focal_tversky(t, y, q, inst.k, 0.7, 0.3, 4.0 / 3, kEps); }),
              0.0);
    EXPECT_GE(value(inst.p, [&](Tape& t, NodeId q) { return masked_crossentropy(t, y, q, w); }), 0.0);
    EXPECT_GE(value(inst.p, [&](Tape& t, NodeId q) { return masked_mae(t, y, q, w); }), 0.0);
  }
}

TEST(Losses, ReductionIdentityWithEverythingTrusted) {
  std::mt19937_64 gen(35);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = fixture::random_instance(gen, 5, 5, 3);
    const Tensor y = one_hot(inst.y, 3);
    const auto all = PresenceArray::all(3, true);
    const auto ones = build_mask_base(inst.y, all);
    EXPECT_NEAR(value(inst.p, [&](Tape& t, NodeId q) { return masked_softdice_loss(t, y, q, all, kEps); }),
                value(inst.p, [&](Tape& t, NodeId q) { return softdice_loss(t, y, q, kEps); }) / 3.0, 1e-12);
    EXPECT_NEAR(value(inst.p, [&](Tape& t, NodeId q) { return masked_logdice_loss(t, y, q, all, kEps); }),
                value(inst.p, [&](Tape& t, NodeId q) { return logdice_loss(t, y, q, kEps); }) / 3.0, 1e-12);
    EXPECT_NEAR(value(inst.p, [&](Tape& t, NodeId q) { return masked_crossentropy(t, y, q, ones); }),
                value(inst.p, [&](Tape& t, NodeId q) { return crossentropy(t, y, q); }), 1e-12);
  }
}

TEST(Losses, FalsePositiveOnUntrustedBackground) {
  // Pixel 1 is unannotated tissue recorded as background; the network
  // confidently calls it class 1, which is trusted.
  const LabelMap y = fixture::labels(1, 2, {1, 0});
  const auto k = fixture::presence({false, true, false});
  const Tensor p({3, 1, 2}, std::vector<double>{0.05, 0.01, 0.9, 0.98, 0.05, 0.01});
  const PredictionMap yhat = predict_labels(p);
  const Tensor yo = one_hot(y, 3);
  auto raw = [&](const PresenceMask& w) {
    return value(p, [&](Tape& t, NodeId q) { return masked_crossentropy(t, yo, q, w, PixelNormalization::None); });
  };
  const double base = raw(build_mask_base(y, k));
  EXPECT_NEAR(base, -std::log(0.9), 1e-15);  // the true positive only
  // The background pixel contributes nothing under mode_base.
  const LabelMap fp_only = fixture::labels(1, 1, {0});
  const Tensor p1({3, 1, 1}, std::vector<double>{0.01, 0.98, 0.01});
  const Tensor y1 = one_hot(fp_only, 3);
  const PredictionMap yh1 = predict_labels(p1);
  auto raw1 = [&](const PresenceMask& w) {
    return value(p1, [&](Tape& t, NodeId q) { return masked_crossentropy(t, y1, q, w, PixelNormalization::None); });
  };
  EXPECT_EQ(raw1(build_mask_base(fp_only, k)), 0.0);
  EXPECT_GT(raw1(build_mask_or(fp_only, yh1, k)), 0.0);
  EXPECT_GT(raw1(build_mask_plus(fp_only, yh1, k)), 0.0);
  EXPECT_GT(raw(build_mask_or(y, yhat, k)), base);
}

TEST(Losses, PlusSumDominatesOrSum) {
  std::mt19937_64 gen(36);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = fixture::random_instance(gen, 5, 5, 3);
    const Tensor y = one_hot(inst.y, 3);
    const PredictionMap yhat = predict_labels(inst.p);
    auto raw = [&](const PresenceMask& w) {
      return value(inst.p, [&](Tape& t, NodeId q) { return masked_crossentropy(t, y, q, w, PixelNormalization::None); });
    };
    EXPECT_GE(raw(build_mask_plus(inst.y, yhat, inst.k)), raw(build_mask_or(inst.y, yhat, inst.k)));
  }
}

TEST(Losses, MatchOracle) {
  std::mt19937_64 gen(37);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = fixture::random_instance(gen, 5, 5, 3);
    const Tensor y = one_hot(inst.y, 3);
    const auto oy = fixture::to_oracle(inst.y);
    const auto op = fixture::to_oracle(inst.p);
    const auto& k = inst.k.flags();
    const PresenceMask w = build_mask_plus(inst.y, predict_labels(inst.p), inst.k);
    const auto ow = fixture::to_oracle(w);
    EXPECT_NEAR(value(inst.p, [&](Tape& t, NodeId q) { return softdice_loss(t, y, q, kEps); }),
                oracle::softdice_loss(oy, op, kEps), 1e-12);
    EXPECT_NEAR(value(inst.p, [&](Tape& t, NodeId q) { return logdice_loss(t, y, q, kEps); }),
                oracle::logdice_loss(oy, op, kEps), 1e-12);
    EXPECT_NEAR(value(inst.p, [&](Tape& t, NodeId q) { return masked_softdice_loss(t, y, q, inst.k, kEps); }),
                oracle::masked_softdice(oy, op, k, kEps), 1e-12);
    EXPECT_NEAR(value(inst.p, [&](Tape& t, NodeId q) { return masked_logdice_loss(t, y, q, inst.k, kEps); }),
                oracle::masked_logdice(oy, op, k, kEps), 1e-12);
    EXPECT_NEAR(value(inst.p, [&](Tape& t, NodeId q) { return crossentropy(t, y, q); }),
                oracle::crossentropy(oy, op), 1e-12);
    for (bool normalize : {true, false}) {
      const auto norm = normalize ? PixelNormalization::MaskSum : PixelNormalization::None;
      EXPECT_NEAR(value(inst.p, [&](Tape& t, NodeId q) { return masked_crossentropy(t, y, q, w, norm); }),
                  oracle::masked_crossentropy(oy, op, ow, normalize), 1e-12);
      EXPECT_NEAR(value(inst.p, [&](Tape& t, NodeId q) { return masked_mae(t, y, q, w, norm); }),
                  oracle::masked_mae(oy, op, ow, normalize), 1e-12);
    }
    EXPECT_NEAR(value(inst.p, [&](Tape& t, NodeId q) { return masked_focal_tversky(t, y, q, inst.k, 0.7, 0.3, 4.0 / 3, kEps); }),
                oracle::masked_ftl(oy, op, k, 0.7, 0.3, 4.0 / 3, kEps), 1e-12);
  }
}

TEST(LossPresets, ParseNames) {
  const LossConfig a = parse_loss_preset("xent_plus + 0.1*dice_soft");
  ASSERT_EQ(a.terms.size(), 2u);
  EXPECT_EQ(a.terms[0], (LossTerm{LossKind::Xent, MaskMode::Plus, 1.0}));
  EXPECT_EQ(a.terms[1], (LossTerm{LossKind::DiceSoft, MaskMode::None, 0.1}));
  EXPECT_TRUE(a.needs_prediction());
  EXPECT_FALSE(parse_loss_preset("xent_base+dice_log").needs_prediction());
  EXPECT_EQ(parse_loss_preset("mae_or").terms[0].kind, LossKind::Mae);
  EXPECT_EQ(parse_loss_preset("ftl").terms[0].kind, LossKind::Ftl);
}

TEST(LossPresets, RejectBadNames) {
  for (const char* bad : {"", "xent_either", "dice", "xent_or+", "x*xent_or", "0*xent_or", "xent_none"})
    EXPECT_THROW(parse_loss_preset(bad), ConfigError) << bad;
}

TEST(SampleLoss, OrMaskComesFromCurrentPrediction) {
  // Same labels, two different predictions: the or-mask, and thus the
  // loss, must track whichever p is on the tape.
  const LabelMap y = fixture::labels(1, 2, {1, 0});
  const auto k = fixture::presence({false, true, false});
  const LossConfig cfg = parse_loss_preset("xent_or");
  const Tensor fp({3, 1, 2}, std::vector<double>{0.1, 0.1, 0.8, 0.8, 0.1, 0.1});
  const Tensor quiet({3, 1, 2}, std::vector<double>{0.1, 0.8, 0.8, 0.1, 0.1, 0.1});
  const double with_fp = value(fp, [&](Tape& t, NodeId q) { return sample_loss(t, cfg, q, y, k); });
  const double without = value(quiet, [&](Tape& t, NodeId q) { return sample_loss(t, cfg, q, y, k); });
  EXPECT_NEAR(with_fp, (-std::log(0.8) - std::log(0.1)) / 2.0, 1e-15);
  EXPECT_NEAR(without, -std::log(0.8), 1e-15);
}
