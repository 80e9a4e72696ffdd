#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "pmseg/error.hpp"
#include "pmseg/labels.hpp"
#include "pmseg/presence.hpp"

using namespace pmseg;
using fixture::labels;
using fixture::prediction;
using fixture::presence;

namespace {

std::vector<double> weights(const PresenceMask& w) { return {w.values().begin(), w.values().end()}; }

}  // namespace

TEST(RemapLabels, SingleOrganSourceTrustsOnlyItsClass) {
  const ClassMapping liver{"liver", {{1, 1}}, {}, false};
  const auto [y, k] = remap_labels(labels(1, 2, {0, 1}), liver, 3);
  EXPECT_EQ(k, presence({false, true, false}));
  EXPECT_EQ(y, labels(1, 2, {0, 1}));
}

TEST(RemapLabels, LocalIndicesMoveToGlobalSlots) {
  const ClassMapping spleen{"spleen", {{1, 2}}, {}, false};
  const auto [y, k] = remap_labels(labels(1, 3, {1, 0, 1}), spleen, 3);
  EXPECT_EQ(y, labels(1, 3, {2, 0, 2}));
  EXPECT_EQ(k, presence({false, false, true}));
}

TEST(RemapLabels, CompleteSourceTrustsEverything) {
  const ClassMapping full{"full", {{1, 1}, {2, 2}}, {}, true};
  const auto [y, k] = remap_labels(labels(1, 3, {0, 1, 2}), full, 3);
  EXPECT_EQ(k, PresenceArray::all(3, true));
}

TEST(RemapLabels, InvalidatedClassStaysInLabelsButNotTrusted) {
  const ClassMapping imaf{"imaf", {{1, 1}, {2, 4}}, {4}, false};
  const auto [y, k] = remap_labels(labels(1, 3, {2, 1, 0}), imaf, 5);
  EXPECT_EQ(y[0], 4);
  EXPECT_FALSE(k[4]);
  EXPECT_TRUE(k[1]);
}

TEST(RemapLabels, UnmappedLabelRejected) {
  const ClassMapping liver{"liver", {{1, 1}}, {}, false};
  EXPECT_THROW(remap_labels(labels(1, 2, {0, 2}), liver, 3), ConfigError);
}

TEST(ClassMapping, ValidationRejectsBadMappings) {
  EXPECT_THROW((ClassMapping{"a", {{1, 0}}, {}, false}.validate(3)), ConfigError);
  EXPECT_THROW((ClassMapping{"a", {{1, 3}}, {}, false}.validate(3)), ConfigError);
  EXPECT_THROW((ClassMapping{"a", {{1, 1}, {2, 1}}, {}, false}.validate(3)), ConfigError);
  EXPECT_THROW((ClassMapping{"a", {{1, 1}}, {0}, false}.validate(3)), ConfigError);
  EXPECT_NO_THROW((ClassMapping{"a", {{1, 2}, {2, 1}}, {}, false}.validate(3)));
}

TEST(MaskBase, Examples) {
  const LabelMap y = labels(1, 4, {0, 1, 2, 1});
  EXPECT_EQ(weights(build_mask_base(y, presence({false, true, false}))), (std::vector<double>{0, 1, 0, 1}));
  EXPECT_EQ(weights(build_mask_base(y, PresenceArray::all(3, true))), (std::vector<double>(4, 1.0)));
  EXPECT_EQ(weights(build_mask_base(y, presence({false, false, false}))), (std::vector<double>(4, 0.0)));
}

TEST(MaskOr, Examples) {
  const LabelMap y = labels(1, 4, {0, 1, 2, 1});
  const auto k = presence({false, true, false});
  EXPECT_EQ(weights(build_mask_or(y, prediction(1, 4, {1, 1, 0, 2}), k)), (std::vector<double>{1, 1, 0, 1}));
  EXPECT_EQ(build_mask_or(y, retag<PredictionMap>(y), k), build_mask_base(y, k));
  EXPECT_EQ(weights(build_mask_or(y, prediction(1, 4, {2, 0, 1, 2}), PresenceArray::all(3, true))),
            (std::vector<double>(4, 1.0)));
}

TEST(MaskPlus, Examples) {
  const LabelMap y = labels(1, 4, {0, 1, 2, 1});
  EXPECT_EQ(weights(build_mask_plus(y, prediction(1, 4, {1, 1, 0, 2}), presence({false, true, false}))),
            (std::vector<double>{1, 2, 0, 1}));
  EXPECT_EQ(weights(build_mask_plus(y, retag<PredictionMap>(y), PresenceArray::all(3, true))),
            (std::vector<double>(4, 2.0)));
}

TEST(Masks, ShapeMismatchAndMissingPredictionRejected) {
  const auto k = PresenceArray::all(3, true);
  EXPECT_THROW(build_mask_or(LabelMap(2, 2), PredictionMap(2, 3), k), std::invalid_argument);
  EXPECT_THROW(build_mask_plus(LabelMap(2, 2), PredictionMap(3, 2), k), std::invalid_argument);
  EXPECT_THROW(build_mask(MaskMode::Or, LabelMap(2, 2), nullptr, k), std::invalid_argument);
  EXPECT_THROW(build_mask_base(labels(1, 1, {3}), k), std::invalid_argument);
}

TEST(Masks, NoneIsAllOnes) {
  const PresenceMask w = build_mask(MaskMode::None, LabelMap(2, 3), nullptr, presence({false, true}));
  EXPECT_EQ(weights(w), (std::vector<double>(6, 1.0)));
}

TEST(Masks, ModeNamesRoundTrip) {
  for (MaskMode m : {MaskMode::None, MaskMode::Base, MaskMode::Or, MaskMode::Plus})
    EXPECT_EQ(parse_mask_mode(to_string(m)), m);
  EXPECT_FALSE(parse_mask_mode("either").has_value());
}

TEST(Masks, ModesAreOrderedElementwise) {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = fixture::random_instance(gen, 5, 5, 4);
    const PredictionMap yhat = predict_labels(inst.p);
    const auto base = build_mask_base(inst.y, inst.k);
    const auto either = build_mask_or(inst.y, yhat, inst.k);
    const auto plus = build_mask_plus(inst.y, yhat, inst.k);
    for (std::size_t i = 0; i < 25; ++i) {
      EXPECT_LE(base[i], either[i]);
      EXPECT_LE(either[i], plus[i]);
    }
  }
}

TEST(Masks, TrustedTruePositivesWeighTwoUnderPlus) {
  std::mt19937_64 gen(22);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = fixture::random_instance(gen, 5, 5, 3);
    const PredictionMap yhat = predict_labels(inst.p);
    const auto plus = build_mask_plus(inst.y, yhat, inst.k);
    for (std::size_t i = 0; i < 25; ++i)
      if (inst.y[i] == yhat[i] && inst.k[inst.y[i]]) EXPECT_EQ(plus[i], 2.0);
  }
}

TEST(Masks, MatchOracle) {
  std::mt19937_64 gen(23);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = fixture::random_instance(gen, 5, 5, 3);
    const PredictionMap yhat = predict_labels(inst.p);
    const auto y = fixture::to_oracle(inst.y);
    const auto yh = fixture::to_oracle(yhat);
    EXPECT_EQ(fixture::to_oracle(build_mask_base(inst.y, inst.k)), oracle::mask_base(y, inst.k.flags()));
    EXPECT_EQ(fixture::to_oracle(build_mask_or(inst.y, yhat, inst.k)), oracle::mask_or(y, yh, inst.k.flags()));
    EXPECT_EQ(fixture::to_oracle(build_mask_plus(inst.y, yhat, inst.k)), oracle::mask_plus(y, yh, inst.k.flags()));
  }
}
