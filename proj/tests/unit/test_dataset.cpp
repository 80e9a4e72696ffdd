#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "fixtures.hpp"
#include "pmseg/dataset.hpp"
#include "pmseg/error.hpp"

using namespace pmseg;

namespace {

Sample make_sample(std::string id, std::string subject, std::string source, std::vector<std::uint8_t> y) {
  Sample s;
  s.id = std::move(id);
  s.subject = std::move(subject);
  s.source = std::move(source);
  const std::size_t n = y.size();
  s.feature = FeatureImage(1, n, std::vector<double>(n, 0.5));
  for (std::size_t i = 0; i < n; ++i) s.feature[i] += 0.1 * y[i];
  s.label = LabelMap(1, n, std::move(y));
  s.presence = PresenceArray::all(3, true);
  s.geometry = identity_geometry(1, s.label.width());
  return s;
}

std::vector<Sample> subjects(const std::vector<std::pair<std::string, std::size_t>>& sizes,
                             const std::string& source = "src") {
  std::vector<Sample> out;
  for (const auto& [subject, n] : sizes)
    for (std::size_t i = 0; i < n; ++i)
      out.push_back(make_sample(subject + "-" + std::to_string(i), subject, source, {0, 1}));
  return out;
}

std::set<std::string> subject_set(const std::vector<Sample>& v) {
  std::set<std::string> s;
  for (const auto& x : v) s.insert(x.subject);
  return s;
}

std::set<std::string> id_set(const std::vector<Sample>& v) {
  std::set<std::string> s;
  for (const auto& x : v) s.insert(x.id);
  return s;
}

}  // namespace

TEST(MakePartial, DropsUnkeptClass) {
  const auto out = make_partial({make_sample("a", "s", "src", {1, 2, 0, 2})}, {{1}, false, {}});
  EXPECT_EQ(out[0].label, fixture::labels(1, 4, {1, 0, 0, 0}));
  EXPECT_EQ(out[0].presence, fixture::presence({false, true, false}));
  EXPECT_EQ(out[0].complete_label, fixture::labels(1, 4, {1, 2, 0, 2}));
}

TEST(MakePartial, KeepAllTrustBackgroundIsIdentity) {
  const Sample s = make_sample("a", "s", "src", {1, 2, 0, 2});
  const auto out = make_partial({s}, {{1, 2}, true, {}});
  EXPECT_EQ(out[0].label, s.label);
  EXPECT_EQ(out[0].presence, PresenceArray::all(3, true));
}

TEST(MakePartial, InvalidatedBandIsUntrusted) {
  Sample s = make_sample("a", "s", "src", {0, 1, 0, 0, 0, 0, 1, 0});
  s.feature = FeatureImage(4, 2, std::vector<double>(8, 0.3));
  s.label = LabelMap(4, 2, std::vector<std::uint8_t>{0, 1, 0, 0, 0, 0, 1, 0});
  s.presence = PresenceArray::all(5, true);
  s.geometry = identity_geometry(4, 2);
  const auto out = make_partial({s}, {{1}, false, PartialSpec::Band{4, 1, 3}});
  EXPECT_EQ(out[0].label, LabelMap(4, 2, std::vector<std::uint8_t>{0, 1, 4, 4, 4, 4, 1, 0}));
  EXPECT_FALSE(out[0].presence[4]);
  EXPECT_TRUE(out[0].presence[1]);
}

TEST(MakePartial, FeaturesNeverChange) {
  const Sample s = make_sample("a", "s", "src", {1, 2, 2, 0, 1});
  for (const PartialSpec& spec : {PartialSpec{{1}, false, {}}, PartialSpec{{2}, true, {}}})
    EXPECT_EQ(make_partial({s}, spec)[0].feature, s.feature);
}

TEST(MakePartial, EmptyKeepRejected) {
  EXPECT_THROW(make_partial({make_sample("a", "s", "src", {1})}, {}), ConfigError);
}

TEST(Merge, TwoSingleOrganSources) {
  SourceDataset liver{{"liver", {{1, 1}}, {}, false}, {{1, "liver"}}, {make_sample("l", "s1", "", {0, 1})}};
  SourceDataset spleen{{"spleen", {{1, 2}}, {}, false}, {{1, "spleen"}}, {make_sample("p", "s2", "", {1, 0})}};
  const auto merged = merge_datasets({liver, spleen}, {"background", "liver", "spleen"});
  ASSERT_EQ(merged.samples.size(), 2u);
  EXPECT_EQ(merged.samples[0].presence, fixture::presence({false, true, false}));
  EXPECT_EQ(merged.samples[1].presence, fixture::presence({false, false, true}));
  EXPECT_EQ(merged.samples[1].label, fixture::labels(1, 2, {2, 0}));
  EXPECT_EQ(merged.samples[1].source, "spleen");
  EXPECT_EQ(merged.manifest.sources.size(), 2u);
}

TEST(Merge, SingleCompleteSourceIsUnchanged) {
  const Sample s = make_sample("a", "s1", "full", {0, 1, 2});
  SourceDataset full{{"full", {{1, 1}, {2, 2}}, {}, true}, {{1, "liver"}, {2, "spleen"}}, {s}};
  const auto merged = merge_datasets({full}, {"background", "liver", "spleen"});
  EXPECT_EQ(merged.samples[0], s);
}

TEST(Merge, InconsistentNamesRejected) {
  SourceDataset a{{"a", {{1, 1}}, {}, false}, {{1, "liver"}}, {}};
  SourceDataset b{{"b", {{1, 1}}, {}, false}, {{1, "spleen"}}, {}};
  EXPECT_THROW(merge_datasets({a, b}, {"background", "liver", "spleen"}), ConfigError);
  EXPECT_THROW(merge_datasets({a, a}, {"background", "liver", "spleen"}), ConfigError);
}

TEST(Split, SubjectsNeverStraddle) {
  const auto samples = subjects({{"s1", 2}, {"s2", 1}, {"s3", 1}, {"s4", 1}});
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto [train, test] = split_train_test(samples, 0.2, seed);
    ASSERT_EQ(test.size(), 1u) << seed;
    EXPECT_NE(test[0].subject, "s1");
    for (const auto& s : subject_set(test)) EXPECT_FALSE(subject_set(train).contains(s));
  }
}

TEST(Split, TenSingletonsGiveTwoTestSubjects) {
  std::vector<std::pair<std::string, std::size_t>> sizes;
  for (int i = 0; i < 10; ++i) sizes.push_back({"s" + std::to_string(i), 1});
  const auto [train, test] = split_train_test(subjects(sizes), 0.2, 3);
  EXPECT_EQ(test.size(), 2u);
  EXPECT_EQ(train.size(), 8u);
}

TEST(Split, DeterministicAndSeedSensitive) {
  std::vector<std::pair<std::string, std::size_t>> sizes;
  for (int i = 0; i < 30; ++i) sizes.push_back({"s" + std::to_string(i), 1 + i % 3});
  const auto samples = subjects(sizes);
  EXPECT_EQ(split_train_test(samples, 0.2, 9), split_train_test(samples, 0.2, 9));
  EXPECT_NE(split_train_test(samples, 0.2, 9).second, split_train_test(samples, 0.2, 10).second);
}

TEST(Split, RejectsBadInput) {
  EXPECT_THROW(split_train_test(subjects({{"only", 4}}), 0.2, 0), ConfigError);
  EXPECT_THROW(split_train_test(subjects({{"a", 1}, {"b", 1}}), 0.0, 0), ConfigError);
  EXPECT_THROW(split_train_test(subjects({{"a", 1}, {"b", 1}}), 1.0, 0), ConfigError);
}

TEST(Shrink, FullLevelIsIdentity) {
  const auto train = subjects({{"a", 2}, {"b", 2}, {"c", 1}});
  EXPECT_EQ(shrink_dataset(train, 80.0, 4), train);
}

TEST(Shrink, HalvingKeepsHalfTheSubjects) {
  std::vector<std::pair<std::string, std::size_t>> sizes;
  for (int i = 0; i < 40; ++i) sizes.push_back({"s" + std::to_string(i), 2});
  const auto train = subjects(sizes);
  const auto half = shrink_dataset(train, 40.0, 5);
  EXPECT_EQ(half.size(), 40u);
  EXPECT_EQ(subject_set(half).size(), 20u);
}

TEST(Shrink, LevelsAreNestedPerSource) {
  std::vector<std::pair<std::string, std::size_t>> sizes;
  for (int i = 0; i < 50; ++i) sizes.push_back({"s" + std::to_string(i), 1 + i % 2});
  auto train = subjects(sizes, "A");
  auto other = subjects(sizes, "B");
  for (auto& s : other) s.id = "B" + s.id, s.subject = "B" + s.subject;
  train.insert(train.end(), other.begin(), other.end());

  for (std::uint64_t seed : {1u, 2u, 3u}) {
    std::set<std::string> previous = id_set(train);
    for (double level : standard_shrink_levels()) {
      const auto subset = shrink_dataset(train, level, seed);
      const auto ids = id_set(subset);
      EXPECT_TRUE(std::includes(previous.begin(), previous.end(), ids.begin(), ids.end())) << level;
      // Both sources survive every level.
      EXPECT_TRUE(std::any_of(subset.begin(), subset.end(), [](const Sample& s) { return s.source == "A"; }));
      EXPECT_TRUE(std::any_of(subset.begin(), subset.end(), [](const Sample& s) { return s.source == "B"; }));
      // Whole subjects only.
      for (const auto& subj : subject_set(subset)) {
        const auto total = std::count_if(train.begin(), train.end(), [&](const Sample& s) { return s.subject == subj; });
        const auto kept = std::count_if(subset.begin(), subset.end(), [&](const Sample& s) { return s.subject == subj; });
        EXPECT_EQ(total, kept);
      }
      previous = ids;
    }
  }
}

TEST(Shrink, RejectsBadLevels) {
  const auto train = subjects({{"a", 1}, {"b", 1}});
  EXPECT_THROW(shrink_dataset(train, 0.0, 0), ConfigError);
  EXPECT_THROW(shrink_dataset(train, 90.0, 0), ConfigError);
  EXPECT_THROW(shrink_dataset({}, 40.0, 0), ConfigError);
}

TEST(SpecificView, RelabelsToLocalSpaceAndTrustsAll) {
  Sample s = make_sample("a", "s", "spleen", {0, 2, 2});
  s.complete_label = fixture::labels(1, 3, {1, 2, 2});
  s.presence = fixture::presence({false, false, true});
  Sample other = make_sample("b", "t", "liver", {1, 0, 0});
  const ClassMapping m{"spleen", {{1, 2}}, {}, false};
  const auto view = specific_view({s, other}, m);
  ASSERT_EQ(view.size(), 1u);
  EXPECT_EQ(view[0].label, fixture::labels(1, 3, {0, 1, 1}));
  EXPECT_EQ(view[0].complete_label, fixture::labels(1, 3, {0, 1, 1}));
  EXPECT_EQ(view[0].presence, PresenceArray::all(2, true));
}

TEST(Relabel, UnmappedValueRejected) {
  EXPECT_THROW(relabel(fixture::labels(1, 2, {0, 3}), {0, 1}), std::invalid_argument);
}
