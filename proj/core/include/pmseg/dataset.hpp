#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pmseg/presence.hpp"
#include "pmseg/raster.hpp"
#include "pmseg/resample.hpp"

namespace pmseg {

/// One image pair with its provenance.
struct Sample {
  std::string id;
  std::string subject;
  std::string source;
  FeatureImage feature;
  /// Global class space; may be partial (unannotated classes read as 0).
  LabelMap label;
  PresenceArray presence;
  /// Complete global-space annotation kept for evaluation only.
  LabelMap complete_label;
  GeometryRecord geometry;

  /// Any nonzero label value.
  bool has_foreground() const;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct DatasetManifest {
  /// Global class names, index 0 is background.
  std::vector<std::string> class_names;
  std::vector<ClassMapping> sources;

  std::size_t num_classes() const { return class_names.size(); }
  const ClassMapping& source(const std::string& id) const;
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct Corpus {
  DatasetManifest manifest;
  std::vector<Sample> train;
  std::vector<Sample> test;
  friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// Keeps `keep` foreground classes, zeroes the rest. Optionally paints an
/// untrusted class over background pixels inside a row band, the workaround
/// used when a tissue is never annotated but should not be learnt as
/// background.
struct PartialSpec {
  std::set<std::uint8_t> keep;
  bool trust_background = false;
  struct Band {
    std::uint8_t label = 0;
    std::size_t row_begin = 0;
    std::size_t row_end = 0;
  };
  std::optional<Band> invalidated_band;
};

/// Derives partially labelled samples from completely labelled ones. Feature
/// pixels are never touched; the complete labels are retained.
std::vector<Sample> make_partial(const std::vector<Sample>& samples, const PartialSpec& spec);

/// A single-source dataset whose labels are in the source-local space.
struct SourceDataset {
  ClassMapping mapping;
  /// Local class index -> name (background optional).
  std::map<std::uint8_t, std::string> local_names;
  std::vector<Sample> samples;
};

struct MergedDataset {
  DatasetManifest manifest;
  std::vector<Sample> samples;
};

/// Remaps every sample into the global class space and attaches its presence
/// array. `class_names` fixes the global space; a source naming a global
/// index differently is rejected.
MergedDataset merge_datasets(const std::vector<SourceDataset>& sources,
                             const std::vector<std::string>& class_names);

/// Rewrites labels through `lut` (index = old label, value = new label).
LabelMap relabel(const LabelMap& y, const std::vector<std::uint8_t>& lut);

/// Subject-grouped split. Subjects are visited in a seeded order and moved
/// to the test side whenever that brings the test image count closer to
/// round(fraction * N).
std::pair<std::vector<Sample>, std::vector<Sample>> split_train_test(const std::vector<Sample>& samples,
                                                                      double test_fraction,
                                                                      std::uint64_t seed);

/// Nested subject-grouped subset holding percent/80 of `train` per source
/// (80 = the full training split), at least one subject per source. Levels share one seeded subject order, so
/// smaller levels are always subsets of larger ones.
std::vector<Sample> shrink_dataset(const std::vector<Sample>& train, double percent,
                                   std::uint64_t seed);

/// Standard levels: 80, 40, 20, 10, 5, 2.5.
const std::vector<double>& standard_shrink_levels();

/// Samples of one source, expressed in that source's local label space and
/// treated as completely labelled (k all true), for specific classifiers.
std::vector<Sample> specific_view(const std::vector<Sample>& samples, const ClassMapping& mapping);

}  // namespace pmseg
