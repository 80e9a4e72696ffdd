#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pmseg/dataset.hpp"

namespace pmseg {

enum class ShapeFamily { Disk, Ellipse, Bar };

/// Appearance of one foreground class. Sizes are in mm: the radius for
/// disks, the semi-axes for ellipses, length/2 and thickness/2 for bars.
struct ClassAppearance {
  std::string name;
  ShapeFamily shape = ShapeFamily::Disk;
  double min_size = 4.0;
  double max_size = 6.0;
  /// Ellipse axis ratio bound, or bar thickness (half) range [min, max].
  double min_minor = 0.0;
  double max_minor = 0.0;
  double intensity_mean = 0.5;
  double intensity_std = 0.05;
};

/// One single-organ dataset derived from the synthetic population.
struct SyntheticSource {
  std::string id;
  std::size_t images = 0;
  /// Global foreground classes annotated in this source, in local order.
  std::vector<std::uint8_t> classes;
  bool trust_background = false;
};

struct SyntheticSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  /// Field of view is height x width mm at this spacing.
  Spacing standard_spacing{1.0, 1.0};
  /// Per-subject acquisition spacing = standard * (1 + U(-jitter, jitter)).
  double spacing_jitter = 0.0;
  double background_mean = 0.2;
  double background_std = 0.05;
  std::vector<ClassAppearance> classes;
  /// Two classes forced to share intensity statistics.
  std::pair<std::uint8_t, std::uint8_t> similar_pair{1, 3};
  double empty_fraction = 0.5;
  double class_presence = 0.7;
  std::size_t images_per_subject = 2;
  double test_fraction = 0.2;
  std::size_t max_placement_attempts = 200;
  std::vector<SyntheticSource> sources;
  std::uint64_t seed = 20190331;

  std::size_t num_classes() const { return classes.size() + 1; }
  std::vector<std::string> class_names() const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// 64x64, three foreground classes (two sharing appearance), three
/// single-class sources totalling 250 images.
SyntheticSpec default_synthetic_spec();

SyntheticSpec parse_synthetic_spec(std::string_view json);
std::string synthetic_spec_to_json(const SyntheticSpec& spec);

/// n completely labelled samples from generator stream `stream`. Sample i
/// uses its own RNG derived from (seed, stream, i).
std::vector<Sample> generate_synthetic(const SyntheticSpec& spec, std::size_t n,
                                       std::uint64_t stream = 0, const std::string& prefix = "img");

/// Generates each source, strips unannotated classes, maps them to local
/// label spaces, merges back into the global space and splits by subject.
Corpus build_synthetic_corpus(const SyntheticSpec& spec);

}  // namespace pmseg
