#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "pmseg/dataset.hpp"
#include "pmseg/labels.hpp"
#include "pmseg/unet.hpp"

namespace pmseg {

/// For each class 0..C, the sources whose annotations of that class are
/// trusted. Background lists the sources that trust background.
std::vector<std::set<std::string>> annotating_sources(const DatasetManifest& manifest);

struct PooledDice {
  /// Per class 0..C: overlap pooled over the images of annotating sources.
  std::vector<OverlapCounts> counts;
  /// Images that contributed to each class.
  std::vector<std::size_t> images;
  /// Pixels whose complete label is background but predicted foreground.
  std::size_t background_false_positives = 0;

  double dice(std::size_t c) const { return dice_from_counts(counts.at(c)); }
  /// Mean dice over foreground classes that had at least one image.
  double mean_foreground() const;
};

/// Predicts every sample, restores predictions to the original grid and
/// scores them against the complete labels.
PooledDice evaluate_pooled(const NetConfig& net, const NetParams& params, const std::vector<Sample>& samples,
                           const std::vector<std::set<std::string>>& class_sources);

/// Same scoring for precomputed probability maps (one per sample).
PooledDice score_predictions(const std::vector<Sample>& samples, const std::vector<Tensor>& probabilities,
                             const std::vector<std::set<std::string>>& class_sources);

}  // namespace pmseg
