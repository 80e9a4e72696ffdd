#pragma once

#include <cstddef>
#include <cstdint>

#include "pmseg/raster.hpp"
#include "pmseg/tensor.hpp"

namespace pmseg {

/// Binary [num_classes,H,W] indicator tensor. Rejects labels >= num_classes,
/// naming the offending pixel.
Tensor one_hot(const LabelMap& y, std::size_t num_classes);
Tensor one_hot(const PredictionMap& y, std::size_t num_classes);

/// Throws unless p is [C+1,H,W] with values in [0,1] summing to 1 (1e-9) per pixel.
void validate_probability_map(const Tensor& p);

/// Per-pixel argmax over channels; ties go to the lowest class index.
PredictionMap predict_labels(const Tensor& p, Spacing spacing = {});

struct OverlapCounts {
  std::size_t intersection = 0;
  std::size_t truth = 0;
  std::size_t predicted = 0;

  OverlapCounts& operator+=(const OverlapCounts& o) {
    intersection += o.intersection;
    truth += o.truth;
    predicted += o.predicted;
    return *this;
  }
};

OverlapCounts overlap_counts(const LabelMap& y, const PredictionMap& yhat, std::uint8_t c);

/// 2|A∩B| / (|A|+|B|); 1.0 when both sets are empty.
double dice_from_counts(const OverlapCounts& counts);

double hard_dice(const LabelMap& y, const PredictionMap& yhat, std::uint8_t c);

}  // namespace pmseg
