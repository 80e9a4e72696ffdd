#include "pmseg/labels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pmseg {
namespace {

template <typename Map>
Tensor one_hot_impl(const Map& y, std::size_t num_classes) {
  if (num_classes == 0) throw std::invalid_argument("one_hot: num_classes must be positive");
  Tensor out({num_classes, y.height(), y.width()});
  const std::size_t hw = y.size();
  for (std::size_t i = 0; i < hw; ++i) {
    const std::size_t c = y[i];
    if (c >= num_classes)
      throw std::invalid_argument("one_hot: label " + std::to_string(c) + " at pixel " +
                                  std::to_string(i) + " (row " + std::to_string(i / y.width()) +
                                  ", col " + std::to_string(i % y.width()) + ") exceeds " +
                                  std::to_string(num_classes - 1));
    out[c * hw + i] = 1.0;
  }
  return out;
}

}  // namespace

Tensor one_hot(const LabelMap& y, std::size_t num_classes) { return one_hot_impl(y, num_classes); }
Tensor one_hot(const PredictionMap& y, std::size_t num_classes) {
  return one_hot_impl(y, num_classes);
}

void validate_probability_map(const Tensor& p) {
  if (p.rank() != 3) throw std::invalid_argument("probability map must be [C+1,H,W], got " + to_string(p.shape()));
  const std::size_t c = p.dim(0), hw = p.dim(1) * p.dim(2);
  for (std::size_t i = 0; i < hw; ++i) {
    double s = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double v = p[ch * hw + i];
      if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("probability out of [0,1] at pixel " + std::to_string(i));
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9)
      throw std::invalid_argument("probabilities do not sum to 1 at pixel " + std::to_string(i));
  }
}

PredictionMap predict_labels(const Tensor& p, Spacing spacing) {
  if (p.rank() != 3) throw std::invalid_argument("predict_labels: expected [C+1,H,W], got " + to_string(p.shape()));
  const std::size_t c = p.dim(0), h = p.dim(1), w = p.dim(2), hw = h * w;
  if (c > 256) throw std::invalid_argument("predict_labels: more than 256 classes");
  PredictionMap out(h, w, spacing);
  for (std::size_t i = 0; i < hw; ++i) {
    std::size_t best = 0;
    for (std::size_t ch = 1; ch < c; ++ch)
      if (p[ch * hw + i] > p[best * hw + i]) best = ch;
    out[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

OverlapCounts overlap_counts(const LabelMap& y, const PredictionMap& yhat, std::uint8_t c) {
  if (y.height() != yhat.height() || y.width() != yhat.width())
    throw std::invalid_argument("hard dice: shape mismatch " + std::to_string(y.height()) + "x" +
                                std::to_string(y.width()) + " vs " + std::to_string(yhat.height()) +
                                "x" + std::to_string(yhat.width()));
  OverlapCounts counts;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool a = y[i] == c, b = yhat[i] == c;
    counts.truth += a;
    counts.predicted += b;
    counts.intersection += a && b;
  }
  return counts;
}

double dice_from_counts(const OverlapCounts& counts) {
  const std::size_t denom = counts.truth + counts.predicted;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(counts.intersection) / static_cast<double>(denom);
}

double hard_dice(const LabelMap& y, const PredictionMap& yhat, std::uint8_t c) {
  return dice_from_counts(overlap_counts(y, yhat, c));
}

}  // namespace pmseg
