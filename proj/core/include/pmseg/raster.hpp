#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmseg {

/// Physical pixel size in mm.
struct Spacing {
  double row = 1.0;
  double col = 1.0;
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

/// Row-major 2D raster with spacing metadata. The tag keeps rasters with the
/// same pixel type but different meaning (ground truth vs prediction) apart.
template <typename T, typename Tag>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(std::size_t height, std::size_t width, Spacing spacing = {}, T fill = T{})
      : height_(height), width_(width), spacing_(spacing), values_(height * width, fill) {
    validate();
  }
  Raster(std::size_t height, std::size_t width, std::vector<T> values, Spacing spacing = {})
      : height_(height), width_(width), spacing_(spacing), values_(std::move(values)) {
    if (values_.size() != height_ * width_)
      throw std::invalid_argument("raster: " + std::to_string(values_.size()) +
                                  " values for " + std::to_string(height_) + "x" +
                                  std::to_string(width_));
    validate();
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  const Spacing& spacing() const noexcept { return spacing_; }
  void set_spacing(Spacing s) {
    spacing_ = s;
    validate();
  }

  T& operator()(std::size_t y, std::size_t x) { return values_[y * width_ + x]; }
  const T& operator()(std::size_t y, std::size_t x) const { return values_[y * width_ + x]; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  void validate() const {
    if (!(spacing_.row > 0.0) || !(spacing_.col > 0.0))
      throw std::invalid_argument("raster spacing must be strictly positive");
  }

  std::size_t height_ = 0;
  std::size_t width_ = 0;
  Spacing spacing_;
  std::vector<T> values_;
};

struct FeatureTag {};
struct LabelTag {};
struct PredictionTag {};
struct WeightTag {};

/// Scalar intensities.
using FeatureImage = Raster<double, FeatureTag>;
/// Ground-truth class indices 0..C.
using LabelMap = Raster<std::uint8_t, LabelTag>;
/// Argmax class indices derived from a probability map.
using PredictionMap = Raster<std::uint8_t, PredictionTag>;
/// Nonnegative per-pixel loss weights.
using PresenceMask = Raster<double, WeightTag>;

/// Reinterprets pixel data under another tag of the same pixel type.
template <typename To, typename T, typename Tag>
To retag(const Raster<T, Tag>& r) {
  return To(r.height(), r.width(), std::vector<T>(r.values().begin(), r.values().end()),
            r.spacing());
}

}  // namespace pmseg
