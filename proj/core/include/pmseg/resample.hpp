#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "pmseg/labels.hpp"
#include "pmseg/raster.hpp"
#include "pmseg/tensor.hpp"

namespace pmseg {

// Pixel-centre convention (align-corners false): output pixel i of a raster
// resampled from spacing s to spacing t samples the input at continuous index
// (i + 0.5) * t / s - 0.5. Output extents are round(n * s / t) unless given.

/// Bilinear interpolation with edge clamping.
FeatureImage resample_bilinear(const FeatureImage& img, Spacing target);
FeatureImage resample_bilinear(const FeatureImage& img, Spacing target, std::size_t height,
                               std::size_t width);

/// Nearest-neighbour; never invents label values.
LabelMap resample_nearest(const LabelMap& map, Spacing target);
LabelMap resample_nearest(const LabelMap& map, Spacing target, std::size_t height, std::size_t width);
PredictionMap resample_nearest(const PredictionMap& map, Spacing target);
PredictionMap resample_nearest(const PredictionMap& map, Spacing target, std::size_t height,
                               std::size_t width);

/// dst(i, j) = src(i + row_offset, j + col_offset), fill outside src.
struct CropPadRecord {
  long row_offset = 0;
  long col_offset = 0;
  std::size_t src_height = 0;
  std::size_t src_width = 0;
  std::size_t dst_height = 0;
  std::size_t dst_width = 0;
  friend bool operator==(const CropPadRecord&, const CropPadRecord&) = default;
};

/// Centre crop/pad plan. Odd excess drops the extra row/column on the high
/// side; odd shortfall puts the extra fill on the high side.
CropPadRecord plan_crop_or_pad(std::size_t height, std::size_t width, std::size_t target_height,
                               std::size_t target_width);

template <typename T, typename Tag>
Raster<T, Tag> apply_crop_or_pad(const Raster<T, Tag>& src, const CropPadRecord& rec, T fill = T{}) {
  Raster<T, Tag> out(rec.dst_height, rec.dst_width, src.spacing(), fill);
  for (std::size_t i = 0; i < rec.dst_height; ++i) {
    const long si = static_cast<long>(i) + rec.row_offset;
    if (si < 0 || si >= static_cast<long>(src.height())) continue;
    for (std::size_t j = 0; j < rec.dst_width; ++j) {
      const long sj = static_cast<long>(j) + rec.col_offset;
      if (sj < 0 || sj >= static_cast<long>(src.width())) continue;
      out(i, j) = src(static_cast<std::size_t>(si), static_cast<std::size_t>(sj));
    }
  }
  return out;
}

/// Maps a raster in the cropped/padded frame back to the source frame.
template <typename T, typename Tag>
Raster<T, Tag> invert_crop_or_pad(const Raster<T, Tag>& dst, const CropPadRecord& rec, T fill = T{}) {
  if (dst.height() != rec.dst_height || dst.width() != rec.dst_width)
    throw std::invalid_argument("invert_crop_or_pad: raster does not match the recorded frame");
  CropPadRecord inverse{-rec.row_offset, -rec.col_offset, rec.dst_height,
                        rec.dst_width,   rec.src_height,  rec.src_width};
  return apply_crop_or_pad(dst, inverse, fill);
}

template <typename T, typename Tag>
std::pair<Raster<T, Tag>, CropPadRecord> crop_or_pad(const Raster<T, Tag>& src,
                                                     std::size_t target_height,
                                                     std::size_t target_width, T fill = T{}) {
  const CropPadRecord rec = plan_crop_or_pad(src.height(), src.width(), target_height, target_width);
  return {apply_crop_or_pad(src, rec, fill), rec};
}

/// Everything needed to map a standardized prediction back onto the
/// original pixel grid.
struct GeometryRecord {
  std::size_t original_height = 0;
  std::size_t original_width = 0;
  Spacing original_spacing;
  Spacing standard_spacing;
  std::size_t resampled_height = 0;
  std::size_t resampled_width = 0;
  CropPadRecord crop;
  friend bool operator==(const GeometryRecord&, const GeometryRecord&) = default;
};

/// Record of a pipeline that leaves an h x w image at unit spacing untouched.
GeometryRecord identity_geometry(std::size_t height, std::size_t width, Spacing spacing = {});

struct StandardizedCase {
  FeatureImage feature;
  LabelMap label;
  GeometryRecord geometry;
};

/// Resample to `spacing` (bilinear for features, nearest for labels) and
/// centre crop/zero-pad to height x width.
StandardizedCase standardize(const FeatureImage& feature, const LabelMap& label, Spacing spacing,
                             std::size_t height, std::size_t width);

/// Argmax, undo crop/pad, nearest-resample onto the original grid.
PredictionMap restore_prediction(const Tensor& p_standardized, const GeometryRecord& geometry);

/// Hard dice per class 0..C at the original resolution.
std::vector<double> evaluate_case(const LabelMap& y_original, const Tensor& p_standardized,
                                  const GeometryRecord& geometry);

}  // namespace pmseg
