#include "pmseg/resample.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pmseg {
namespace {

std::size_t output_extent(std::size_t n, double source, double target) {
  if (!(target > 0.0)) throw std::invalid_argument("resample: target spacing must be positive");
  const double extent = std::round(static_cast<double>(n) * source / target);
  if (extent < 1.0)
    throw std::invalid_argument("resample: degenerate output extent for " + std::to_string(n) +
                                " pixels at spacing " + std::to_string(source) + " -> " +
                                std::to_string(target));
  return static_cast<std::size_t>(extent);
}

double source_coordinate(std::size_t i, double source, double target) {
  return (static_cast<double>(i) + 0.5) * target / source - 0.5;
}

std::size_t nearest_index(std::size_t i, double source, double target, std::size_t n) {
  const double pos = std::floor((static_cast<double>(i) + 0.5) * target / source);
  return static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(n - 1)));
}

template <typename Map>
Map nearest_impl(const Map& map, Spacing target, std::size_t h, std::size_t w) {
  if (!(target.row > 0.0) || !(target.col > 0.0))
    throw std::invalid_argument("resample: target spacing must be positive");
  if (h == 0 || w == 0) throw std::invalid_argument("resample: degenerate output extent");
  if (target == map.spacing() && h == map.height() && w == map.width()) return map;
  Map out(h, w, target);
  for (std::size_t i = 0; i < h; ++i) {
    const std::size_t si = nearest_index(i, map.spacing().row, target.row, map.height());
    for (std::size_t j = 0; j < w; ++j)
      out(i, j) = map(si, nearest_index(j, map.spacing().col, target.col, map.width()));
  }
  return out;
}

}  // namespace

FeatureImage resample_bilinear(const FeatureImage& img, Spacing target) {
  return resample_bilinear(img, target, output_extent(img.height(), img.spacing().row, target.row),
                           output_extent(img.width(), img.spacing().col, target.col));
}

FeatureImage resample_bilinear(const FeatureImage& img, Spacing target, std::size_t h,
                               std::size_t w) {
  if (!(target.row > 0.0) || !(target.col > 0.0))
    throw std::invalid_argument("resample: target spacing must be positive");
  if (h == 0 || w == 0) throw std::invalid_argument("resample: degenerate output extent");
  if (target == img.spacing() && h == img.height() && w == img.width()) return img;

  FeatureImage out(h, w, target);
  const double max_r = static_cast<double>(img.height() - 1);
  const double max_c = static_cast<double>(img.width() - 1);
  for (std::size_t i = 0; i < h; ++i) {
    const double r = std::clamp(source_coordinate(i, img.spacing().row, target.row), 0.0, max_r);
    const std::size_t r0 = static_cast<std::size_t>(std::floor(r));
    const std::size_t r1 = std::min(r0 + 1, img.height() - 1);
    const double fr = r - static_cast<double>(r0);
    for (std::size_t j = 0; j < w; ++j) {
      const double c = std::clamp(source_coordinate(j, img.spacing().col, target.col), 0.0, max_c);
      const std::size_t c0 = static_cast<std::size_t>(std::floor(c));
      const std::size_t c1 = std::min(c0 + 1, img.width() - 1);
      const double fc = c - static_cast<double>(c0);
      const double top = img(r0, c0) * (1.0 - fc) + img(r0, c1) * fc;
      const double bottom = img(r1, c0) * (1.0 - fc) + img(r1, c1) * fc;
      out(i, j) = top * (1.0 - fr) + bottom * fr;
    }
  }
  return out;
}

LabelMap resample_nearest(const LabelMap& map, Spacing target) {
  return nearest_impl(map, target, output_extent(map.height(), map.spacing().row, target.row),
                      output_extent(map.width(), map.spacing().col, target.col));
}
LabelMap resample_nearest(const LabelMap& map, Spacing target, std::size_t h, std::size_t w) {
  return nearest_impl(map, target, h, w);
}
PredictionMap resample_nearest(const PredictionMap& map, Spacing target) {
  return nearest_impl(map, target, output_extent(map.height(), map.spacing().row, target.row),
                      output_extent(map.width(), map.spacing().col, target.col));
}
PredictionMap resample_nearest(const PredictionMap& map, Spacing target, std::size_t h,
                               std::size_t w) {
  return nearest_impl(map, target, h, w);
}

CropPadRecord plan_crop_or_pad(std::size_t h, std::size_t w, std::size_t th, std::size_t tw) {
  if (th == 0 || tw == 0) throw std::invalid_argument("crop_or_pad: target extents must be positive");
  auto offset = [](std::size_t n, std::size_t t) -> long {
    // Crop keeps floor(excess/2) on the low side; pad puts floor(short/2) there.
    if (n >= t) return static_cast<long>((n - t) / 2);
    return -static_cast<long>((t - n) / 2);
  };
  return {offset(h, th), offset(w, tw), h, w, th, tw};
}

GeometryRecord identity_geometry(std::size_t h, std::size_t w, Spacing spacing) {
  return {h, w, spacing, spacing, h, w, plan_crop_or_pad(h, w, h, w)};
}

StandardizedCase standardize(const FeatureImage& feature, const LabelMap& label, Spacing spacing,
                             std::size_t height, std::size_t width) {
  if (feature.height() != label.height() || feature.width() != label.width() ||
      !(feature.spacing() == label.spacing()))
    throw std::invalid_argument("standardize: feature and label grids differ");
  FeatureImage f = resample_bilinear(feature, spacing);
  LabelMap l = resample_nearest(label, spacing, f.height(), f.width());
  GeometryRecord geo{feature.height(), feature.width(), feature.spacing(), spacing,
                     f.height(),       f.width(),       {}};
  geo.crop = plan_crop_or_pad(f.height(), f.width(), height, width);
  return {apply_crop_or_pad(f, geo.crop, 0.0), apply_crop_or_pad(l, geo.crop, std::uint8_t{0}), geo};
}

PredictionMap restore_prediction(const Tensor& p, const GeometryRecord& geo) {
  if (p.rank() != 3 || p.dim(1) != geo.crop.dst_height || p.dim(2) != geo.crop.dst_width)
    throw std::invalid_argument("geometry record does not match probability map " + to_string(p.shape()));
  if (geo.crop.src_height != geo.resampled_height || geo.crop.src_width != geo.resampled_width)
    throw std::invalid_argument("geometry record: crop source differs from resampled extent");
  const PredictionMap standard = predict_labels(p, geo.standard_spacing);
  const PredictionMap uncropped = invert_crop_or_pad(standard, geo.crop, std::uint8_t{0});
  return resample_nearest(uncropped, geo.original_spacing, geo.original_height, geo.original_width);
}

std::vector<double> evaluate_case(const LabelMap& y, const Tensor& p, const GeometryRecord& geo) {
  if (y.height() != geo.original_height || y.width() != geo.original_width)
    throw std::invalid_argument("geometry record: original extent differs from label map");
  const PredictionMap yhat = restore_prediction(p, geo);
  std::vector<double> dice(p.dim(0));
  for (std::size_t c = 0; c < dice.size(); ++c)
    dice[c] = hard_dice(y, yhat, static_cast<std::uint8_t>(c));
  return dice;
}

}  // namespace pmseg
