#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pmseg/raster.hpp"
#include "pmseg/tape.hpp"

namespace pmseg {

struct NetConfig {
  std::size_t levels = 2;
  std::size_t base_channels = 8;
  std::size_t in_channels = 1;
  std::size_t out_channels = 4;
  std::size_t kernel = 3;
  std::uint64_t seed = 0;
  /// Images enter the network as (x - input_mean) / input_std.
  double input_mean = 0.0;
  double input_std = 1.0;

  void validate() const;
  /// Throws unless h and w are divisible by 2^levels.
  void check_extents(std::size_t h, std::size_t w) const;
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// Flat parameter list. Order and names are fixed by the config:
/// enc<l>.conv<i>.{w,b}, bottom.conv<i>.{w,b}, dec<l>.conv.{w,b}, head.{w,b}.
struct NetParams {
  std::vector<std::string> names;
  std::vector<Tensor> tensors;

  std::size_t count() const noexcept { return tensors.size(); }
  std::size_t scalar_count() const;
  friend bool operator==(const NetParams&, const NetParams&) = default;
};

/// Parameter names and shapes for `config`, all zero.
NetParams zero_params(const NetConfig& config);

/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)) with fan = channels * k * k;
/// biases zero.
NetParams init_xavier(const NetConfig& config);

/// Records the network on `t`. `params` are nodes holding the tensors of
/// zero_params(config) in order; x is [in_channels,H,W]. Returns the
/// [out_channels,H,W] softmax node.
NodeId forward(Tape& t, const NetConfig& config, std::span<const NodeId> params, NodeId x);

/// Probabilities for one image, without gradients.
Tensor predict(const NetConfig& config, const NetParams& params, const FeatureImage& image);

/// Normalized [1,H,W] network input.
Tensor image_tensor(const NetConfig& config, const FeatureImage& image);

/// Sets input_mean/input_std to the pixel statistics of `images`.
void fit_input_normalization(NetConfig& config, const std::vector<FeatureImage>& images);

}  // namespace pmseg
