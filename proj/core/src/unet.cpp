#include "pmseg/unet.hpp"

#include <cmath>

#include "pmseg/error.hpp"
#include "pmseg/ops.hpp"
#include "pmseg/rng.hpp"

namespace pmseg {
namespace {

struct ConvSpec {
  std::string name;
  std::size_t cin, cout, k;
};

std::vector<ConvSpec> layout(const NetConfig& c) {
  std::vector<ConvSpec> convs;
  std::size_t ch = c.in_channels;
  for (std::size_t l = 0; l < c.levels; ++l) {
    const std::size_t width = c.base_channels << l;
    convs.push_back({"enc" + std::to_string(l) + ".conv0", ch, width, c.kernel});
    convs.push_back({"enc" + std::to_string(l) + ".conv1", width, width, c.kernel});
    ch = width;
  }
  const std::size_t bottom = c.base_channels << c.levels;
  convs.push_back({"bottom.conv0", ch, bottom, c.kernel});
  convs.push_back({"bottom.conv1", bottom, bottom, c.kernel});
  ch = bottom;
  for (std::size_t l = c.levels; l-- > 0;) {
    const std::size_t width = c.base_channels << l;
    convs.push_back({"dec" + std::to_string(l) + ".conv", ch + width, width, c.kernel});
    ch = width;
  }
  convs.push_back({"head", ch, c.out_channels, 1});
  return convs;
}

}  // namespace

void NetConfig::validate() const {
  if (levels < 1 || levels > 6) throw ConfigError("net: levels must be in [1, 6]");
  if (base_channels < 1) throw ConfigError("net: base_channels must be positive");
  if (in_channels < 1) throw ConfigError("net: in_channels must be positive");
  if (out_channels < 2) throw ConfigError("net: out_channels must be at least 2");
  if (kernel % 2 == 0) throw ConfigError("net: kernel must be odd");
  if (!std::isfinite(input_mean) || !(input_std > 0.0) || !std::isfinite(input_std))
    throw ConfigError("net: input normalization must be finite with input_std > 0");
}

void NetConfig::check_extents(std::size_t h, std::size_t w) const {
  const std::size_t m = std::size_t{1} << levels;
  if (h == 0 || w == 0 || h % m != 0 || w % m != 0)
    throw ConfigError("net: image " + std::to_string(h) + "x" + std::to_string(w) + " not divisible by " +
                      std::to_string(m) + "; crop or pad first");
}

std::size_t NetParams::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors) n += t.size();
  return n;
}

NetParams zero_params(const NetConfig& config) {
  config.validate();
  NetParams p;
  for (const ConvSpec& c : layout(config)) {
    p.names.push_back(c.name + ".w");
    p.tensors.emplace_back(Shape{c.cout, c.cin, c.k, c.k});
    p.names.push_back(c.name + ".b");
    p.tensors.emplace_back(Shape{c.cout});
  }
  return p;
}

NetParams init_xavier(const NetConfig& config) {
  NetParams p = zero_params(config);
  Rng rng(derive_seed(config.seed, 0x1417));
  for (std::size_t i = 0; i < p.count(); i += 2) {
    Tensor& w = p.tensors[i];
    const double kk = static_cast<double>(w.dim(2) * w.dim(3));
    const double fan_in = static_cast<double>(w.dim(1)) * kk;
    const double fan_out = static_cast<double>(w.dim(0)) * kk;
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = rng.uniform(-bound, bound);
  }
  return p;
}

NodeId forward(Tape& t, const NetConfig& config, std::span<const NodeId> params, NodeId x) {
  const std::size_t expected = 2 * (2 * config.levels + 2 + config.levels + 1);
  if (params.size() != expected)
    throw std::invalid_argument("net forward: expected " + std::to_string(expected) + " parameter nodes, got " +
                                std::to_string(params.size()));
  const Tensor& xv = t.value(x);
  if (xv.rank() != 3 || xv.dim(0) != config.in_channels)
    throw std::invalid_argument("net forward: input must be [" + std::to_string(config.in_channels) + ",H,W], got " +
                                to_string(xv.shape()));
  config.check_extents(xv.dim(1), xv.dim(2));

  std::size_t next = 0;
  auto conv = [&](NodeId in) {
    const NodeId out = ops::conv2d(t, in, params[next], params[next + 1]);
    next += 2;
    return out;
  };

  std::vector<NodeId> skips;
  NodeId h = x;
  for (std::size_t l = 0; l < config.levels; ++l) {
    h = ops::relu(t, conv(h));
    h = ops::relu(t, conv(h));
    skips.push_back(h);
    h = ops::max_pool2(t, h);
  }
  h = ops::relu(t, conv(h));
  h = ops::relu(t, conv(h));
  for (std::size_t l = config.levels; l-- > 0;) {
    const NodeId both[2] = {ops::upsample2(t, h), skips[l]};
    h = ops::relu(t, conv(ops::concat(t, both)));
  }
  return ops::channel_softmax(t, conv(h));
}

Tensor image_tensor(const NetConfig& config, const FeatureImage& image) {
  std::vector<double> v(image.values().begin(), image.values().end());
  for (double& x : v) x = (x - config.input_mean) / config.input_std;
  return Tensor({1, image.height(), image.width()}, std::move(v));
}

void fit_input_normalization(NetConfig& config, const std::vector<FeatureImage>& images) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const FeatureImage& im : images)
    for (double v : im.values()) {
      sum += v;
      ++n;
    }
  if (n == 0) throw ConfigError("net: cannot fit input normalization without pixels");
  const double mean = sum / static_cast<double>(n);
  for (const FeatureImage& im : images)
    for (double v : im.values()) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(n));
  config.input_mean = mean;
  config.input_std = sd > 1e-12 ? sd : 1.0;
}

Tensor predict(const NetConfig& config, const NetParams& params, const FeatureImage& image) {
  Tape t;
  std::vector<NodeId> ids;
  ids.reserve(params.count());
  for (const Tensor& p : params.tensors) ids.push_back(t.constant(p));
  return t.value(forward(t, config, ids, t.constant(image_tensor(config, image))));
}

}  // namespace pmseg
