#include "pmseg/gradcheck_suite.hpp"

#include <cmath>
#include <functional>

#include "pmseg/labels.hpp"
#include "pmseg/losses.hpp"
#include "pmseg/ops.hpp"
#include "pmseg/presence.hpp"
#include "pmseg/rng.hpp"
#include "pmseg/unet.hpp"

namespace pmseg {
namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Values with |v| in [0.05, 1], random sign: safely away from relu kinks.
Tensor jittered(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.05, 1.0);
  return t;
}

// Logits whose per-pixel argmax leads the runner-up by at least 0.2, so
// finite differences never flip a prediction-dependent mask.
Tensor separated_logits(Rng& rng, std::size_t channels, std::size_t h, std::size_t w) {
  Tensor t({channels, h, w});
  const std::size_t hw = h * w;
  for (std::size_t i = 0; i < hw; ++i) {
    const std::size_t top = rng.below(channels);
    for (std::size_t c = 0; c < channels; ++c) t[c * hw + i] = rng.uniform(-1.0, 0.8);
    t[top * hw + i] = 1.0 + rng.uniform(0.0, 1.0);
  }
  return t;
}

LabelMap random_labels(Rng& rng, std::size_t h, std::size_t w, std::size_t classes) {
  LabelMap y(h, w);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<std::uint8_t>(rng.below(classes));
  return y;
}

}  // namespace

std::vector<GradcheckCase> run_gradcheck_suite(std::optional<std::pair<OpKind, double>> fault) {
  GradcheckOptions options;
  options.fault = fault;
  std::vector<GradcheckCase> out;
  auto check = [&](std::string name, const RecordedFn& fn, std::vector<Tensor> params) {
    GradcheckCase c{std::move(name), finite_difference_check(fn, std::move(params), options), false};
    c.passed = c.result.max_rel_error <= kGradcheckTolerance;
    out.push_back(std::move(c));
  };

  Rng rng(20190331);
  const std::size_t C1 = 3, H = 4, W = 4;

  // Elementwise and reduction ops, reduced with a random weighted sum so
  // every output element carries a distinct gradient.
  const Tensor a = random_tensor(rng, {2, 3, 4}, 0.5, 1.5);
  const Tensor b = random_tensor(rng, {2, 3, 4}, 0.5, 1.5);
  const Tensor r = random_tensor(rng, {2, 3, 4}, -1.0, 1.0);
  auto reduce = [r](Tape& t, NodeId n) { return ops::weighted_sum(t, n, r); };
  check("add", [&](Tape& t, std::span<const NodeId> p) { return reduce(t, ops::add(t, p[0], p[1])); }, {a, b});
  check("mul", [&](Tape& t, std::span<const NodeId> p) { return reduce(t, ops::mul(t, p[0], p[1])); }, {a, b});
  check("div", [&](Tape& t, std::span<const NodeId> p) { return reduce(t, ops::div(t, p[0], p[1])); }, {a, b});
  check("scale", [&](Tape& t, std::span<const NodeId> p) { return reduce(t, ops::scale(t, p[0], -1.7)); }, {a});
  check("add_scalar", [&](Tape& t, std::span<const NodeId> p) { return reduce(t, ops::add_scalar(t, p[0], 0.3)); },
        {a});
  check("log", [&](Tape& t, std::span<const NodeId> p) { return reduce(t, ops::log(t, p[0])); }, {a});
  check("clamp_min", [&](Tape& t, std::span<const NodeId> p) { return reduce(t, ops::clamp_min(t, p[0], 0.2)); },
        {jittered(rng, {2, 3, 4})});
  check("pow", [&](Tape& t, std::span<const NodeId> p) { return reduce(t, ops::pow(t, p[0], 0.75)); }, {a});
  check("relu", [&](Tape& t, std::span<const NodeId> p) { return reduce(t, ops::relu(t, p[0])); },
        {jittered(rng, {2, 3, 4})});
  check("sum", [&](Tape& t, std::span<const NodeId> p) { return ops::sum(t, ops::mul(t, p[0], p[0])); }, {a});
  check("weighted_sum", [&](Tape& t, std::span<const NodeId> p) { return reduce(t, p[0]); }, {a});

  // Spatial ops.
  const Tensor img = random_tensor(rng, {2, 6, 6}, -1.0, 1.0);
  const Tensor r3 = random_tensor(rng, {3, 6, 6}, -1.0, 1.0);
  check("conv2d",
        [&](Tape& t, std::span<const NodeId> p) { return ops::weighted_sum(t, ops::conv2d(t, p[0], p[1], p[2]), r3); },
        {img, random_tensor(rng, {3, 2, 3, 3}, -1.0, 1.0), random_tensor(rng, {3}, -0.5, 0.5)});
  const Tensor rp = random_tensor(rng, {2, 3, 3}, -1.0, 1.0);
  check("max_pool2",
        [&](Tape& t, std::span<const NodeId> p) { return ops::weighted_sum(t, ops::max_pool2(t, p[0]), rp); }, {img});
  const Tensor ru = random_tensor(rng, {2, 12, 12}, -1.0, 1.0);
  check("upsample2",
        [&](Tape& t, std::span<const NodeId> p) { return ops::weighted_sum(t, ops::upsample2(t, p[0]), ru); }, {img});
  const Tensor rc = random_tensor(rng, {4, 6, 6}, -1.0, 1.0);
  check("concat",
        [&](Tape& t, std::span<const NodeId> p) {
          const NodeId both[2] = {p[0], p[1]};
          return ops::weighted_sum(t, ops::concat(t, both), rc);
        },
        {img, random_tensor(rng, {2, 6, 6}, -1.0, 1.0)});
  const Tensor rs = random_tensor(rng, {3, 6, 6}, -1.0, 1.0);
  check("channel_softmax",
        [&](Tape& t, std::span<const NodeId> p) { return ops::weighted_sum(t, ops::channel_softmax(t, p[0]), rs); },
        {random_tensor(rng, {3, 6, 6}, -3.0, 3.0)});

  // Losses on softmax(logits).
  const LabelMap y = random_labels(rng, H, W, C1);
  const Tensor yo = one_hot(y, C1);
  PresenceArray k_partial = PresenceArray::all(C1, true);
  k_partial.set(0, false);
  k_partial.set(2, false);
  const Tensor logits = separated_logits(rng, C1, H, W);
  auto loss_case = [&](std::string name, std::function<NodeId(Tape&, NodeId)> loss) {
    check(std::move(name), [loss](Tape& t, std::span<const NodeId> p) { return loss(t, ops::channel_softmax(t, p[0])); },
          {logits});
  };
  const double eps = 1e-7;
  loss_case("crossentropy", [&](Tape& t, NodeId p) { return crossentropy(t, yo, p); });
  loss_case("dice_soft", [&](Tape& t, NodeId p) { return softdice_loss(t, yo, p, eps); });
  loss_case("dice_log", [&](Tape& t, NodeId p) { return logdice_loss(t, yo, p, eps); });
  loss_case("masked_dice_soft", [&](Tape& t, NodeId p) { return masked_softdice_loss(t, yo, p, k_partial, eps); });
  loss_case("masked_dice_log", [&](Tape& t, NodeId p) { return masked_logdice_loss(t, yo, p, k_partial, eps); });
  loss_case("tversky_index", [&](Tape& t, NodeId p) { return tversky_index(t, yo, p, 1, 0.7, 0.3, eps); });
  loss_case("masked_ftl",
            [&](Tape& t, NodeId p) { return masked_focal_tversky(t, yo, p, k_partial, 0.7, 0.3, 4.0 / 3.0, eps); });
  for (const char* preset : {"xent_base", "xent_or", "xent_plus", "mae_base", "mae_or", "mae_plus",
                             "xent_plus+0.1*dice_soft", "xent_or+dice_log"}) {
    const LossConfig cfg = parse_loss_preset(preset);
    loss_case(std::string("loss:") + preset, [cfg, &y, &k_partial](Tape& t, NodeId p) {
      return sample_loss(t, cfg, p, y, k_partial);
    });
  }
  {
    LossConfig raw = parse_loss_preset("xent_or");
    raw.normalization = PixelNormalization::None;
    loss_case("loss:xent_or(raw sum)", [raw, &y, &k_partial](Tape& t, NodeId p) {
      return sample_loss(t, raw, p, y, k_partial);
    });
  }

  // Whole network through a masked loss.
  NetConfig net;
  net.levels = 1;
  net.base_channels = 2;
  net.out_channels = C1;
  net.seed = 7;
  NetParams params = init_xavier(net);
  for (std::size_t i = 1; i < params.count(); i += 2)
    for (std::size_t j = 0; j < params.tensors[i].size(); ++j) params.tensors[i][j] = rng.uniform(0.05, 0.2);
  const Tensor x = random_tensor(rng, {1, 8, 8}, -1.0, 1.0);
  const LabelMap yn = random_labels(rng, 8, 8, C1);
  const LossConfig net_loss = parse_loss_preset("xent_or+0.5*dice_soft");
  check("network:xent_or+0.5*dice_soft",
        [&](Tape& t, std::span<const NodeId> p) {
          const NodeId prob = forward(t, net, p, t.constant(x));
          return sample_loss(t, net_loss, prob, yn, k_partial);
        },
        params.tensors);
  return out;
}

}  // namespace pmseg
