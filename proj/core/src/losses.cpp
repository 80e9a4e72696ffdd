#include "pmseg/losses.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "pmseg/error.hpp"
#include "pmseg/labels.hpp"
#include "pmseg/ops.hpp"

namespace pmseg {
namespace {

struct ChannelLayout {
  std::size_t channels;
  std::size_t pixels;
};

ChannelLayout layout(const Tape& t, const Tensor& y_onehot, NodeId p) {
  const Tensor& pv = t.value(p);
  require_same_shape(y_onehot.shape(), pv.shape(), "loss");
  if (pv.rank() != 3) throw std::invalid_argument("loss: expected [C+1,H,W], got " + to_string(pv.shape()));
  return {pv.dim(0), pv.dim(1) * pv.dim(2)};
}

// Weights selecting channel c of y (y^c where `with_truth`, else 1).
Tensor channel_weights(const Tensor& y_onehot, std::size_t c, bool with_truth) {
  Tensor w(y_onehot.shape(), 0.0);
  const std::size_t hw = y_onehot.dim(1) * y_onehot.dim(2);
  for (std::size_t i = 0; i < hw; ++i) w[c * hw + i] = with_truth ? y_onehot[c * hw + i] : 1.0;
  return w;
}

double channel_total(const Tensor& y_onehot, std::size_t c) {
  const std::size_t hw = y_onehot.dim(1) * y_onehot.dim(2);
  double s = 0.0;
  for (std::size_t i = 0; i < hw; ++i) s += y_onehot[c * hw + i];
  return s;
}

NodeId sum_nodes(Tape& t, std::span<const NodeId> nodes) {
  NodeId acc = nodes.front();
  for (std::size_t i = 1; i < nodes.size(); ++i) acc = ops::add(t, acc, nodes[i]);
  return acc;
}

void require_presence(const PresenceArray& k, std::size_t channels) {
  if (k.size() != channels)
    throw std::invalid_argument("presence array has " + std::to_string(k.size()) + " entries for " +
                                std::to_string(channels) + " classes");
  if (!k.any()) throw std::invalid_argument("presence array is all false: no valid class to supervise");
}

// Averages per-class terms over classes with k^c set.
template <typename TermFn>
NodeId masked_class_mean(Tape& t, const PresenceArray& k, std::size_t channels, TermFn&& term) {
  require_presence(k, channels);
  std::vector<NodeId> parts;
  for (std::size_t c = 0; c < channels; ++c)
    if (k[c]) parts.push_back(term(c));
  return ops::scale(t, sum_nodes(t, parts), 1.0 / static_cast<double>(parts.size()));
}

void require_weights(const PresenceMask& w, std::size_t pixels) {
  if (w.size() != pixels)
    throw std::invalid_argument("presence mask has " + std::to_string(w.size()) +
                                " pixels, probability map has " + std::to_string(pixels));
  for (double v : w.values())
    if (!(v >= 0.0)) throw std::invalid_argument("presence mask weights must be nonnegative");
}

double pixel_normalizer(const PresenceMask& w, PixelNormalization norm) {
  if (norm == PixelNormalization::None) return 1.0;
  double s = 0.0;
  for (double v : w.values()) s += v;
  return std::max(1.0, s);
}

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Xent: return "xent";
    case LossKind::DiceSoft: return "dice_soft";
    case LossKind::DiceLog: return "dice_log";
    case LossKind::Ftl: return "ftl";
    case LossKind::Mae: return "mae";
  }
  return "?";
}

void LossConfig::validate() const {
  if (terms.empty()) throw ConfigError("loss '" + name + "': no loss terms");
  bool any_positive = false;
  for (const LossTerm& term : terms) {
    if (!(term.weight >= 0.0) || !std::isfinite(term.weight))
      throw ConfigError("loss '" + name + "': term weights must be finite and nonnegative");
    any_positive = any_positive || term.weight > 0.0;
  }
  if (!any_positive) throw ConfigError("loss '" + name + "': all term weights are zero");
  if (!(epsilon > 0.0)) throw ConfigError("loss '" + name + "': epsilon must be positive");
  if (!(tversky_alpha >= 0.0) || !(tversky_beta >= 0.0))
    throw ConfigError("loss '" + name + "': Tversky alpha/beta must be nonnegative");
  if (!(focal_gamma > 0.0)) throw ConfigError("loss '" + name + "': focal gamma must be positive");
}

bool LossConfig::needs_prediction() const {
  return std::any_of(terms.begin(), terms.end(), [](const LossTerm& term) {
    return term.mode == MaskMode::Or || term.mode == MaskMode::Plus;
  });
}

LossConfig parse_loss_preset(std::string_view raw) {
  std::string text;
  for (char ch : raw)
    if (!std::isspace(static_cast<unsigned char>(ch))) text += ch;
  if (text.empty()) throw ConfigError("empty loss name");

  LossConfig config;
  config.name = text;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t plus = text.find('+', start);
    std::string_view token(text.data() + start, (plus == std::string::npos ? text.size() : plus) - start);
    if (token.empty()) throw ConfigError("loss '" + text + "': empty term");

    LossTerm term;
    if (const auto star = token.find('*'); star != std::string_view::npos) {
      const std::string_view coef = token.substr(0, star);
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(coef.data(), coef.data() + coef.size(), value);
      if (ec != std::errc{} || ptr != coef.data() + coef.size())
        throw ConfigError("loss '" + text + "': bad coefficient '" + std::string(coef) + "'");
      term.weight = value;
      token = token.substr(star + 1);
    }

    auto with_mode = [&](std::string_view stem, LossKind kind) -> bool {
      if (token == stem) {
        term.kind = kind;
        term.mode = MaskMode::None;
        return true;
      }
      if (token.size() > stem.size() + 1 && token.substr(0, stem.size()) == stem &&
          token[stem.size()] == '_') {
        const auto mode = parse_mask_mode(token.substr(stem.size() + 1));
        if (!mode || *mode == MaskMode::None) return false;
        term.kind = kind;
        term.mode = *mode;
        return true;
      }
      return false;
    };

    if (token == "dice_soft") {
      term.kind = LossKind::DiceSoft;
    } else if (token == "dice_log") {
      term.kind = LossKind::DiceLog;
    } else if (token == "ftl") {
      term.kind = LossKind::Ftl;
    } else if (!with_mode("xent", LossKind::Xent) && !with_mode("mae", LossKind::Mae)) {
      throw ConfigError("unknown loss term '" + std::string(token) + "' in '" + text + "'");
    }
    config.terms.push_back(term);
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  config.validate();
  return config;
}

NodeId softdice_per_class(Tape& t, const Tensor& y_onehot, NodeId p, std::size_t c, double eps) {
  const ChannelLayout l = layout(t, y_onehot, p);
  if (c >= l.channels) throw std::out_of_range("softdice: class index out of range");
  const NodeId inter = ops::weighted_sum(t, p, channel_weights(y_onehot, c, true));
  const NodeId psum = ops::weighted_sum(t, p, channel_weights(y_onehot, c, false));
  const NodeId num = ops::add_scalar(t, ops::scale(t, inter, 2.0), eps);
  const NodeId den = ops::add_scalar(t, psum, channel_total(y_onehot, c) + eps);
  return ops::div(t, num, den);
}

NodeId softdice_loss(Tape& t, const Tensor& y_onehot, NodeId p, double eps) {
  const ChannelLayout l = layout(t, y_onehot, p);
  std::vector<NodeId> parts;
  for (std::size_t c = 0; c < l.channels; ++c)
    parts.push_back(ops::add_scalar(t, ops::scale(t, softdice_per_class(t, y_onehot, p, c, eps), -1.0), 1.0));
  return sum_nodes(t, parts);
}

NodeId logdice_loss(Tape& t, const Tensor& y_onehot, NodeId p, double eps) {
  const ChannelLayout l = layout(t, y_onehot, p);
  std::vector<NodeId> parts;
  for (std::size_t c = 0; c < l.channels; ++c)
    parts.push_back(ops::scale(t, ops::log(t, softdice_per_class(t, y_onehot, p, c, eps)), -1.0));
  return sum_nodes(t, parts);
}

NodeId masked_softdice_loss(Tape& t, const Tensor& y_onehot, NodeId p, const PresenceArray& k,
                            double eps) {
  const ChannelLayout l = layout(t, y_onehot, p);
  return masked_class_mean(t, k, l.channels, [&](std::size_t c) {
    return ops::add_scalar(t, ops::scale(t, softdice_per_class(t, y_onehot, p, c, eps), -1.0), 1.0);
  });
}

NodeId masked_logdice_loss(Tape& t, const Tensor& y_onehot, NodeId p, const PresenceArray& k,
                           double eps) {
  const ChannelLayout l = layout(t, y_onehot, p);
  return masked_class_mean(t, k, l.channels, [&](std::size_t c) {
    return ops::scale(t, ops::log(t, softdice_per_class(t, y_onehot, p, c, eps)), -1.0);
  });
}

NodeId crossentropy(Tape& t, const Tensor& y_onehot, NodeId p) {
  const ChannelLayout l = layout(t, y_onehot, p);
  Tensor weights = y_onehot;
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] *= -1.0 / static_cast<double>(l.pixels);
  const NodeId logp = ops::log(t, ops::clamp_min(t, p, kProbabilityFloor));
  return ops::weighted_sum(t, logp, std::move(weights));
}

NodeId masked_crossentropy(Tape& t, const Tensor& y_onehot, NodeId p, const PresenceMask& w,
                           PixelNormalization norm) {
  const ChannelLayout l = layout(t, y_onehot, p);
  require_weights(w, l.pixels);
  const double scale = -1.0 / pixel_normalizer(w, norm);
  Tensor weights = y_onehot;
  for (std::size_t c = 0; c < l.channels; ++c)
    for (std::size_t i = 0; i < l.pixels; ++i) weights[c * l.pixels + i] *= scale * w[i];
  const NodeId logp = ops::log(t, ops::clamp_min(t, p, kProbabilityFloor));
  return ops::weighted_sum(t, logp, std::move(weights));
}

NodeId tversky_index(Tape& t, const Tensor& y_onehot, NodeId p, std::size_t c, double alpha,
                     double beta, double eps) {
  const ChannelLayout l = layout(t, y_onehot, p);
  if (c >= l.channels) throw std::out_of_range("tversky: class index out of range");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw std::invalid_argument("tversky: alpha, beta must be >= 0");
  const Tensor truth = channel_weights(y_onehot, c, true);
  Tensor complement = channel_weights(y_onehot, c, false);
  for (std::size_t i = 0; i < complement.size(); ++i) complement[i] -= truth[i];
  const double ysum = channel_total(y_onehot, c);

  const NodeId tp = ops::weighted_sum(t, p, truth);
  const NodeId fp = ops::weighted_sum(t, p, std::move(complement));
  // fn = ysum - tp, so the denominator is (1-beta) tp + alpha fp + beta ysum + eps.
  const NodeId den = ops::add_scalar(
      t, ops::add(t, ops::scale(t, tp, 1.0 - beta), ops::scale(t, fp, alpha)), beta * ysum + eps);
  return ops::div(t, ops::add_scalar(t, tp, eps), den);
}

NodeId masked_focal_tversky(Tape& t, const Tensor& y_onehot, NodeId p, const PresenceArray& k,
                            double alpha, double beta, double gamma, double eps) {
  if (!(gamma > 0.0)) throw std::invalid_argument("focal tversky: gamma must be > 0");
  const ChannelLayout l = layout(t, y_onehot, p);
  return masked_class_mean(t, k, l.channels, [&](std::size_t c) {
    const NodeId ti = tversky_index(t, y_onehot, p, c, alpha, beta, eps);
    const NodeId miss = ops::clamp_min(t, ops::add_scalar(t, ops::scale(t, ti, -1.0), 1.0), 0.0);
    return ops::pow(t, miss, 1.0 / gamma);
  });
}

NodeId masked_mae(Tape& t, const Tensor& y_onehot, NodeId p, const PresenceMask& w,
                  PixelNormalization norm) {
  const ChannelLayout l = layout(t, y_onehot, p);
  require_weights(w, l.pixels);
  const double normalizer = pixel_normalizer(w, norm);
  double wsum = 0.0;
  for (double v : w.values()) wsum += v;
  Tensor weights = y_onehot;
  for (std::size_t c = 0; c < l.channels; ++c)
    for (std::size_t i = 0; i < l.pixels; ++i) weights[c * l.pixels + i] *= -2.0 * w[i] / normalizer;
  return ops::add_scalar(t, ops::weighted_sum(t, p, std::move(weights)), 2.0 * wsum / normalizer);
}

NodeId combined_loss(Tape& t, std::span<const WeightedLoss> parts) {
  if (parts.empty()) throw std::invalid_argument("combined loss: no components");
  if (std::none_of(parts.begin(), parts.end(), [](const WeightedLoss& w) { return w.weight != 0.0; }))
    throw std::invalid_argument("combined loss: all weights are zero");
  std::vector<NodeId> scaled;
  for (const WeightedLoss& part : parts)
    scaled.push_back(part.weight == 1.0 ? part.loss : ops::scale(t, part.loss, part.weight));
  return sum_nodes(t, scaled);
}

NodeId sample_loss(Tape& t, const LossConfig& config, NodeId p, const LabelMap& y,
                   const PresenceArray& k) {
  const Tensor& pv = t.value(p);
  const Tensor y_onehot = one_hot(y, pv.dim(0));
  std::optional<PredictionMap> yhat;
  if (config.needs_prediction()) yhat = predict_labels(pv, y.spacing());

  std::vector<WeightedLoss> parts;
  for (const LossTerm& term : config.terms) {
    if (term.weight == 0.0) continue;
    NodeId node{};
    switch (term.kind) {
      case LossKind::Xent:
        node = masked_crossentropy(t, y_onehot, p, build_mask(term.mode, y, yhat ? &*yhat : nullptr, k),
                                   config.normalization);
        break;
      case LossKind::Mae:
        node = masked_mae(t, y_onehot, p, build_mask(term.mode, y, yhat ? &*yhat : nullptr, k),
                          config.normalization);
        break;
      case LossKind::DiceSoft:
        node = masked_softdice_loss(t, y_onehot, p, k, config.epsilon);
        break;
      case LossKind::DiceLog:
        node = masked_logdice_loss(t, y_onehot, p, k, config.epsilon);
        break;
      case LossKind::Ftl:
        node = masked_focal_tversky(t, y_onehot, p, k, config.tversky_alpha, config.tversky_beta,
                                    config.focal_gamma, config.epsilon);
        break;
    }
    parts.push_back({term.weight, node});
  }
  return combined_loss(t, parts);
}

}  // namespace pmseg
