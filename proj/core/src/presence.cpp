#include "pmseg/presence.hpp"

#include <algorithm>
#include <stdexcept>

#include "pmseg/error.hpp"

namespace pmseg {
namespace {

void check_labels(const LabelMap& y, const PresenceArray& k) {
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] >= k.size())
      throw std::invalid_argument("presence mask: label " + std::to_string(y[i]) + " at pixel " +
                                  std::to_string(i) + " outside presence array of size " +
                                  std::to_string(k.size()));
}

void check_pair(const LabelMap& y, const PredictionMap& yhat, const PresenceArray& k) {
  if (y.height() != yhat.height() || y.width() != yhat.width())
    throw std::invalid_argument("presence mask: shape mismatch " + std::to_string(y.height()) + "x" +
                                std::to_string(y.width()) + " vs " + std::to_string(yhat.height()) +
                                "x" + std::to_string(yhat.width()));
  check_labels(y, k);
  for (std::size_t i = 0; i < yhat.size(); ++i)
    if (yhat[i] >= k.size())
      throw std::invalid_argument("presence mask: predicted class outside presence array");
}

}  // namespace

std::size_t PresenceArray::count() const {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), true));
}

void ClassMapping::validate(std::size_t num_classes) const {
  std::set<std::uint8_t> targets;
  for (auto [local, global] : local_to_global) {
    if (local == 0 && global != 0)
      throw ConfigError("mapping '" + source_id + "': background must map to background");
    if (local != 0 && global == 0)
      throw ConfigError("mapping '" + source_id + "': foreground class " + std::to_string(local) +
                        " maps onto background");
    if (global >= num_classes)
      throw ConfigError("mapping '" + source_id + "': global class " + std::to_string(global) +
                        " out of range");
    if (local != 0 && !targets.insert(global).second)
      throw ConfigError("mapping '" + source_id + "': global class " + std::to_string(global) +
                        " targeted twice");
  }
  for (auto c : invalidated)
    if (c == 0 || c >= num_classes)
      throw ConfigError("mapping '" + source_id + "': invalid invalidated class " + std::to_string(c));
}

std::pair<LabelMap, PresenceArray> remap_labels(const LabelMap& y_local, const ClassMapping& mapping,
                                                std::size_t num_classes) {
  mapping.validate(num_classes);
  std::vector<int> lut(256, -1);
  lut[0] = 0;
  for (auto [local, global] : mapping.local_to_global) lut[local] = global;

  LabelMap out(y_local.height(), y_local.width(), y_local.spacing());
  for (std::size_t i = 0; i < y_local.size(); ++i) {
    const int g = lut[y_local[i]];
    if (g < 0)
      throw ConfigError("mapping '" + mapping.source_id + "': unmapped label " +
                        std::to_string(y_local[i]) + " at pixel " + std::to_string(i));
    out[i] = static_cast<std::uint8_t>(g);
  }

  PresenceArray k = PresenceArray::all(num_classes, false);
  k.set(0, mapping.trust_background);
  for (auto [local, global] : mapping.local_to_global)
    if (local != 0 && !mapping.invalidated.contains(global)) k.set(global, true);
  return {std::move(out), std::move(k)};
}

std::string_view to_string(MaskMode mode) {
  switch (mode) {
    case MaskMode::None: return "none";
    case MaskMode::Base: return "base";
    case MaskMode::Or: return "or";
    case MaskMode::Plus: return "plus";
  }
  return "none";
}

std::optional<MaskMode> parse_mask_mode(std::string_view name) {
  if (name == "none") return MaskMode::None;
  if (name == "base") return MaskMode::Base;
  if (name == "or") return MaskMode::Or;
  if (name == "plus") return MaskMode::Plus;
  return std::nullopt;
}

PresenceMask build_mask_base(const LabelMap& y, const PresenceArray& k) {
  check_labels(y, k);
  PresenceMask w(y.height(), y.width(), y.spacing());
  for (std::size_t i = 0; i < y.size(); ++i) w[i] = k[y[i]] ? 1.0 : 0.0;
  return w;
}

PresenceMask build_mask_or(const LabelMap& y, const PredictionMap& yhat, const PresenceArray& k) {
  check_pair(y, yhat, k);
  PresenceMask w(y.height(), y.width(), y.spacing());
  for (std::size_t i = 0; i < y.size(); ++i) {
    // Binary union: a pixel counts once if either class is trusted.
    w[i] = (k[y[i]] || k[yhat[i]]) ? 1.0 : 0.0;
  }
  return w;
}

PresenceMask build_mask_plus(const LabelMap& y, const PredictionMap& yhat, const PresenceArray& k) {
  check_pair(y, yhat, k);
  PresenceMask w(y.height(), y.width(), y.spacing());
  for (std::size_t i = 0; i < y.size(); ++i)
    w[i] = (k[y[i]] ? 1.0 : 0.0) + (k[yhat[i]] ? 1.0 : 0.0);
  return w;
}

PresenceMask build_mask(MaskMode mode, const LabelMap& y, const PredictionMap* yhat,
                        const PresenceArray& k) {
  switch (mode) {
    case MaskMode::None:
      check_labels(y, k);
      return PresenceMask(y.height(), y.width(), y.spacing(), 1.0);
    case MaskMode::Base:
      return build_mask_base(y, k);
    case MaskMode::Or:
    case MaskMode::Plus:
      if (!yhat) throw std::invalid_argument("mask mode requires a prediction");
      return mode == MaskMode::Or ? build_mask_or(y, *yhat, k) : build_mask_plus(y, *yhat, k);
  }
  throw std::invalid_argument("unknown mask mode");
}

}  // namespace pmseg
