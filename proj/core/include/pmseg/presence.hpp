#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pmseg/raster.hpp"

namespace pmseg {

/// Which global classes 0..C carry trustworthy annotations for a sample.
/// A false entry invalidates every occurrence of that class in the label map.
class PresenceArray {
 public:
  PresenceArray() = default;
  explicit PresenceArray(std::vector<bool> valid) : valid_(std::move(valid)) {}
  static PresenceArray all(std::size_t num_classes, bool value = true) {
    return PresenceArray(std::vector<bool>(num_classes, value));
  }

  std::size_t size() const noexcept { return valid_.size(); }
  bool operator[](std::size_t c) const { return valid_.at(c); }
  void set(std::size_t c, bool v) { valid_.at(c) = v; }
  std::size_t count() const;
  bool any() const { return count() > 0; }
  const std::vector<bool>& flags() const noexcept { return valid_; }

  friend bool operator==(const PresenceArray&, const PresenceArray&) = default;

 private:
  std::vector<bool> valid_;
};

/// Source-local -> global class mapping for one dataset.
struct ClassMapping {
  std::string source_id;
  /// Foreground classes only; local 0 always maps to global 0.
  std::map<std::uint8_t, std::uint8_t> local_to_global;
  /// Global classes that may occur in the labels but are not trusted.
  std::set<std::uint8_t> invalidated;
  bool trust_background = false;

  /// Throws ConfigError unless injective on foreground, within range, and
  /// never mapping a foreground class onto background.
  void validate(std::size_t num_classes) const;

  friend bool operator==(const ClassMapping&, const ClassMapping&) = default;
};

/// Rewrites labels into the global space (num_classes = C+1 entries) and
/// derives the presence array: mapped foreground classes are true unless
/// invalidated, background follows trust_background.
std::pair<LabelMap, PresenceArray> remap_labels(const LabelMap& y_local, const ClassMapping& mapping,
                                                std::size_t num_classes);

enum class MaskMode { None, Base, Or, Plus };

std::string_view to_string(MaskMode mode);
std::optional<MaskMode> parse_mask_mode(std::string_view name);

/// w_m = sum_c k^c y_m^c
PresenceMask build_mask_base(const LabelMap& y, const PresenceArray& k);
/// w_m = 1 where k^{y_m} or k^{yhat_m} holds, else 0.
PresenceMask build_mask_or(const LabelMap& y, const PredictionMap& yhat, const PresenceArray& k);
/// w_m = sum_c k^c (y_m^c + yhat_m^c)
PresenceMask build_mask_plus(const LabelMap& y, const PredictionMap& yhat, const PresenceArray& k);

/// Dispatch on mode. None yields all ones; Or/Plus require a prediction.
PresenceMask build_mask(MaskMode mode, const LabelMap& y, const PredictionMap* yhat,
                        const PresenceArray& k);

}  // namespace pmseg
