#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmseg/presence.hpp"
#include "pmseg/raster.hpp"
#include "pmseg/tape.hpp"

namespace pmseg {

/// Floor applied to probabilities before taking logarithms.
inline constexpr double kProbabilityFloor = 1e-12;

enum class LossKind { Xent, DiceSoft, DiceLog, Ftl, Mae };

std::string_view to_string(LossKind kind);

/// How pixel-aggregated losses (crossentropy, MAE) are scaled.
enum class PixelNormalization {
  MaskSum,  ///< divide by max(1, sum_m w_m)
  None,     ///< raw weighted sum
};

struct LossTerm {
  LossKind kind = LossKind::Xent;
  MaskMode mode = MaskMode::None;  ///< pixel-aggregated kinds only
  double weight = 1.0;
  friend bool operator==(const LossTerm&, const LossTerm&) = default;
};

/// A weighted sum of loss terms plus the shared numeric parameters. A single
/// term is a plain loss; several terms form a combined loss.
struct LossConfig {
  std::string name;
  std::vector<LossTerm> terms;
  double epsilon = 1e-7;        ///< dice / Tversky smoothing
  double tversky_alpha = 0.7;   ///< false-positive weight
  double tversky_beta = 0.3;    ///< false-negative weight
  double focal_gamma = 4.0 / 3.0;
  PixelNormalization normalization = PixelNormalization::MaskSum;

  /// Throws ConfigError on an empty term list, negative weights, etc.
  void validate() const;
  /// True when any term needs the argmax prediction to build its mask.
  bool needs_prediction() const;
};

/// Parses names such as "xent_or", "dice_soft", "xent_plus+0.1*dice_soft",
/// "xent_base+dice_log", "ftl", "mae_or". Throws ConfigError on unknown names.
LossConfig parse_loss_preset(std::string_view name);

// All functions below take y as a one-hot [C+1,H,W] constant and p as a
// probability node of the same shape, and return a scalar node.

NodeId softdice_per_class(Tape& t, const Tensor& y_onehot, NodeId p, std::size_t c, double eps);

/// sum_c (1 - softdice^c)
NodeId softdice_loss(Tape& t, const Tensor& y_onehot, NodeId p, double eps);
/// -sum_c log softdice^c
NodeId logdice_loss(Tape& t, const Tensor& y_onehot, NodeId p, double eps);

/// sum_c k^c (1 - softdice^c) / sum_c k^c. Rejects an all-false k.
NodeId masked_softdice_loss(Tape& t, const Tensor& y_onehot, NodeId p, const PresenceArray& k,
                            double eps);
/// sum_c k^c (-log softdice^c) / sum_c k^c. Rejects an all-false k.
NodeId masked_logdice_loss(Tape& t, const Tensor& y_onehot, NodeId p, const PresenceArray& k,
                           double eps);

/// Mean over pixels of -sum_c y^c log p^c.
NodeId crossentropy(Tape& t, const Tensor& y_onehot, NodeId p);
/// -sum_m w_m sum_c y^c log p^c, optionally divided by max(1, sum w).
NodeId masked_crossentropy(Tape& t, const Tensor& y_onehot, NodeId p, const PresenceMask& w,
                           PixelNormalization norm = PixelNormalization::MaskSum);

NodeId tversky_index(Tape& t, const Tensor& y_onehot, NodeId p, std::size_t c, double alpha,
                     double beta, double eps);
/// sum_c k^c (1 - TI^c)^(1/gamma) / sum_c k^c
NodeId masked_focal_tversky(Tape& t, const Tensor& y_onehot, NodeId p, const PresenceArray& k,
                            double alpha, double beta, double gamma, double eps);

/// sum_m w_m (2 - 2 p_m^{y_m}), optionally divided by max(1, sum w).
/// Positive sign: minimizing drives p toward the ground truth.
NodeId masked_mae(Tape& t, const Tensor& y_onehot, NodeId p, const PresenceMask& w,
                  PixelNormalization norm = PixelNormalization::MaskSum);

struct WeightedLoss {
  double weight;
  NodeId loss;
};

/// sum_i weight_i * loss_i. Rejects an empty list or all-zero weights.
NodeId combined_loss(Tape& t, std::span<const WeightedLoss> parts);

/// Evaluates `config` for one sample. Masks for or/plus modes come from the
/// argmax of the current value of p and are constants on the tape.
NodeId sample_loss(Tape& t, const LossConfig& config, NodeId p, const LabelMap& y,
                   const PresenceArray& k);

}  // namespace pmseg
