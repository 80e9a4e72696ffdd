#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pmseg/adam.hpp"
#include "pmseg/dataset.hpp"
#include "pmseg/evaluate.hpp"
#include "pmseg/losses.hpp"
#include "pmseg/sampler.hpp"
#include "pmseg/unet.hpp"

namespace pmseg {

struct TrainConfig {
  NetConfig net;
  SamplerConfig sampler;
  LossConfig loss;
  std::size_t max_steps = 5000;
  std::size_t plateau_window = 200;
  /// Relative improvement of the windowed mean loss below which training
  /// counts as stalled.
  double plateau_tolerance = 1e-3;
  double learning_rate = 1e-4;
  double fallback_learning_rate = 1e-5;
  /// Test-set evaluation every n steps (0 disables).
  std::size_t eval_every = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class StopReason { MaxSteps, Converged, Diverged };
std::string_view to_string(StopReason r);

struct LogRow {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  /// Empty on steps without evaluation; otherwise per class 0..C.
  std::vector<double> dice;
  std::size_t background_false_positives = 0;
};

/// Everything needed to continue a run bit-exactly.
struct TrainState {
  NetParams params;
  AdamState adam;
  std::size_t step = 0;
  /// 0 = initial lr, 1 = fallback lr.
  int phase = 0;
  /// Step at which the current phase began.
  std::size_t phase_start = 0;
  std::vector<double> losses;
  bool finished = false;
  StopReason reason = StopReason::MaxSteps;

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

struct TrainResult {
  TrainState state;
  std::vector<LogRow> log;
  /// Set when a NumericalError halted training; params are the last good ones.
  std::string failure;
};

/// Optional test-set evaluation during training.
struct EvalSet {
  const std::vector<Sample>* samples = nullptr;
  std::vector<std::set<std::string>> class_sources;
};

TrainState initial_state(const TrainConfig& config);

/// Trains from `state` (use initial_state for a fresh run). A state that hit
/// its step budget resumes when config.max_steps is larger. Deterministic
/// given config and state. Never throws NumericalError; a divergent step is
/// reported through TrainResult::failure.
TrainResult train(const std::vector<Sample>& samples, const TrainConfig& config, TrainState state,
                  const EvalSet& eval = {});

/// One optimizer step's loss and gradients for a batch; exposed for tests
/// and benchmarks.
double batch_loss_and_grads(const NetConfig& net, const LossConfig& loss, const NetParams& params,
                            const std::vector<const Sample*>& batch, std::vector<Tensor>* grads);

std::string log_to_csv(const std::vector<LogRow>& log, const std::vector<std::string>& class_names);

}  // namespace pmseg
