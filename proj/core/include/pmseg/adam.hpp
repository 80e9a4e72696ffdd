#pragma once

#include <cstdint>
#include <vector>

#include "pmseg/tensor.hpp"

namespace pmseg {

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Zero moments shaped like `params`.
  static AdamState for_params(const std::vector<Tensor>& params, double lr = 1e-4);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Bias-corrected Adam update in place. Throws NumericalError, leaving
/// params and state untouched, when any gradient is non-finite.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state);

}  // namespace pmseg
