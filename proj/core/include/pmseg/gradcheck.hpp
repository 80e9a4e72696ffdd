#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pmseg/tape.hpp"

namespace pmseg {

/// Builds a scalar-valued computation on `tape` from the given parameter nodes.
using RecordedFn = std::function<NodeId(Tape& tape, std::span<const NodeId> params)>;

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradcheckOptions {
  double step = 1e-5;
  /// Forwarded to Tape::inject_backward_fault on the analytic pass.
  std::optional<std::pair<OpKind, double>> fault;
};

/// Compares reverse-mode gradients against central differences. The error
/// per element is |a - n| / max(1e-12, |a| + |n|); the maximum is returned.
GradcheckResult finite_difference_check(const RecordedFn& fn, std::vector<Tensor> params,
                                        const GradcheckOptions& options = {});

}  // namespace pmseg
