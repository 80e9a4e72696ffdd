#pragma once

#include <span>

#include "pmseg/tape.hpp"

namespace pmseg::detail {

/// Accumulates the input gradients of `node` given its output gradient.
/// `input_grads[i]` is null when input i does not require a gradient.
void backward_node(const Tape& tape, const Tape::Node& node, const Tensor& grad_out,
                   std::span<Tensor* const> input_grads);

}  // namespace pmseg::detail
