#pragma once

#include <span>

#include "pmseg/tape.hpp"

// Recorded tensor operations. Each call evaluates the forward value
// immediately and appends one node to the tape. Binary elementwise ops require
// identical shapes (no broadcasting). Spatial ops work on [C,H,W] tensors.
namespace pmseg::ops {

NodeId add(Tape& t, NodeId a, NodeId b);
NodeId mul(Tape& t, NodeId a, NodeId b);
NodeId div(Tape& t, NodeId a, NodeId b);
NodeId scale(Tape& t, NodeId a, double factor);
NodeId add_scalar(Tape& t, NodeId a, double offset);
NodeId log(Tape& t, NodeId a);
/// max(a, floor); gradient passes only where a > floor.
NodeId clamp_min(Tape& t, NodeId a, double floor);
/// a^exponent on a >= 0; negative inputs are rejected.
NodeId pow(Tape& t, NodeId a, double exponent);
/// Subgradient at exactly 0 is 0.
NodeId relu(Tape& t, NodeId a);
NodeId sum(Tape& t, NodeId a);
/// sum_i weights_i * a_i with constant weights of a's shape.
NodeId weighted_sum(Tape& t, NodeId a, Tensor weights);

/// Stride-1 cross-correlation with zero padding k/2.
/// input [Cin,H,W], kernel [Cout,Cin,k,k] (k odd), bias [Cout] -> [Cout,H,W].
NodeId conv2d(Tape& t, NodeId input, NodeId kernel, NodeId bias);
/// 2x2 max pool, stride 2; extents must be even. Ties pick the first element.
NodeId max_pool2(Tape& t, NodeId input);
/// 2x nearest-neighbour upsample.
NodeId upsample2(Tape& t, NodeId input);
/// Concatenates along the channel axis.
NodeId concat(Tape& t, std::span<const NodeId> inputs);
/// Per-pixel softmax over channels with max subtraction.
NodeId channel_softmax(Tape& t, NodeId logits);

// Plain forward kernels, shared by the recorded ops and by inference code
// that does not need a tape.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias);
Tensor channel_softmax_forward(const Tensor& logits);

}  // namespace pmseg::ops
