#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "pmseg/tensor.hpp"

namespace pmseg {

enum class OpKind : std::uint8_t {
  Variable,
  Constant,
  Add,
  Mul,
  Div,
  Scale,
  AddScalar,
  Log,
  ClampMin,
  Pow,
  Relu,
  Sum,
  WeightedSum,
  Conv2d,
  MaxPool2,
  Upsample2,
  Concat,
  ChannelSoftmax,
};

std::string_view op_name(OpKind kind);

/// Handle to a node on a particular Tape.
struct NodeId {
  std::size_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

/// Append-only record of a computation. Every node holds its forward value;
/// backward() walks the record in reverse and fills gradient slots for all
/// nodes that depend on a Variable.
///
/// A tape is single-owner. Values are never mutated once recorded.
class Tape {
 public:
  struct Node {
    OpKind kind = OpKind::Constant;
    std::vector<NodeId> inputs;
    Tensor value;
    Tensor saved;                       // op-specific activations (weights, etc.)
    std::vector<std::uint32_t> indices;  // max-pool argmax positions
    double param = 0.0;                 // scale factor, exponent, floor...
    bool requires_grad = false;
  };

  NodeId variable(Tensor value);
  NodeId constant(Tensor value);

  /// Low-level append used by the op constructors in ops.hpp.
  NodeId record(OpKind kind, std::vector<NodeId> inputs, Tensor value, Tensor saved = {},
                double param = 0.0, std::vector<std::uint32_t> indices = {});

  const Tensor& value(NodeId id) const { return node(id).value; }
  const Node& node(NodeId id) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  bool requires_grad(NodeId id) const { return node(id).requires_grad; }

  /// Reverse accumulation from a scalar (single element) root.
  void backward(NodeId root);

  /// dRoot/dNode after backward(); zeros for nodes off the path.
  Tensor grad(NodeId id) const;

  /// Scales the input gradients produced by every node of `kind`. Exists so
  /// the gradient checker can prove it catches a broken backward pass.
  void inject_backward_fault(OpKind kind, double scale) { fault_ = Fault{kind, scale}; }

 private:
  struct Fault {
    OpKind kind;
    double scale;
  };

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::optional<Fault> fault_;
};

}  // namespace pmseg
