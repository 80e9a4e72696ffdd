#include "pmseg/tape.hpp"

#include <stdexcept>
#include <string>

#include "backward.hpp"
#include "pmseg/error.hpp"

namespace pmseg {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Variable: return "variable";
    case OpKind::Constant: return "constant";
    case OpKind::Add: return "add";
    case OpKind::Mul: return "mul";
    case OpKind::Div: return "div";
    case OpKind::Scale: return "scale";
    case OpKind::AddScalar: return "add_scalar";
    case OpKind::Log: return "log";
    case OpKind::ClampMin: return "clamp_min";
    case OpKind::Pow: return "pow";
    case OpKind::Relu: return "relu";
    case OpKind::Sum: return "sum";
    case OpKind::WeightedSum: return "weighted_sum";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::MaxPool2: return "max_pool2";
    case OpKind::Upsample2: return "upsample2";
    case OpKind::Concat: return "concat";
    case OpKind::ChannelSoftmax: return "channel_softmax";
  }
  return "unknown";
}

NodeId Tape::variable(Tensor value) {
  if (!value.all_finite()) throw NumericalError("variable holds non-finite values");
  Node n;
  n.kind = OpKind::Variable;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return NodeId{nodes_.size() - 1};
}

NodeId Tape::constant(Tensor value) {
  Node n;
  n.kind = OpKind::Constant;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return NodeId{nodes_.size() - 1};
}

NodeId Tape::record(OpKind kind, std::vector<NodeId> inputs, Tensor value, Tensor saved,
                    double param, std::vector<std::uint32_t> indices) {
  if (!value.all_finite())
    throw NumericalError("non-finite output from op '" + std::string(op_name(kind)) + "'");
  Node n;
  n.kind = kind;
  for (NodeId in : inputs) {
    if (in.index >= nodes_.size()) throw std::out_of_range("tape input references a later node");
    n.requires_grad = n.requires_grad || nodes_[in.index].requires_grad;
  }
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  n.saved = std::move(saved);
  n.param = param;
  n.indices = std::move(indices);
  nodes_.push_back(std::move(n));
  return NodeId{nodes_.size() - 1};
}

const Tape::Node& Tape::node(NodeId id) const {
  if (id.index >= nodes_.size()) throw std::out_of_range("node id out of range");
  return nodes_[id.index];
}

void Tape::backward(NodeId root) {
  const Node& r = node(root);
  if (r.value.size() != 1)
    throw std::invalid_argument("backward root must be scalar, got shape " +
                                to_string(r.value.shape()));
  grads_.assign(nodes_.size(), Tensor{});
  grads_[root.index] = Tensor(r.value.shape(), 1.0);

  std::vector<Tensor*> input_grads;
  for (std::size_t i = root.index + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.requires_grad || grads_[i].empty() || n.inputs.empty()) continue;
    input_grads.clear();
    for (NodeId in : n.inputs) {
      const Node& src = nodes_[in.index];
      if (!src.requires_grad) {
        input_grads.push_back(nullptr);
        continue;
      }
      if (grads_[in.index].empty()) grads_[in.index] = Tensor(src.value.shape(), 0.0);
      input_grads.push_back(&grads_[in.index]);
    }
    if (fault_ && fault_->kind == n.kind) {
      // Compute into scratch so only this node's contribution is scaled.
      std::vector<Tensor> scratch;
      std::vector<Tensor*> scratch_ptrs;
      scratch.reserve(input_grads.size());
      for (Tensor* g : input_grads) {
        if (g) {
          scratch.emplace_back(g->shape(), 0.0);
          scratch_ptrs.push_back(&scratch.back());
        } else {
          scratch_ptrs.push_back(nullptr);
        }
      }
      detail::backward_node(*this, n, grads_[i], scratch_ptrs);
      std::size_t s = 0;
      for (Tensor* g : input_grads) {
        if (!g) continue;
        const Tensor& part = scratch[s++];
        for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] += fault_->scale * part[k];
      }
    } else {
      detail::backward_node(*this, n, grads_[i], input_grads);
    }
  }
}

Tensor Tape::grad(NodeId id) const {
  const Node& n = node(id);
  if (id.index < grads_.size() && !grads_[id.index].empty()) return grads_[id.index];
  return Tensor(n.value.shape(), 0.0);
}

}  // namespace pmseg
