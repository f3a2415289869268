#include "dimino/tape.hpp"

namespace dimino::ad {

std::string_view primitive_name(Primitive p) {
  switch (p) {
    case Primitive::kLeaf: return "leaf";
    case Primitive::kAdd: return "add";
    case Primitive::kSub: return "sub";
    case Primitive::kMul: return "mul";
    case Primitive::kScale: return "scale";
    case Primitive::kLinear: return "linear";
    case Primitive::kBiasAdd: return "bias_add";
    case Primitive::kGelu: return "gelu";
    case Primitive::kLayerNorm: return "layer_norm";
    case Primitive::kRfft: return "rfft";
    case Primitive::kIrfft: return "irfft";
    case Primitive::kSpectralLinear: return "spectral_linear";
    case Primitive::kGateMul: return "gate_mul";
    case Primitive::kSum: return "sum";
    case Primitive::kMean: return "mean";
    case Primitive::kPow: return "pow";
    case Primitive::kSqrt: return "sqrt";
  }
  return "unknown";
}

template <class Real>
Var<Real> Tape<Real>::leaf(Tensor<Real> value, bool requires_grad) {
  Node n;
  n.op = Primitive::kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

template <class Real>
Var<Real> Tape<Real>::record(Primitive op, std::vector<int> inputs, Tensor<Real> value,
                             BackwardFn backward) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  for (int id : inputs) {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
      fail(ErrorCode::kInvalidArgument, "primitive input is not on this tape");
    }
    n.requires_grad = n.requires_grad || nodes_[static_cast<std::size_t>(id)].requires_grad;
  }
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

template <class Real>
void Tape<Real>::backward(Var<Real> loss) {
  const Node& root = node(loss);
  if (root.value.is_complex() || root.value.numel() != 1) {
    fail(ErrorCode::kNonScalarLoss, "backward needs a scalar loss, got shape " + shape_string(root.value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor<Real>();
  auto& seed = nodes_[static_cast<std::size_t>(loss.id)].grad;
  seed = Tensor<Real>(root.value.shape(), root.value.kind());
  seed.fill(Real(1));

  std::vector<Tensor<Real>*> slots;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    slots.clear();
    for (int id : n.inputs) {
      Node& in = nodes_[static_cast<std::size_t>(id)];
      if (!in.requires_grad) {
        slots.push_back(nullptr);
        continue;
      }
      if (in.grad.empty()) in.grad = Tensor<Real>(in.value.shape(), in.value.kind());
      slots.push_back(&in.grad);
    }
    n.backward(n.grad, slots);
  }
  for (auto& n : nodes_) {
    if (n.op != Primitive::kLeaf) {
      n.grad = Tensor<Real>();
      n.backward = nullptr;
    }
  }
}

template <class Real>
Tensor<Real> Tape<Real>::grad(Var<Real> leaf) const {
  const Node& n = node(leaf);
  if (n.grad.empty()) return Tensor<Real>(n.value.shape(), n.value.kind());
  return n.grad;
}

template class Tape<double>;
template class Tape<float>;

}  // namespace dimino::ad
