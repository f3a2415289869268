#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "dimino/error.hpp"
#include "dimino/tensor.hpp"

namespace dimino::ad {

// The closed primitive set recorded on a tape.
enum class Primitive {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kScale,
  kLinear,
  kBiasAdd,
  kGelu,
  kLayerNorm,
  kRfft,
  kIrfft,
  kSpectralLinear,
  kGateMul,
  kSum,
  kMean,
  kPow,
  kSqrt,
};

std::string_view primitive_name(Primitive p);

template <class Real>
class Tape;

template <class Real>
struct Var {
  Tape<Real>* tape = nullptr;
  int id = -1;

  const Tensor<Real>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape(); }
};

// Append-only record of primitive applications. Nodes are topologically
// ordered by construction; backward walks them in exact reverse order, so
// gradients are bit-reproducible for an identical tape.
template <class Real>
class Tape {
 public:
  // Accumulates into the gradient slots of the inputs; a slot is null when
  // that input does not need a gradient.
  using BackwardFn = std::function<void(const Tensor<Real>& out_grad, std::span<Tensor<Real>* const> in_grads)>;

  Var<Real> leaf(Tensor<Real> value, bool requires_grad = true);
  Var<Real> constant(Tensor<Real> value) { return leaf(std::move(value), false); }

  Var<Real> record(Primitive op, std::vector<int> inputs, Tensor<Real> value, BackwardFn backward);

  const Tensor<Real>& value(Var<Real> v) const { return node(v).value; }
  bool requires_grad(Var<Real> v) const { return node(v).requires_grad; }
  Primitive op(Var<Real> v) const { return node(v).op; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and propagates. Throws kNonScalarLoss unless
  // the loss is a single real value. Gradient buffers of intermediate nodes
  // and their saved state are released afterwards.
  void backward(Var<Real> loss);

  // Gradient of a leaf after backward(); zeros if the leaf was unreachable.
  Tensor<Real> grad(Var<Real> leaf) const;

 private:
  struct Node {
    Primitive op = Primitive::kLeaf;
    std::vector<int> inputs;
    Tensor<Real> value;
    Tensor<Real> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  const Node& node(Var<Real> v) const {
    if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
      fail(ErrorCode::kInvalidArgument, "variable does not belong to this tape");
    }
    return nodes_[static_cast<std::size_t>(v.id)];
  }

  std::vector<Node> nodes_;
};

extern template class Tape<double>;
extern template class Tape<float>;

}  // namespace dimino::ad
