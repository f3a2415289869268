#pragma once

#include <span>
#include <vector>

#include "dimino/tape.hpp"

namespace dimino::ad {

// Channel-first layout throughout: a field tensor is [C, spatial...].

template <class Real> Var<Real> add(Var<Real> a, Var<Real> b);
template <class Real> Var<Real> sub(Var<Real> a, Var<Real> b);
template <class Real> Var<Real> mul(Var<Real> a, Var<Real> b);
template <class Real> Var<Real> scale(Var<Real> x, Real factor);

// y[o, s] = sum_i w[o, i] x[i, s]; w is [Cout, Cin].
template <class Real> Var<Real> linear(Var<Real> x, Var<Real> w);
// y[c, s] = x[c, s] + b[c]
template <class Real> Var<Real> bias_add(Var<Real> x, Var<Real> b);
// Exact (erf) GELU.
template <class Real> Var<Real> gelu(Var<Real> x);
// Per channel over all trailing axes, biased variance, no affine part.
template <class Real> Var<Real> layer_norm(Var<Real> x, Real epsilon = Real(1e-5));

// Real FFT over the trailing (spatial) axes: [C, n0, n1] -> complex
// [C, n0, n1/2+1]. Unnormalized.
template <class Real> Var<Real> rfft(Var<Real> x);
// Inverse of rfft with 1/N. Half-axis entries other than DC/Nyquist count
// twice and only real parts of DC/Nyquist contribute, so the map is defined
// (and differentiable) for any complex input.
template <class Real> Var<Real> irfft(Var<Real> x, const Shape& spatial_shape);

// Mode-truncated complex channel mixing. x: complex [Cin, half spectrum],
// w: complex [Cin, Cout, modes...] where a 2D weight holds 2*modes[0] rows
// (non-negative then negative frequencies of axis 0). Modes outside the
// retained block are zero in the output. Throws kModeOverflow when a leading
// axis is shorter than twice its mode count or the last axis keeps more than
// n/2+1 entries.
template <class Real> Var<Real> spectral_linear(Var<Real> x, Var<Real> w, const Shape& spatial_shape,
                                                const std::vector<std::size_t>& modes);

// y[c, s] = x[c, s] * (layout[c] < 0 ? 1 : g[layout[c]])
template <class Real> Var<Real> gate_mul(Var<Real> x, Var<Real> g, const std::vector<int>& layout);

template <class Real> Var<Real> sum(Var<Real> x);
template <class Real> Var<Real> mean(Var<Real> x);
template <class Real> Var<Real> pow(Var<Real> x, Real exponent);
template <class Real> Var<Real> sqrt(Var<Real> x);

template <class Real>
struct PrimitiveAttrs {
  Real scalar = Real(1);  // kScale factor / kPow exponent
  Real epsilon = Real(1e-5);
  Shape spatial_shape;
  std::vector<std::size_t> modes;
  std::vector<int> layout;
};

// Uniform entry point over the primitive set. Throws kUnsupportedPrimitive
// for kLeaf or an out-of-range value and kShapeMismatch for a wrong arity.
template <class Real>
Var<Real> forward_eval(Primitive op, std::span<const Var<Real>> inputs,
                       const PrimitiveAttrs<Real>& attrs = {});

}  // namespace dimino::ad
