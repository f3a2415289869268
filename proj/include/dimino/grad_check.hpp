#pragma once

#include <cstdint>
#include <functional>

#include "dimino/tape.hpp"

namespace dimino::ad {

struct GradCheckOptions {
  std::size_t max_coordinates = 64;  // random subsample; all coordinates when smaller
  std::uint64_t seed = 0;
  // Relative error is |a - b| / max(|a|, |b|, floor). Below the floor the
  // check is effectively absolute: difference quotients of entries that
  // small are dominated by rounding in the loss.
  double floor = 1e-4;
};

// Builds the loss on a fresh tape from the single input leaf.
template <class Real>
using LossBuilder = std::function<Var<Real>(Tape<Real>&, Var<Real>)>;

// Compares the reverse-mode gradient of f at x against a fourth-order
// central difference with the given step. Complex inputs are perturbed in
// their real and imaginary parts separately. Returns the worst relative
// error over the sampled coordinates.
template <class Real>
double grad_check(const LossBuilder<Real>& f, const Tensor<Real>& x, double step,
                  const GradCheckOptions& options = {});

// Same, for a builder over several leaves; coordinates are drawn across all
// of them.
template <class Real>
using MultiLossBuilder = std::function<Var<Real>(Tape<Real>&, std::span<const Var<Real>>)>;

template <class Real>
double grad_check_multi(const MultiLossBuilder<Real>& f, const std::vector<Tensor<Real>>& xs, double step,
                        const GradCheckOptions& options = {});

}  // namespace dimino::ad
