#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "dimino/ops.hpp"
#include "dimino/sample.hpp"

namespace dimino {

enum class MetricKind { kRelL2, kRelL1, kRelH1 };

std::string_view metric_name(MetricKind k);
MetricKind parse_metric(std::string_view s);

// Relative error of pred against target over all channels jointly. Both are
// [C, grid...] flattened; rel-H1 uses spectral derivatives on the periodic
// grid (Nyquist derivative taken as zero) and the combined quotient
// sqrt(|e|^2 + |grad e|^2) / sqrt(|t|^2 + |grad t|^2). An all-zero target
// falls back to the absolute norm of the error.
double rel_metric(MetricKind kind, std::span<const double> pred, std::span<const double> target, const Grid& grid);
double rel_metric(MetricKind kind, const std::vector<Field>& pred, const std::vector<Field>& target, const Grid& grid);

// Sum over channels of the squared spectral gradient norm, sum_x |grad f|^2.
double gradient_energy(std::span<const double> fields, const Grid& grid);

// Relative training loss on the tape: pred is [C, grid...], target is a
// constant of the same shape. kRelL1 is not differentiable at zero error and
// is not offered as a loss (kInvalidArgument).
template <class Real>
ad::Var<Real> rel_loss(MetricKind kind, ad::Var<Real> pred, const ad::Tensor<double>& target, const Grid& grid);

}  // namespace dimino
