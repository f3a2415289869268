#include "dimino/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dimino::ad {

template <class Real>
double grad_check_multi(const MultiLossBuilder<Real>& f, const std::vector<Tensor<Real>>& xs, double step,
                        const GradCheckOptions& options) {
  if (!(step >= 1e-7 && step <= 1e-3)) fail(ErrorCode::kInvalidArgument, "grad_check step must lie in [1e-7, 1e-3]");

  std::vector<Tensor<Real>> grads;
  {
    Tape<Real> tape;
    std::vector<Var<Real>> leaves;
    for (const auto& x : xs) leaves.push_back(tape.leaf(x));
    auto loss = f(tape, leaves);
    tape.backward(loss);
    for (auto v : leaves) grads.push_back(tape.grad(v));
  }

  auto evaluate = [&](const std::vector<Tensor<Real>>& inputs) {
    Tape<Real> tape;
    std::vector<Var<Real>> leaves;
    for (const auto& x : inputs) leaves.push_back(tape.leaf(x, false));
    return static_cast<double>(f(tape, leaves).value().item());
  };

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    for (std::size_t i = 0; i < xs[t].data().size(); ++i) coords.emplace_back(t, i);
  }
  if (coords.size() > options.max_coordinates) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  double worst = 0;
  std::vector<Tensor<Real>> probe = xs;
  for (const auto& [t, i] : coords) {
    const Real base = xs[t][i];
    auto at = [&](double offset) {
      probe[t][i] = static_cast<Real>(static_cast<double>(base) + offset);
      const double v = evaluate(probe);
      probe[t][i] = base;
      return v;
    };
    const double h = step;
    const double numeric = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
    const double analytic = static_cast<double>(grads[t][i]);
    const double denom = std::max({std::abs(numeric), std::abs(analytic), options.floor});
    worst = std::max(worst, std::abs(numeric - analytic) / denom);
  }
  return worst;
}

template <class Real>
double grad_check(const LossBuilder<Real>& f, const Tensor<Real>& x, double step, const GradCheckOptions& options) {
  MultiLossBuilder<Real> wrapped = [&f](Tape<Real>& tape, std::span<const Var<Real>> leaves) {
    return f(tape, leaves[0]);
  };
  return grad_check_multi<Real>(wrapped, std::vector<Tensor<Real>>{x}, step, options);
}

template double grad_check<double>(const LossBuilder<double>&, const Tensor<double>&, double,
                                   const GradCheckOptions&);
template double grad_check<float>(const LossBuilder<float>&, const Tensor<float>&, double, const GradCheckOptions&);
template double grad_check_multi<double>(const MultiLossBuilder<double>&, const std::vector<Tensor<double>>&, double,
                                         const GradCheckOptions&);
template double grad_check_multi<float>(const MultiLossBuilder<float>&, const std::vector<Tensor<float>>&, double,
                                        const GradCheckOptions&);

}  // namespace dimino::ad
