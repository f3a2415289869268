#pragma once

#include <cstddef>
#include <span>

namespace dimino::kernels {

// Channel mixing over a [C, n] layout, the inner loop of every pointwise
// linear layer. Each kernel exists as a serial reference and an OpenMP
// version; both compute every output entry with the same summation order,
// so their results are bit-identical.

// y[o, s] = sum_i w[o, i] x[i, s]
template <class Real>
void channel_mix_serial(std::span<const Real> w, std::span<const Real> x, std::span<Real> y,
                        std::size_t cout, std::size_t cin, std::size_t n);
template <class Real>
void channel_mix_omp(std::span<const Real> w, std::span<const Real> x, std::span<Real> y,
                     std::size_t cout, std::size_t cin, std::size_t n);

// dx[i, s] += sum_o w[o, i] dy[o, s]
template <class Real>
void channel_mix_transpose_serial(std::span<const Real> w, std::span<const Real> dy, std::span<Real> dx,
                                  std::size_t cout, std::size_t cin, std::size_t n);
template <class Real>
void channel_mix_transpose_omp(std::span<const Real> w, std::span<const Real> dy, std::span<Real> dx,
                               std::size_t cout, std::size_t cin, std::size_t n);

// dw[o, i] += sum_s dy[o, s] x[i, s]
template <class Real>
void channel_mix_weight_grad_serial(std::span<const Real> dy, std::span<const Real> x, std::span<Real> dw,
                                    std::size_t cout, std::size_t cin, std::size_t n);
template <class Real>
void channel_mix_weight_grad_omp(std::span<const Real> dy, std::span<const Real> x, std::span<Real> dw,
                                 std::size_t cout, std::size_t cin, std::size_t n);

// Dispatchers used by the autodiff primitives: the OpenMP kernel runs only
// outside an enclosing parallel region and above a work threshold.
template <class Real>
void channel_mix(std::span<const Real> w, std::span<const Real> x, std::span<Real> y,
                 std::size_t cout, std::size_t cin, std::size_t n);
template <class Real>
void channel_mix_transpose(std::span<const Real> w, std::span<const Real> dy, std::span<Real> dx,
                           std::size_t cout, std::size_t cin, std::size_t n);
template <class Real>
void channel_mix_weight_grad(std::span<const Real> dy, std::span<const Real> x, std::span<Real> dw,
                             std::size_t cout, std::size_t cin, std::size_t n);

int max_threads();
void set_threads(int n);

}  // namespace dimino::kernels
