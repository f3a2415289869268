#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace dimino::fft {

// Real transforms follow the numpy convention: forward is unnormalized,
// the inverse carries 1/N. The half axis is the last one.

enum class Direction { kForward, kBackward };

std::size_t total_size(std::span<const std::size_t> shape);
// prod(shape[:-1]) * (shape.back()/2 + 1)
std::size_t half_spectrum_size(std::span<const std::size_t> shape);

template <class Real>
void forward_real(std::span<const std::size_t> shape, const Real* in, std::complex<Real>* out);

// Assumes Hermitian input; `in` is left untouched.
template <class Real>
void inverse_real(std::span<const std::size_t> shape, const std::complex<Real>* in, Real* out);

// Unnormalized complex transform; kBackward uses exp(+i...).
template <class Real>
void transform_complex(std::span<const std::size_t> shape, const std::complex<Real>* in,
                       std::complex<Real>* out, Direction dir);

}  // namespace dimino::fft
