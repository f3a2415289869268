#include "dimino/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "dimino/error.hpp"

namespace dimino::fft {

namespace {

// FFTW planning is not thread-safe, execution with the new-array interface
// is. Plans are created once per (kind, shape) under a lock and kept for the
// lifetime of the process. FFTW_ESTIMATE keeps planning deterministic.
constexpr unsigned kFlags = FFTW_ESTIMATE | FFTW_UNALIGNED;

enum class Kind { kR2C, kC2R, kForward, kBackward };

template <class Real>
struct Fftw;

template <>
struct Fftw<double> {
  using Plan = fftw_plan;
  using Cplx = fftw_complex;
  static Plan make(Kind kind, const std::vector<int>& n) {
    const int rank = static_cast<int>(n.size());
    std::size_t total = 1;
    for (int v : n) total *= static_cast<std::size_t>(v);
    std::vector<double> r(total + 2);
    std::vector<std::complex<double>> c(total + 2);
    auto* cp = reinterpret_cast<Cplx*>(c.data());
    std::vector<std::complex<double>> c2(total + 2);
    auto* cp2 = reinterpret_cast<Cplx*>(c2.data());
    switch (kind) {
      case Kind::kR2C: return fftw_plan_dft_r2c(rank, n.data(), r.data(), cp, kFlags);
      case Kind::kC2R: return fftw_plan_dft_c2r(rank, n.data(), cp, r.data(), kFlags);
      case Kind::kForward: return fftw_plan_dft(rank, n.data(), cp, cp2, FFTW_FORWARD, kFlags);
      case Kind::kBackward: return fftw_plan_dft(rank, n.data(), cp, cp2, FFTW_BACKWARD, kFlags);
    }
    return nullptr;
  }
  static void r2c(Plan p, const double* in, std::complex<double>* out) {
    fftw_execute_dft_r2c(p, const_cast<double*>(in), reinterpret_cast<Cplx*>(out));
  }
  static void c2r(Plan p, std::complex<double>* in, double* out) {
    fftw_execute_dft_c2r(p, reinterpret_cast<Cplx*>(in), out);
  }
  static void c2c(Plan p, const std::complex<double>* in, std::complex<double>* out) {
    fftw_execute_dft(p, reinterpret_cast<Cplx*>(const_cast<std::complex<double>*>(in)),
                     reinterpret_cast<Cplx*>(out));
  }
};

template <>
struct Fftw<float> {
  using Plan = fftwf_plan;
  using Cplx = fftwf_complex;
  static Plan make(Kind kind, const std::vector<int>& n) {
    const int rank = static_cast<int>(n.size());
    std::size_t total = 1;
    for (int v : n) total *= static_cast<std::size_t>(v);
    std::vector<float> r(total + 2);
    std::vector<std::complex<float>> c(total + 2);
    auto* cp = reinterpret_cast<Cplx*>(c.data());
    std::vector<std::complex<float>> c2(total + 2);
    auto* cp2 = reinterpret_cast<Cplx*>(c2.data());
    switch (kind) {
      case Kind::kR2C: return fftwf_plan_dft_r2c(rank, n.data(), r.data(), cp, kFlags);
      case Kind::kC2R: return fftwf_plan_dft_c2r(rank, n.data(), cp, r.data(), kFlags);
      case Kind::kForward: return fftwf_plan_dft(rank, n.data(), cp, cp2, FFTW_FORWARD, kFlags);
      case Kind::kBackward: return fftwf_plan_dft(rank, n.data(), cp, cp2, FFTW_BACKWARD, kFlags);
    }
    return nullptr;
  }
  static void r2c(Plan p, const float* in, std::complex<float>* out) {
    fftwf_execute_dft_r2c(p, const_cast<float*>(in), reinterpret_cast<Cplx*>(out));
  }
  static void c2r(Plan p, std::complex<float>* in, float* out) {
    fftwf_execute_dft_c2r(p, reinterpret_cast<Cplx*>(in), out);
  }
  static void c2c(Plan p, const std::complex<float>* in, std::complex<float>* out) {
    fftwf_execute_dft(p, reinterpret_cast<Cplx*>(const_cast<std::complex<float>*>(in)),
                      reinterpret_cast<Cplx*>(out));
  }
};

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <class Real>
typename Fftw<Real>::Plan plan_for(Kind kind, std::span<const std::size_t> shape) {
  using Key = std::tuple<int, std::vector<int>>;
  static std::map<Key, typename Fftw<Real>::Plan> cache;
  std::vector<int> n(shape.begin(), shape.end());
  if (n.empty()) fail(ErrorCode::kShapeMismatch, "fft of an empty shape");
  Key key{static_cast<int>(kind), n};
  std::lock_guard lock(planner_mutex());
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto plan = Fftw<Real>::make(kind, n);
  if (plan == nullptr) fail(ErrorCode::kShapeMismatch, "fftw could not plan transform");
  cache.emplace(key, plan);
  return plan;
}

}  // namespace

std::size_t total_size(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

std::size_t half_spectrum_size(std::span<const std::size_t> shape) {
  return total_size(shape.first(shape.size() - 1)) * (shape.back() / 2 + 1);
}

template <class Real>
void forward_real(std::span<const std::size_t> shape, const Real* in, std::complex<Real>* out) {
  Fftw<Real>::r2c(plan_for<Real>(Kind::kR2C, shape), in, out);
}

template <class Real>
void inverse_real(std::span<const std::size_t> shape, const std::complex<Real>* in, Real* out) {
  // c2r destroys its input.
  std::vector<std::complex<Real>> scratch(in, in + half_spectrum_size(shape));
  Fftw<Real>::c2r(plan_for<Real>(Kind::kC2R, shape), scratch.data(), out);
  const std::size_t n = total_size(shape);
  const Real inv = Real(1) / static_cast<Real>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] *= inv;
}

template <class Real>
void transform_complex(std::span<const std::size_t> shape, const std::complex<Real>* in,
                       std::complex<Real>* out, Direction dir) {
  const Kind kind = dir == Direction::kForward ? Kind::kForward : Kind::kBackward;
  Fftw<Real>::c2c(plan_for<Real>(kind, shape), in, out);
}

template void forward_real<double>(std::span<const std::size_t>, const double*, std::complex<double>*);
template void forward_real<float>(std::span<const std::size_t>, const float*, std::complex<float>*);
template void inverse_real<double>(std::span<const std::size_t>, const std::complex<double>*, double*);
template void inverse_real<float>(std::span<const std::size_t>, const std::complex<float>*, float*);
template void transform_complex<double>(std::span<const std::size_t>, const std::complex<double>*,
                                        std::complex<double>*, Direction);
template void transform_complex<float>(std::span<const std::size_t>, const std::complex<float>*,
                                       std::complex<float>*, Direction);

}  // namespace dimino::fft
