#include "dimino/parallel.hpp"

#include <omp.h>

namespace dimino::kernels {

namespace {

constexpr std::size_t kParallelWork = 1 << 16;

bool use_parallel(std::size_t work) { return work >= kParallelWork && !omp_in_parallel() && omp_get_max_threads() > 1; }

}  // namespace

template <class Real>
void channel_mix_serial(std::span<const Real> w, std::span<const Real> x, std::span<Real> y,
                        std::size_t cout, std::size_t cin, std::size_t n) {
  for (std::size_t o = 0; o < cout; ++o) {
    Real* yo = y.data() + o * n;
    for (std::size_t s = 0; s < n; ++s) yo[s] = Real(0);
    for (std::size_t i = 0; i < cin; ++i) {
      const Real wi = w[o * cin + i];
      const Real* xi = x.data() + i * n;
      for (std::size_t s = 0; s < n; ++s) yo[s] += wi * xi[s];
    }
  }
}

template <class Real>
void channel_mix_omp(std::span<const Real> w, std::span<const Real> x, std::span<Real> y,
                     std::size_t cout, std::size_t cin, std::size_t n) {
  const auto rows = static_cast<long long>(cout);
#pragma omp parallel for schedule(static)
  for (long long o = 0; o < rows; ++o) {
    Real* yo = y.data() + static_cast<std::size_t>(o) * n;
    for (std::size_t s = 0; s < n; ++s) yo[s] = Real(0);
    for (std::size_t i = 0; i < cin; ++i) {
      const Real wi = w[static_cast<std::size_t>(o) * cin + i];
      const Real* xi = x.data() + i * n;
      for (std::size_t s = 0; s < n; ++s) yo[s] += wi * xi[s];
    }
  }
}

template <class Real>
void channel_mix_transpose_serial(std::span<const Real> w, std::span<const Real> dy, std::span<Real> dx,
                                  std::size_t cout, std::size_t cin, std::size_t n) {
  for (std::size_t i = 0; i < cin; ++i) {
    Real* dxi = dx.data() + i * n;
    for (std::size_t o = 0; o < cout; ++o) {
      const Real woi = w[o * cin + i];
      const Real* dyo = dy.data() + o * n;
      for (std::size_t s = 0; s < n; ++s) dxi[s] += woi * dyo[s];
    }
  }
}

template <class Real>
void channel_mix_transpose_omp(std::span<const Real> w, std::span<const Real> dy, std::span<Real> dx,
                               std::size_t cout, std::size_t cin, std::size_t n) {
  const auto cols = static_cast<long long>(cin);
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < cols; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    Real* dxi = dx.data() + i * n;
    for (std::size_t o = 0; o < cout; ++o) {
      const Real woi = w[o * cin + i];
      const Real* dyo = dy.data() + o * n;
      for (std::size_t s = 0; s < n; ++s) dxi[s] += woi * dyo[s];
    }
  }
}

template <class Real>
void channel_mix_weight_grad_serial(std::span<const Real> dy, std::span<const Real> x, std::span<Real> dw,
                                    std::size_t cout, std::size_t cin, std::size_t n) {
  for (std::size_t o = 0; o < cout; ++o) {
    const Real* dyo = dy.data() + o * n;
    for (std::size_t i = 0; i < cin; ++i) {
      const Real* xi = x.data() + i * n;
      Real acc = Real(0);
      for (std::size_t s = 0; s < n; ++s) acc += dyo[s] * xi[s];
      dw[o * cin + i] += acc;
    }
  }
}

template <class Real>
void channel_mix_weight_grad_omp(std::span<const Real> dy, std::span<const Real> x, std::span<Real> dw,
                                 std::size_t cout, std::size_t cin, std::size_t n) {
  const auto total = static_cast<long long>(cout * cin);
#pragma omp parallel for schedule(static)
  for (long long k = 0; k < total; ++k) {
    const auto o = static_cast<std::size_t>(k) / cin;
    const auto i = static_cast<std::size_t>(k) % cin;
    const Real* dyo = dy.data() + o * n;
    const Real* xi = x.data() + i * n;
    Real acc = Real(0);
    for (std::size_t s = 0; s < n; ++s) acc += dyo[s] * xi[s];
    dw[o * cin + i] += acc;
  }
}

template <class Real>
void channel_mix(std::span<const Real> w, std::span<const Real> x, std::span<Real> y,
                 std::size_t cout, std::size_t cin, std::size_t n) {
  if (use_parallel(cout * cin * n)) {
    channel_mix_omp(w, x, y, cout, cin, n);
  } else {
    channel_mix_serial(w, x, y, cout, cin, n);
  }
}

template <class Real>
void channel_mix_transpose(std::span<const Real> w, std::span<const Real> dy, std::span<Real> dx,
                           std::size_t cout, std::size_t cin, std::size_t n) {
  if (use_parallel(cout * cin * n)) {
    channel_mix_transpose_omp(w, dy, dx, cout, cin, n);
  } else {
    channel_mix_transpose_serial(w, dy, dx, cout, cin, n);
  }
}

template <class Real>
void channel_mix_weight_grad(std::span<const Real> dy, std::span<const Real> x, std::span<Real> dw,
                             std::size_t cout, std::size_t cin, std::size_t n) {
  if (use_parallel(cout * cin * n)) {
    channel_mix_weight_grad_omp(dy, x, dw, cout, cin, n);
  } else {
    channel_mix_weight_grad_serial(dy, x, dw, cout, cin, n);
  }
}

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

#define DIMINO_KERNELS(R)                                                                                    \
  template void channel_mix_serial<R>(std::span<const R>, std::span<const R>, std::span<R>, std::size_t,      \
                                      std::size_t, std::size_t);                                             \
  template void channel_mix_omp<R>(std::span<const R>, std::span<const R>, std::span<R>, std::size_t,         \
                                   std::size_t, std::size_t);                                                \
  template void channel_mix<R>(std::span<const R>, std::span<const R>, std::span<R>, std::size_t,             \
                               std::size_t, std::size_t);                                                    \
  template void channel_mix_transpose_serial<R>(std::span<const R>, std::span<const R>, std::span<R>,         \
                                                std::size_t, std::size_t, std::size_t);                      \
  template void channel_mix_transpose_omp<R>(std::span<const R>, std::span<const R>, std::span<R>,            \
                                             std::size_t, std::size_t, std::size_t);                         \
  template void channel_mix_transpose<R>(std::span<const R>, std::span<const R>, std::span<R>, std::size_t,   \
                                         std::size_t, std::size_t);                                          \
  template void channel_mix_weight_grad_serial<R>(std::span<const R>, std::span<const R>, std::span<R>,       \
                                                  std::size_t, std::size_t, std::size_t);                    \
  template void channel_mix_weight_grad_omp<R>(std::span<const R>, std::span<const R>, std::span<R>,          \
                                               std::size_t, std::size_t, std::size_t);                       \
  template void channel_mix_weight_grad<R>(std::span<const R>, std::span<const R>, std::span<R>, std::size_t, \
                                           std::size_t, std::size_t);

DIMINO_KERNELS(double)
DIMINO_KERNELS(float)

#undef DIMINO_KERNELS

}  // namespace dimino::kernels
