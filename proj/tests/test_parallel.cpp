#include <doctest.h>

#include <random>
#include <vector>

#include "dimino/parallel.hpp"

using namespace dimino;

namespace {

template <class Real>
std::vector<Real> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<Real> v(n);
  for (auto& x : v) x = static_cast<Real>(d(rng));
  return v;
}

// Straightforward triple loop, the oracle for the serial kernel.
std::vector<double> naive_mix(const std::vector<double>& w, const std::vector<double>& x, std::size_t cout,
                              std::size_t cin, std::size_t n) {
  std::vector<double> y(cout * n, 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t s = 0; s < n; ++s) {
      double acc = 0;
      for (std::size_t i = 0; i < cin; ++i) acc += w[o * cin + i] * x[i * n + s];
      y[o * n + s] = acc;
    }
  }
  return y;
}

template <class Real>
void check_kernels(std::size_t cout, std::size_t cin, std::size_t n, std::uint64_t seed) {
  const auto w = random_vec<Real>(cout * cin, seed);
  const auto x = random_vec<Real>(cin * n, seed + 1);
  const auto dy = random_vec<Real>(cout * n, seed + 2);

  std::vector<Real> ys(cout * n), yp(cout * n);
  kernels::channel_mix_serial<Real>(w, x, ys, cout, cin, n);
  kernels::channel_mix_omp<Real>(w, x, yp, cout, cin, n);
  CHECK(ys == yp);

  auto dxs = random_vec<Real>(cin * n, seed + 3);
  auto dxp = dxs;
  kernels::channel_mix_transpose_serial<Real>(w, dy, dxs, cout, cin, n);
  kernels::channel_mix_transpose_omp<Real>(w, dy, dxp, cout, cin, n);
  CHECK(dxs == dxp);

  std::vector<Real> dws(cout * cin, Real(0.5)), dwp(cout * cin, Real(0.5));
  kernels::channel_mix_weight_grad_serial<Real>(dy, x, dws, cout, cin, n);
  kernels::channel_mix_weight_grad_omp<Real>(dy, x, dwp, cout, cin, n);
  CHECK(dws == dwp);
}

}  // namespace

TEST_CASE("serial kernel matches the naive loop") {
  const std::size_t cout = 5, cin = 7, n = 33;
  const auto w = random_vec<double>(cout * cin, 1);
  const auto x = random_vec<double>(cin * n, 2);
  std::vector<double> y(cout * n);
  kernels::channel_mix_serial<double>(w, x, y, cout, cin, n);
  const auto ref = naive_mix(w, x, cout, cin, n);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-14));
}

TEST_CASE("OpenMP kernels are bit-identical to the serial reference") {
  for (int threads : {1, 2, 4}) {
    kernels::set_threads(threads);
    check_kernels<double>(32, 32, 4096, 10);
    check_kernels<double>(3, 1, 17, 11);
    check_kernels<float>(32, 16, 1000, 12);
    check_kernels<double>(1, 32, 4096, 13);
  }
  kernels::set_threads(0);
}

TEST_CASE("dispatcher agrees with both kernels") {
  const std::size_t cout = 16, cin = 16, n = 2048;
  const auto w = random_vec<double>(cout * cin, 3);
  const auto x = random_vec<double>(cin * n, 4);
  std::vector<double> a(cout * n), b(cout * n);
  kernels::channel_mix<double>(w, x, a, cout, cin, n);
  kernels::channel_mix_serial<double>(w, x, b, cout, cin, n);
  CHECK(a == b);
}
