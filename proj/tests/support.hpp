#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "dimino/dataset.hpp"
#include "dimino/dims.hpp"
#include "dimino/error.hpp"
#include "dimino/hash.hpp"

namespace dimino::test {

// Random smooth inputs, log-uniform constants and random targets; no solver.
inline Sample random_sample(SystemId system, std::size_t n, std::uint64_t seed, double horizon = 1.0) {
  const auto& info = system_info(system);
  Sample s;
  s.system = system;
  s.grid = info.rank == 1 ? Grid::line(n) : Grid::square(n);
  s.horizon = horizon;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> logu(std::log(1e-3), std::log(1.0));
  std::uniform_real_distribution<double> amp(0.1, 5.0);
  std::uint64_t k = 0;
  for (const auto& name : info.input_fields) {
    auto v = random_fourier_field(s.grid, 4, 2.0, splitmix64(seed + ++k));
    const double a = amp(rng);
    for (double& x : v) x *= a;
    s.inputs.push_back({name, info.quantity(name).dim, std::move(v)});
  }
  for (const auto& name : info.constants) {
    s.constants.push_back({name, Quantity(std::exp(logu(rng)), info.quantity(name).dim)});
  }
  for (const auto& name : info.targets) {
    s.targets.push_back({name, info.quantity(name).dim, random_fourier_field(s.grid, 4, 2.0, splitmix64(seed + ++k))});
  }
  return s;
}

inline double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline std::vector<double> grid_function(const Grid& g, auto f) {
  std::vector<double> out(g.size());
  if (g.rank() == 1) {
    for (std::size_t i = 0; i < g.points[0]; ++i) out[i] = f(g.spacing(0) * static_cast<double>(i), 0.0);
  } else {
    for (std::size_t i = 0; i < g.points[0]; ++i) {
      for (std::size_t j = 0; j < g.points[1]; ++j) {
        out[i * g.points[1] + j] = f(g.spacing(0) * static_cast<double>(i), g.spacing(1) * static_cast<double>(j));
      }
    }
  }
  return out;
}

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace dimino::test
