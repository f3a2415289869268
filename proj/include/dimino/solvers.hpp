#pragma once

#include <span>
#include <vector>

#include "dimino/sample.hpp"
#include "dimino/units.hpp"

namespace dimino {

struct SolverConfig {
  // kRk4 is classical RK4 in integrating-factor form (diffusion integrated
  // exactly); kEtdrk4 is the exponential time-differencing RK4 scheme with
  // contour-integral coefficients.
  enum class Stepper { kRk4, kEtdrk4 };

  Stepper stepper = Stepper::kRk4;
  int steps = 0;  // 0: derive from cfl / dt_max
  double cfl = 0.5;
  double dt_max = 1e-2;
  double dealias_fraction = 2.0 / 3.0;
  bool subtract_mean = true;    // vorticity: remove the mean of omega0 and f
  bool reaction = true;         // diffusion-reaction: false zeroes R_u, R_v
  bool allow_inviscid = false;  // vorticity: accept nu = 0 (conservation probes)

  void validate() const;
};

SolverConfig default_solver_config(SystemId system);

// u(x, t) = u0(x - beta t) by a phase shift of every Fourier mode.
std::vector<double> solve_advection_analytic(std::span<const double> u0, const Grid& grid,
                                             const Quantity& beta, const Quantity& t);

std::vector<double> solve_burgers_1d(std::span<const double> u0, const Grid& grid,
                                     const Quantity& nu, const Quantity& t,
                                     const SolverConfig& cfg);

struct FieldPair {
  std::vector<double> u;
  std::vector<double> v;
};

// FitzHugh-Nagumo: R_u = u - u^3 - k - v, R_v = u - v.
FieldPair solve_diffreact_2d(std::span<const double> u0, std::span<const double> v0,
                             const Grid& grid, const Quantity& du, const Quantity& dv,
                             const Quantity& k, const Quantity& t, const SolverConfig& cfg);

std::vector<double> solve_ns_vorticity_2d(std::span<const double> omega0, const Grid& grid,
                                          const Quantity& nu, std::span<const double> forcing,
                                          const Quantity& t, const SolverConfig& cfg);

// Runs the reference solver of the sample's system from its inputs to its
// horizon and returns the target fields in registry order.
std::vector<Field> solve_sample(const Sample& sample, const SolverConfig& cfg);

}  // namespace dimino
