#include "dimino/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>

#include "dimino/dims.hpp"
#include "dimino/error.hpp"
#include "dimino/fft.hpp"

namespace dimino {

namespace {

using cplx = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_dim(const Quantity& q, Dimension expected, const char* what) {
  if (q.dim() != expected) {
    fail(ErrorCode::kDimensionMismatch, std::string(what) + " has dimension " + q.dim().to_string() +
                                            ", expected " + expected.to_string());
  }
}

void check_field(std::span<const double> f, const Grid& grid, int rank, const char* what) {
  grid.validate();
  if (grid.rank() != rank) fail(ErrorCode::kShapeMismatch, std::string(what) + ": wrong grid rank");
  if (f.size() != grid.size()) {
    fail(ErrorCode::kShapeMismatch, std::string(what) + ": field size does not match grid");
  }
}

// Signed wavenumbers (2 pi j / L) of the half spectrum of a rank-1/2 grid.
struct Wavenumbers {
  std::vector<std::size_t> shape;
  std::size_t n_half = 0;
  std::vector<double> kx;  // per half-spectrum entry, axis 0
  std::vector<double> ky;  // per half-spectrum entry, last axis (rank 2)
  std::vector<double> k2;
  std::vector<double> mask;  // dealias mask, 0 or 1
  std::vector<bool> nyquist;

  Wavenumbers(const Grid& grid, double dealias_fraction) : shape(grid.points) {
    n_half = fft::half_spectrum_size(shape);
    kx.resize(n_half);
    ky.assign(n_half, 0.0);
    k2.resize(n_half);
    mask.resize(n_half);
    nyquist.assign(n_half, false);
    auto signed_index = [](std::size_t i, std::size_t n) {
      return i <= n / 2 ? static_cast<double>(i) : static_cast<double>(i) - static_cast<double>(n);
    };
    if (grid.rank() == 1) {
      const std::size_t n = shape[0];
      const double cutoff = dealias_fraction * static_cast<double>(n) / 2.0;
      for (std::size_t i = 0; i < n_half; ++i) {
        const double j = static_cast<double>(i);
        kx[i] = kTwoPi * j / grid.extent[0];
        k2[i] = kx[i] * kx[i];
        mask[i] = j <= cutoff ? 1.0 : 0.0;
        nyquist[i] = i == n / 2;
      }
    } else {
      const std::size_t n0 = shape[0], n1 = shape[1], h1 = n1 / 2 + 1;
      const double c0 = dealias_fraction * static_cast<double>(n0) / 2.0;
      const double c1 = dealias_fraction * static_cast<double>(n1) / 2.0;
      for (std::size_t i0 = 0; i0 < n0; ++i0) {
        const double j0 = signed_index(i0, n0);
        for (std::size_t i1 = 0; i1 < h1; ++i1) {
          const std::size_t idx = i0 * h1 + i1;
          const double j1 = static_cast<double>(i1);
          kx[idx] = kTwoPi * j0 / grid.extent[0];
          ky[idx] = kTwoPi * j1 / grid.extent[1];
          k2[idx] = kx[idx] * kx[idx] + ky[idx] * ky[idx];
          mask[idx] = (std::abs(j0) <= c0 && j1 <= c1) ? 1.0 : 0.0;
          nyquist[idx] = i0 == n0 / 2 || i1 == n1 / 2;
        }
      }
    }
  }
};

// Semi-linear system d/dt s = L s + N(s) with diagonal L, in spectral space.
struct SpectralProblem {
  std::vector<double> linear;
  std::function<void(const std::vector<cplx>&, std::vector<cplx>&)> nonlinear;
};

double phi_mean(double hl, const std::function<cplx(cplx)>& fn) {
  // Contour average around hl (radius 1) avoids cancellation near 0.
  constexpr int kPoints = 32;
  cplx acc = 0.0;
  for (int j = 0; j < kPoints; ++j) {
    const cplx r = std::polar(1.0, std::numbers::pi * (j + 0.5) / kPoints);
    acc += fn(hl + r);
  }
  return (acc / static_cast<double>(kPoints)).real();
}

void check_finite(const std::vector<cplx>& s, int step) {
  double acc = 0.0;
  for (const auto& v : s) acc += std::abs(v.real()) + std::abs(v.imag());
  if (!std::isfinite(acc)) {
    fail(ErrorCode::kStepUnstable, "solver produced non-finite values at step " + std::to_string(step));
  }
}

std::vector<cplx> integrate(const SpectralProblem& prob, std::vector<cplx> s, double horizon,
                            int steps, SolverConfig::Stepper stepper) {
  const std::size_t n = s.size();
  const double h = horizon / steps;
  std::vector<double> e(n), e2(n);
  for (std::size_t i = 0; i < n; ++i) {
    e[i] = std::exp(prob.linear[i] * h);
    e2[i] = std::exp(prob.linear[i] * h / 2.0);
  }
  std::vector<cplx> n1(n), n2(n), n3(n), n4(n), a(n), b(n), c(n);

  if (stepper == SolverConfig::Stepper::kRk4) {
    for (int step = 0; step < steps; ++step) {
      prob.nonlinear(s, n1);
      for (std::size_t i = 0; i < n; ++i) a[i] = e2[i] * (s[i] + 0.5 * h * n1[i]);
      prob.nonlinear(a, n2);
      for (std::size_t i = 0; i < n; ++i) b[i] = e2[i] * s[i] + 0.5 * h * n2[i];
      prob.nonlinear(b, n3);
      for (std::size_t i = 0; i < n; ++i) c[i] = e[i] * s[i] + h * e2[i] * n3[i];
      prob.nonlinear(c, n4);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = e[i] * s[i] +
               h / 6.0 * (e[i] * n1[i] + 2.0 * e2[i] * (n2[i] + n3[i]) + n4[i]);
      }
      check_finite(s, step);
    }
    return s;
  }

  std::vector<double> q(n), f1(n), f2(n), f3(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double hl = prob.linear[i] * h;
    q[i] = h * phi_mean(hl, [](cplx z) { return (std::exp(z / 2.0) - 1.0) / z; });
    f1[i] = h * phi_mean(hl, [](cplx z) {
              return (-4.0 - z + std::exp(z) * (4.0 - 3.0 * z + z * z)) / (z * z * z);
            });
    f2[i] = h * phi_mean(hl, [](cplx z) { return (2.0 + z + std::exp(z) * (z - 2.0)) / (z * z * z); });
    f3[i] = h * phi_mean(hl, [](cplx z) {
              return (-4.0 - 3.0 * z - z * z + std::exp(z) * (4.0 - z)) / (z * z * z);
            });
  }
  for (int step = 0; step < steps; ++step) {
    prob.nonlinear(s, n1);
    for (std::size_t i = 0; i < n; ++i) a[i] = e2[i] * s[i] + q[i] * n1[i];
    prob.nonlinear(a, n2);
    for (std::size_t i = 0; i < n; ++i) b[i] = e2[i] * s[i] + q[i] * n2[i];
    prob.nonlinear(b, n3);
    for (std::size_t i = 0; i < n; ++i) c[i] = e2[i] * a[i] + q[i] * (2.0 * n3[i] - n1[i]);
    prob.nonlinear(c, n4);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = e[i] * s[i] + f1[i] * n1[i] + 2.0 * f2[i] * (n2[i] + n3[i]) + f3[i] * n4[i];
    }
    check_finite(s, step);
  }
  return s;
}

int step_count(const SolverConfig& cfg, double horizon, double dx, double max_speed) {
  if (cfg.steps > 0) return cfg.steps;
  double dt = cfg.dt_max;
  if (max_speed > 0.0) dt = std::min(dt, cfg.cfl * dx / max_speed);
  return std::max(1, static_cast<int>(std::ceil(horizon / dt - 1e-9)));
}

std::vector<cplx> to_spectrum(const Grid& grid, std::span<const double> f) {
  std::vector<cplx> out(fft::half_spectrum_size(grid.points));
  fft::forward_real<double>(grid.points, f.data(), out.data());
  return out;
}

std::vector<double> to_physical(const Grid& grid, const cplx* spectrum) {
  std::vector<double> out(grid.size());
  fft::inverse_real<double>(grid.points, spectrum, out.data());
  return out;
}

double mean_of(std::span<const double> f) {
  double acc = 0.0;
  for (double v : f) acc += v;
  return acc / static_cast<double>(f.size());
}

}  // namespace

void SolverConfig::validate() const {
  if (!(dealias_fraction > 0.0 && dealias_fraction <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "dealias fraction must lie in (0, 1]");
  }
  if (steps < 0) fail(ErrorCode::kInvalidArgument, "step count must be >= 1 (or 0 for automatic)");
  if (!(cfl > 0.0) || !(dt_max > 0.0)) fail(ErrorCode::kInvalidArgument, "cfl and dt_max must be positive");
}

SolverConfig default_solver_config(SystemId system) {
  SolverConfig cfg;
  if (system == SystemId::kDiffReact2d) {
    cfg.stepper = SolverConfig::Stepper::kEtdrk4;
    cfg.dt_max = 2e-2;
  }
  return cfg;
}

std::vector<double> solve_advection_analytic(std::span<const double> u0, const Grid& grid,
                                             const Quantity& beta, const Quantity& t) {
  check_field(u0, grid, 1, "advection");
  const double shift = beta.value() * t.value() / grid.extent[0];
  auto spec = to_spectrum(grid, u0);
  const std::size_t n = grid.points[0];
  for (std::size_t j = 0; j < spec.size(); ++j) {
    const double theta = kTwoPi * static_cast<double>(j) * shift;
    if (j == n / 2) {
      spec[j] *= std::cos(theta);  // Nyquist stays real
    } else {
      spec[j] *= std::polar(1.0, -theta);
    }
  }
  return to_physical(grid, spec.data());
}

std::vector<double> solve_burgers_1d(std::span<const double> u0, const Grid& grid,
                                     const Quantity& nu, const Quantity& t,
                                     const SolverConfig& cfg) {
  cfg.validate();
  check_field(u0, grid, 1, "burgers");
  check_dim(nu, Dimension::of(0, 2, -1), "nu");
  if (!(nu.value() > 0.0)) fail(ErrorCode::kInvalidArgument, "burgers needs nu > 0");
  if (t.value() == 0.0) return {u0.begin(), u0.end()};

  const Wavenumbers wn(grid, cfg.dealias_fraction);
  SpectralProblem prob;
  prob.linear.resize(wn.n_half);
  for (std::size_t i = 0; i < wn.n_half; ++i) prob.linear[i] = -nu.value() * wn.k2[i];
  std::vector<cplx> work(wn.n_half);
  std::vector<double> phys(grid.size());
  prob.nonlinear = [&](const std::vector<cplx>& s, std::vector<cplx>& out) {
    for (std::size_t i = 0; i < wn.n_half; ++i) work[i] = s[i] * wn.mask[i];
    fft::inverse_real<double>(grid.points, work.data(), phys.data());
    for (double& v : phys) v = v * v;
    fft::forward_real<double>(grid.points, phys.data(), out.data());
    for (std::size_t i = 0; i < wn.n_half; ++i) {
      const double k = wn.nyquist[i] ? 0.0 : wn.kx[i];
      out[i] *= cplx(0.0, -0.5 * k) * wn.mask[i];
    }
  };
  double max_speed = 0.0;
  for (double v : u0) max_speed = std::max(max_speed, std::abs(v));
  const int steps = step_count(cfg, t.value(), grid.spacing(0), max_speed);
  auto s = integrate(prob, to_spectrum(grid, u0), t.value(), steps, cfg.stepper);
  return to_physical(grid, s.data());
}

FieldPair solve_diffreact_2d(std::span<const double> u0, std::span<const double> v0,
                             const Grid& grid, const Quantity& du, const Quantity& dv,
                             const Quantity& k, const Quantity& t, const SolverConfig& cfg) {
  cfg.validate();
  check_field(u0, grid, 2, "diffusion-reaction u0");
  check_field(v0, grid, 2, "diffusion-reaction v0");
  if (!(du.value() > 0.0) || !(dv.value() > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "diffusion coefficients must be positive");
  }
  if (t.value() == 0.0) return {{u0.begin(), u0.end()}, {v0.begin(), v0.end()}};

  const Wavenumbers wn(grid, cfg.dealias_fraction);
  const std::size_t nh = wn.n_half;
  SpectralProblem prob;
  prob.linear.resize(2 * nh);
  for (std::size_t i = 0; i < nh; ++i) {
    prob.linear[i] = -du.value() * wn.k2[i];
    prob.linear[nh + i] = -dv.value() * wn.k2[i];
  }
  const double kk = k.value();
  std::vector<cplx> work(nh);
  std::vector<double> u(grid.size()), v(grid.size()), ru(grid.size()), rv(grid.size());
  const bool reaction = cfg.reaction;
  prob.nonlinear = [&, reaction, kk](const std::vector<cplx>& s, std::vector<cplx>& out) {
    if (!reaction) {
      std::fill(out.begin(), out.end(), cplx(0.0));
      return;
    }
    for (std::size_t i = 0; i < nh; ++i) work[i] = s[i] * wn.mask[i];
    fft::inverse_real<double>(grid.points, work.data(), u.data());
    for (std::size_t i = 0; i < nh; ++i) work[i] = s[nh + i] * wn.mask[i];
    fft::inverse_real<double>(grid.points, work.data(), v.data());
    for (std::size_t i = 0; i < u.size(); ++i) {
      ru[i] = u[i] - u[i] * u[i] * u[i] - kk - v[i];
      rv[i] = u[i] - v[i];
    }
    fft::forward_real<double>(grid.points, ru.data(), out.data());
    fft::forward_real<double>(grid.points, rv.data(), out.data() + nh);
    for (std::size_t i = 0; i < nh; ++i) {
      out[i] *= wn.mask[i];
      out[nh + i] *= wn.mask[i];
    }
  };
  std::vector<cplx> s(2 * nh);
  auto su = to_spectrum(grid, u0);
  auto sv = to_spectrum(grid, v0);
  std::copy(su.begin(), su.end(), s.begin());
  std::copy(sv.begin(), sv.end(), s.begin() + static_cast<std::ptrdiff_t>(nh));
  const int steps = step_count(cfg, t.value(), grid.spacing(0), 0.0);
  s = integrate(prob, std::move(s), t.value(), steps, cfg.stepper);
  return {to_physical(grid, s.data()), to_physical(grid, s.data() + nh)};
}

std::vector<double> solve_ns_vorticity_2d(std::span<const double> omega0, const Grid& grid,
                                          const Quantity& nu, std::span<const double> forcing,
                                          const Quantity& t, const SolverConfig& cfg) {
  cfg.validate();
  check_field(omega0, grid, 2, "vorticity omega0");
  check_field(forcing, grid, 2, "vorticity forcing");
  check_dim(nu, Dimension::of(0, 2, -1), "nu");
  if (nu.value() < 0.0 || (nu.value() == 0.0 && !cfg.allow_inviscid)) {
    fail(ErrorCode::kInvalidArgument, "vorticity solver needs nu > 0");
  }

  std::vector<double> w0(omega0.begin(), omega0.end());
  std::vector<double> f(forcing.begin(), forcing.end());
  const double mw = mean_of(w0), mf = mean_of(f);
  if (cfg.subtract_mean) {
    for (double& v : w0) v -= mw;
    for (double& v : f) v -= mf;
  } else {
    double scale = 0.0;
    for (double v : w0) scale = std::max(scale, std::abs(v));
    if (std::abs(mw) > 1e-12 * std::max(scale, 1.0) || std::abs(mf) > 1e-12 * std::max(scale, 1.0)) {
      fail(ErrorCode::kNonZeroMeanInput, "vorticity and forcing must have zero mean");
    }
  }
  if (t.value() == 0.0) return w0;

  const Wavenumbers wn(grid, cfg.dealias_fraction);
  const std::size_t nh = wn.n_half;
  SpectralProblem prob;
  prob.linear.resize(nh);
  for (std::size_t i = 0; i < nh; ++i) prob.linear[i] = -nu.value() * wn.k2[i];
  const auto f_hat = to_spectrum(grid, f);

  std::vector<cplx> work(nh);
  const std::size_t np = grid.size();
  std::vector<double> ux(np), uy(np), wx(np), wy(np);
  prob.nonlinear = [&](const std::vector<cplx>& s, std::vector<cplx>& out) {
    // psi = omega / |k|^2, u = d(psi)/dy, v = -d(psi)/dx
    auto derive = [&](auto&& coeff, std::vector<double>& dst) {
      for (std::size_t i = 0; i < nh; ++i) work[i] = wn.nyquist[i] ? cplx(0.0) : s[i] * wn.mask[i] * coeff(i);
      fft::inverse_real<double>(grid.points, work.data(), dst.data());
    };
    auto inv_k2 = [&](std::size_t i) { return wn.k2[i] > 0.0 ? 1.0 / wn.k2[i] : 0.0; };
    derive([&](std::size_t i) { return cplx(0.0, wn.ky[i] * inv_k2(i)); }, ux);
    derive([&](std::size_t i) { return cplx(0.0, -wn.kx[i] * inv_k2(i)); }, uy);
    derive([&](std::size_t i) { return cplx(0.0, wn.kx[i]); }, wx);
    derive([&](std::size_t i) { return cplx(0.0, wn.ky[i]); }, wy);
    for (std::size_t i = 0; i < np; ++i) ux[i] = ux[i] * wx[i] + uy[i] * wy[i];
    fft::forward_real<double>(grid.points, ux.data(), out.data());
    for (std::size_t i = 0; i < nh; ++i) out[i] = f_hat[i] - out[i] * wn.mask[i];
  };

  // Velocity bound from the initial streamfunction plus forcing impulse.
  double max_speed = 0.0;
  {
    auto s0 = to_spectrum(grid, w0);
    std::vector<cplx> tmp(nh);
    std::vector<double> phys(np);
    for (int comp = 0; comp < 2; ++comp) {
      for (std::size_t i = 0; i < nh; ++i) {
        const double ik = wn.k2[i] > 0.0 ? 1.0 / wn.k2[i] : 0.0;
        tmp[i] = s0[i] * cplx(0.0, (comp == 0 ? wn.ky[i] : -wn.kx[i]) * ik);
      }
      fft::inverse_real<double>(grid.points, tmp.data(), phys.data());
      for (double v : phys) max_speed = std::max(max_speed, std::abs(v));
    }
  }
  const int steps = step_count(cfg, t.value(), std::min(grid.spacing(0), grid.spacing(1)), max_speed);
  auto s = integrate(prob, to_spectrum(grid, w0), t.value(), steps, cfg.stepper);
  return to_physical(grid, s.data());
}

std::vector<Field> solve_sample(const Sample& sample, const SolverConfig& cfg) {
  const auto& info = system_info(sample.system);
  const Quantity horizon(sample.horizon, Dimension::of(0, 0, 1));
  auto target_field = [&](const std::string& name, std::vector<double> values) {
    return Field{name, info.quantity(name).dim, std::move(values)};
  };
  switch (sample.system) {
    case SystemId::kAdvection1d:
      return {target_field("u", solve_advection_analytic(sample.input("u").values, sample.grid,
                                                         sample.constant("beta"), horizon))};
    case SystemId::kBurgers1d:
      return {target_field("u", solve_burgers_1d(sample.input("u").values, sample.grid,
                                                 sample.constant("nu"), horizon, cfg))};
    case SystemId::kDiffReact2d: {
      auto uv = solve_diffreact_2d(sample.input("u").values, sample.input("v").values, sample.grid,
                                   sample.constant("Du"), sample.constant("Dv"),
                                   sample.constant("k"), horizon, cfg);
      return {target_field("u", std::move(uv.u)), target_field("v", std::move(uv.v))};
    }
    case SystemId::kNsVorticity2d:
      return {target_field("omega", solve_ns_vorticity_2d(sample.input("omega").values, sample.grid,
                                                          sample.constant("nu"), sample.input("f").values,
                                                          horizon, cfg))};
  }
  fail(ErrorCode::kUnknownSystemRule, "no solver for system");
}

}  // namespace dimino
