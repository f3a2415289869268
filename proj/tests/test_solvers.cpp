#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>

#include "dimino/dataset_io.hpp"
#include "dimino/fft.hpp"
#include "dimino/solvers.hpp"
#include "support.hpp"

using namespace dimino;
using test::kPi;

namespace {

const Dimension kVel = Dimension::of(0, 1, -1);
const Dimension kDiff = Dimension::of(0, 2, -1);
const Dimension kTime = Dimension::of(0, 0, 1);

Quantity t_of(double v) { return Quantity(v, kTime); }

// u0 = sum_k a_k sin(2 pi k x + phi_k), evaluated at x - s.
double band_limited(double x, double s) {
  const double a[] = {1.0, 0.5, -0.3, 0.2, 0.05};
  const double ph[] = {0.1, 1.3, 2.0, -0.4, 0.9};
  double v = 0.25;
  for (int k = 1; k <= 5; ++k) v += a[k - 1] * std::sin(2 * kPi * k * (x - s) + ph[k - 1]);
  return v;
}

// Sum over the torus of |u|^2 with u = curl of the streamfunction of omega.
double kinetic_energy(const std::vector<double>& omega, std::size_t n) {
  std::vector<std::complex<double>> spec(n * (n / 2 + 1));
  const std::size_t shape[] = {n, n};
  fft::forward_real<double>(shape, omega.data(), spec.data());
  double e = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double kx = static_cast<double>(i <= n / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(n));
    for (std::size_t j = 0; j <= n / 2; ++j) {
      const double ky = static_cast<double>(j);
      const double k2 = 4 * kPi * kPi * (kx * kx + ky * ky);
      if (k2 == 0) continue;
      const double w = (j == 0 || j == n / 2) ? 1.0 : 2.0;
      e += w * std::norm(spec[i * (n / 2 + 1) + j]) / k2;
    }
  }
  return e / static_cast<double>(n * n);
}

double sum_sq(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return s;
}

// Classical RK4 on the uniform-field reduction, with a far smaller step
// than the solver uses.
std::pair<double, double> fhn_ode(double u, double v, double k, double t, int steps) {
  auto f = [k](double a, double b) { return std::pair{a - a * a * a - k - b, a - b}; };
  const double h = t / steps;
  for (int i = 0; i < steps; ++i) {
    const auto [k1u, k1v] = f(u, v);
    const auto [k2u, k2v] = f(u + 0.5 * h * k1u, v + 0.5 * h * k1v);
    const auto [k3u, k3v] = f(u + 0.5 * h * k2u, v + 0.5 * h * k2v);
    const auto [k4u, k4v] = f(u + h * k3u, v + h * k3v);
    u += h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u);
    v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
  return {u, v};
}

}  // namespace

TEST_CASE("advection analytic solution") {
  const Grid g = Grid::line(64);
  const auto u0 = test::grid_function(g, [](double x, double) { return std::sin(2 * kPi * x); });
  const auto half = solve_advection_analytic(u0, g, Quantity(1, kVel), t_of(0.5));
  for (std::size_t i = 0; i < u0.size(); ++i) CHECK(half[i] == doctest::Approx(-u0[i]).epsilon(1e-12).scale(1));
  CHECK(test::max_abs_diff(solve_advection_analytic(u0, g, Quantity(1, kVel), t_of(0)), u0) < 1e-15);

  const auto a = solve_advection_analytic(u0, g, Quantity(2, kVel), t_of(0.25));
  const auto b = solve_advection_analytic(u0, g, Quantity(1, kVel), t_of(0.5));
  CHECK(test::max_abs_diff(a, b) < 1e-14);
}

TEST_CASE("advection spectral shift matches the closed form for band-limited data") {
  const Grid g = Grid::line(128);
  const auto u0 = test::grid_function(g, [](double x, double) { return band_limited(x, 0); });
  for (double bt : {0.013, 0.37, 1.9, 7.25}) {
    const auto u = solve_advection_analytic(u0, g, Quantity(bt, kVel), t_of(1.0));
    const auto exact = test::grid_function(g, [bt](double x, double) { return band_limited(x, bt); });
    CHECK(test::rel_l2(u, exact) < 1e-10);
  }
}

TEST_CASE("burgers") {
  const Grid g = Grid::line(128);
  const auto cfg = default_solver_config(SystemId::kBurgers1d);
  SUBCASE("zero stays zero") {
    const std::vector<double> zero(g.size(), 0.0);
    CHECK(solve_burgers_1d(zero, g, Quantity(0.01, kDiff), t_of(1), cfg) == zero);
  }
  SUBCASE("small amplitude decays like the heat equation") {
    const auto u0 = test::grid_function(g, [](double x, double) { return 0.01 * std::sin(2 * kPi * x); });
    const auto u = solve_burgers_1d(u0, g, Quantity(1, kDiff), t_of(0.01), cfg);
    const double expect = 0.01 * std::exp(-4 * kPi * kPi * 0.01);
    double amp = 0;
    for (double v : u) amp = std::max(amp, std::abs(v));
    CHECK(std::abs(amp - expect) < 0.01 * expect);
  }
  SUBCASE("self-convergence under step halving and mean conservation") {
    const auto u0 = test::grid_function(g, [](double x, double) { return std::sin(2 * kPi * x) + 0.3; });
    auto c1 = cfg;
    c1.steps = 500;
    auto c2 = cfg;
    c2.steps = 1000;
    const auto a = solve_burgers_1d(u0, g, Quantity(0.01, kDiff), t_of(0.5), c1);
    const auto b = solve_burgers_1d(u0, g, Quantity(0.01, kDiff), t_of(0.5), c2);
    CHECK(test::rel_l2(a, b) < 1e-6);
    double m0 = 0, m1 = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      m0 += u0[i];
      m1 += b[i];
    }
    CHECK(std::abs(m1 - m0) / static_cast<double>(g.size()) < 1e-10);
  }
  SUBCASE("blow-up is reported") {
    auto bad = cfg;
    bad.steps = 1;
    const auto u0 = test::grid_function(g, [](double x, double) { return 1e200 * std::sin(2 * kPi * x); });
    try {
      solve_burgers_1d(u0, g, Quantity(1e-3, kDiff), t_of(1), bad);
      FAIL("expected StepUnstable");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kStepUnstable);
      CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
  }
}

TEST_CASE("diffusion-reaction") {
  const Grid g = Grid::square(32);
  const auto cfg = default_solver_config(SystemId::kDiffReact2d);
  const Quantity du(0.1, kDiff), dv(0.05, kDiff);
  SUBCASE("zero fixed point") {
    const std::vector<double> zero(g.size(), 0.0);
    const auto r = solve_diffreact_2d(zero, zero, g, du, dv, Quantity(0, kVel), t_of(1), cfg);
    CHECK(r.u == zero);
    CHECK(r.v == zero);
  }
  SUBCASE("uniform fields follow the ODE") {
    for (auto [a, b, k] : {std::tuple{0.5, -0.2, 0.01}, std::tuple{-0.8, 0.3, 0.005}, std::tuple{1.2, 0.9, 0.0}}) {
      const std::vector<double> u0(g.size(), a), v0(g.size(), b);
      const auto r = solve_diffreact_2d(u0, v0, g, du, dv, Quantity(k, kVel), t_of(1), cfg);
      const auto [ue, ve] = fhn_ode(a, b, k, 1.0, 200000);
      CHECK(std::abs(r.u[17] - ue) < 1e-6 * std::max(1.0, std::abs(ue)));
      CHECK(std::abs(r.v[301] - ve) < 1e-6 * std::max(1.0, std::abs(ve)));
    }
  }
  SUBCASE("pure diffusion eigenfunction") {
    auto c = cfg;
    c.reaction = false;
    const auto u0 =
        test::grid_function(g, [](double x, double y) { return std::sin(2 * kPi * x) * std::sin(2 * kPi * y); });
    const auto r = solve_diffreact_2d(u0, u0, g, du, dv, Quantity(0, kVel), t_of(1), c);
    auto expect = u0;
    for (double& v : expect) v *= std::exp(-8 * kPi * kPi * 0.1);
    CHECK(test::rel_l2(r.u, expect) < 1e-6);
  }
}

TEST_CASE("vorticity") {
  const auto cfg = default_solver_config(SystemId::kNsVorticity2d);
  SUBCASE("Taylor-Green decay") {
    const Grid g = Grid::square(64);
    const auto w0 =
        test::grid_function(g, [](double x, double y) { return 2 * std::cos(2 * kPi * x) * std::cos(2 * kPi * y); });
    const std::vector<double> f(g.size(), 0.0);
    const auto w = solve_ns_vorticity_2d(w0, g, Quantity(0.01, kDiff), f, t_of(1), cfg);
    auto expect = w0;
    for (double& v : expect) v *= std::exp(-8 * kPi * kPi * 0.01);
    CHECK(test::rel_l2(w, expect) < 1e-6);
  }
  SUBCASE("inviscid conservation") {
    const Grid g = Grid::square(32);
    auto c = cfg;
    c.allow_inviscid = true;
    // Band-limited well inside the 2/3 rule so truncation does not touch the invariants.
    auto w0 = random_fourier_field(g, 3, 2.0, 9);
    const std::vector<double> f(g.size(), 0.0);
    const auto w = solve_ns_vorticity_2d(w0, g, Quantity(0, kDiff), f, t_of(1), c);
    const double e0 = kinetic_energy(w0, 32), e1 = kinetic_energy(w, 32);
    const double z0 = sum_sq(w0), z1 = sum_sq(w);
    CHECK(std::abs(e1 - e0) / e0 < 1e-6);
    CHECK(std::abs(z1 - z0) / z0 < 1e-6);
    CHECK(test::rel_l2(w, w0) > 1e-3);  // it actually evolved
  }
  SUBCASE("similar transform consistency, p = 2") {
    const Grid g = Grid::square(32);
    const auto w0 = random_fourier_field(g, 4, 2.5, 1);
    auto f = random_fourier_field(g, 4, 2.5, 2);
    const auto a = solve_ns_vorticity_2d(w0, g, Quantity(0.005, kDiff), f, t_of(1), cfg);
    auto w0p = w0, fp = f;
    for (double& v : w0p) v /= 2;
    for (double& v : fp) v /= 4;
    auto b = solve_ns_vorticity_2d(w0p, g, Quantity(0.0025, kDiff), fp, t_of(2), cfg);
    for (double& v : b) v *= 2;
    CHECK(test::rel_l2(b, a) < 1e-5);
  }
  SUBCASE("mean handling") {
    const Grid g = Grid::square(16);
    std::vector<double> w0(g.size(), 1.0);
    const std::vector<double> f(g.size(), 0.0);
    auto strict = cfg;
    strict.subtract_mean = false;
    try {
      solve_ns_vorticity_2d(w0, g, Quantity(0.01, kDiff), f, t_of(0.1), strict);
      FAIL("expected NonZeroMeanInput");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNonZeroMeanInput);
    }
    const auto w = solve_ns_vorticity_2d(w0, g, Quantity(0.01, kDiff), f, t_of(0.1), cfg);
    double m = 0;
    for (double v : w) m += v;
    CHECK(std::abs(m) < 1e-10);
  }
}

TEST_CASE("solver configuration checks") {
  SolverConfig c;
  c.dealias_fraction = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = SolverConfig{};
  c.steps = -1;
  CHECK_THROWS_AS(c.validate(), Error);
  const Grid g = Grid::line(16);
  const std::vector<double> u0(16, 0.0);
  CHECK_THROWS_AS(solve_burgers_1d(u0, g, Quantity(0.0, kDiff), t_of(1), SolverConfig{}), Error);
  CHECK_THROWS_AS(solve_burgers_1d(u0, g, Quantity(0.1, kVel), t_of(1), SolverConfig{}), Error);
  CHECK_THROWS_AS(Grid::line(12), Error);
}

TEST_CASE("dataset generation") {
  auto cfg = default_generator_config(SystemId::kAdvection1d);
  cfg.grid = Grid::line(64);
  cfg.horizon = 1.0;
  SUBCASE("targets come from the analytic solution") {
    const auto ds = generate_dataset(cfg, 16, 4, 7);
    for (const auto& s : ds.split("train")) {
      const auto beta = s.constant("beta");
      CHECK(beta.value() >= 0.2);
      CHECK(beta.value() <= 2.0);
      const auto expect = solve_advection_analytic(s.input("u").values, s.grid, beta, t_of(s.horizon));
      CHECK(s.target("u").values == expect);
    }
    CHECK_THROWS_AS(ds.split("valid"), Error);
  }
  SUBCASE("parallel and serial generation agree") {
    auto ns = default_generator_config(SystemId::kBurgers1d);
    ns.grid = Grid::line(64);
    ns.horizon = 0.5;
    const auto a = generate_samples(ns, 6, 3, "train");
    const auto b = generate_samples_serial(ns, 6, 3, "train");
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].targets[0].values == b[i].targets[0].values);
  }
}

TEST_CASE("dataset files") {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "dimino_test_solvers";
  fs::remove_all(root);
  auto cfg = default_generator_config(SystemId::kNsVorticity2d);
  cfg.grid = Grid::square(16);
  cfg.horizon = 0.2;
  const auto ds = generate_dataset(cfg, 24, 2, 5);

  write_dataset(root / "a", ds);
  write_dataset(root / "b", generate_dataset(cfg, 24, 2, 5));
  for (const char* f : {"manifest.json", "train.bin", "test.bin"}) {
    std::ifstream x(root / "a" / f, std::ios::binary), y(root / "b" / f, std::ios::binary);
    const std::string sx((std::istreambuf_iterator<char>(x)), {}), sy((std::istreambuf_iterator<char>(y)), {});
    CHECK_MESSAGE(sx == sy, f);
  }

  std::ifstream blob(root / "a" / "train.bin", std::ios::binary);
  char magic[8];
  blob.read(magic, 8);
  CHECK(std::string(magic, 8) == "DIMINO01");
  std::uint32_t count = 0, rank = 0;
  blob.read(reinterpret_cast<char*>(&count), 4);
  blob.read(reinterpret_cast<char*>(&rank), 4);
  CHECK(count == 24);
  CHECK(rank == 2);

  const auto back = read_dataset(root / "a");
  REQUIRE(back.split("train").size() == 24);
  const auto& s0 = ds.split("train")[3];
  const auto& r0 = back.split("train")[3];
  CHECK(r0.input("omega").values == s0.input("omega").values);
  CHECK(r0.target("omega").values == s0.target("omega").values);
  CHECK(r0.constant("nu").value() == s0.constant("nu").value());
  CHECK(r0.horizon == s0.horizon);
  CHECK(r0.grid == s0.grid);

  write_dataset(root / "f32", ds, 4);
  const auto narrow = read_dataset(root / "f32");
  const auto& n0 = narrow.split("train")[3];
  CHECK(test::rel_l2(n0.target("omega").values, s0.target("omega").values) < 1e-6);
  CHECK(fs::file_size(root / "f32" / "train.bin") < fs::file_size(root / "a" / "train.bin"));

  // Re spans about two decades for nu log-uniform over two decades.
  const auto audit = audit_dimensionless(ds.split("train"));
  REQUIRE(audit.numbers.count("Re") == 1);
  CHECK(audit.numbers.at("Re").decades > 1.3);
  CHECK(audit.numbers.at("Re").decades < 3.0);
  fs::remove_all(root);
}
