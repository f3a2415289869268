// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Exit status is non-zero when any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "dimino/grad_suite.hpp"
#include "dimino/solvers.hpp"
#include "dimino/sti.hpp"
#include "dimino/training.hpp"
#include "support.hpp"

using namespace dimino;
using test::kPi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const Dimension kVel = Dimension::of(0, 1, -1);
const Dimension kDiff = Dimension::of(0, 2, -1);
const Dimension kTime = Dimension::of(0, 0, 1);

std::vector<Sample> generate(SystemId system, std::size_t grid, std::size_t n, std::uint64_t seed,
                             std::string_view split) {
  auto cfg = default_generator_config(system);
  cfg.grid = system_info(system).rank == 1 ? Grid::line(grid) : Grid::square(grid);
  return generate_samples(cfg, n, seed, split);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome sti_exactness() {
  const auto train_set = generate(SystemId::kNsVorticity2d, 32, 48, 101, "train");
  const auto test_set = generate(SystemId::kNsVorticity2d, 32, 32, 101, "test");
  auto cfg = default_model_config(SystemId::kNsVorticity2d);
  cfg.post_order = PostOrder::kScaleLast;
  cfg.width = 16;
  cfg.modes = {8, 8};
  cfg.seed = 7;
  TrainConfig tc;
  tc.epochs = 10;
  tc.batch_size = 8;
  tc.seed = 7;
  const Model random_model(cfg);
  const Model trained = train(Model(cfg), train_set, tc).best;

  double latent64 = 0, latent32 = 0, output = 0, spread = 0;
  for (const Model* m : {&random_model, &trained}) {
    for (auto precision : {Precision::kF64, Precision::kF32}) {
      StiOptions opt;
      opt.precision = precision;
      const auto report = sti_check(*m, test_set, opt);
      const double base = report.entries.front().model_rel_l2;
      for (const auto& e : report.entries) {
        if (precision == Precision::kF64) {
          latent64 = std::max(latent64, e.latent_residual);
          output = std::max(output, e.output_residual.value_or(1.0));
          spread = std::max(spread, std::abs(e.model_rel_l2 - base));
        } else {
          latent32 = std::max(latent32, e.latent_residual);
        }
      }
    }
  }
  const bool pass = latent64 < 1e-12 && latent32 < 1e-6 && output < 1e-10 && spread < 1e-4;
  return {pass, fmt::format("latent f64 {:.2e} (<1e-12), latent f32 {:.2e} (<1e-6), output {:.2e} (<1e-10), "
                            "rel-L2 spread {:.2e} (<1e-4)",
                            latent64, latent32, output, spread)};
}

Outcome baseline_degradation() {
  // A coarse grid keeps the baseline accurate at p = 1 within the budget.
  const auto train_set = generate(SystemId::kNsVorticity2d, 16, 512, 202, "train");
  const auto test_set = generate(SystemId::kNsVorticity2d, 16, 32, 202, "test");
  auto cfg = default_model_config(SystemId::kNsVorticity2d, ModelVariant::kBaseline);
  cfg.width = 16;
  cfg.modes = {6, 6};
  cfg.seed = 7;
  TrainConfig tc;
  tc.epochs = 80;
  tc.batch_size = 8;
  tc.seed = 7;
  const Model base = train(Model(cfg), train_set, tc).best;
  auto dcfg = default_model_config(SystemId::kNsVorticity2d);
  dcfg.width = 8;
  dcfg.depth = 1;
  dcfg.modes = {4, 4};
  const Model probe(dcfg);
  StiOptions opt;
  opt.p_list = {1, 2};
  opt.baseline = &base;
  const auto report = sti_check(probe, test_set, opt);
  const double r1 = *report.entries[0].baseline_single_shot;
  const double r2 = *report.entries[1].baseline_single_shot;
  const double ratio = r2 / r1;
  return {ratio >= 5, fmt::format("baseline rel-L2 p=1 {:.4f}, p=2 {:.4f}, ratio {:.2f} (>=5)", r1, r2, ratio)};
}

Outcome group_invariance() {
  double worst = 0;
  std::size_t checks = 0;
  for (auto system :
       {SystemId::kAdvection1d, SystemId::kBurgers1d, SystemId::kDiffReact2d, SystemId::kNsVorticity2d}) {
    const auto& spec = dimless_spec(system);
    const std::size_t n = system_info(system).rank == 1 ? 64 : 16;
    for (std::uint64_t i = 0; i < 100; ++i) {
      const auto s = test::random_sample(system, n, 9000 + i);
      const auto c0 = compute_dimensionless(spec, characteristic_scales_from_sample(s));
      for (double p : {0.5, 2.0, 8.0}) {
        const auto c1 = compute_dimensionless(spec, characteristic_scales_from_sample(similar_transform(s, p)));
        for (std::size_t k = 0; k < c0.size(); ++k) worst = std::max(worst, std::abs(c1[k] - c0[k]) / std::abs(c0[k]));
        ++checks;
      }
    }
  }
  return {worst < 1e-12, fmt::format("{} transforms, worst relative change {:.2e} (<1e-12)", checks, worst)};
}

Outcome solver_oracles() {
  // Taylor-Green decay.
  const Grid sq = Grid::square(64);
  const auto w0 =
      test::grid_function(sq, [](double x, double y) { return 2 * std::cos(2 * kPi * x) * std::cos(2 * kPi * y); });
  const auto w = solve_ns_vorticity_2d(w0, sq, Quantity(0.01, kDiff), std::vector<double>(sq.size(), 0.0),
                                       Quantity(1, kTime), default_solver_config(SystemId::kNsVorticity2d));
  auto decayed = w0;
  for (double& v : decayed) v *= std::exp(-8 * kPi * kPi * 0.01);
  const double tg = test::rel_l2(w, decayed);

  // Advection of a band-limited profile against its closed form.
  const Grid line = Grid::line(128);
  auto profile = [](double x, double s) {
    const double a[] = {1.0, 0.5, -0.3, 0.2, 0.05};
    const double ph[] = {0.1, 1.3, 2.0, -0.4, 0.9};
    double v = 0.25;
    for (int k = 1; k <= 5; ++k) v += a[k - 1] * std::sin(2 * kPi * k * (x - s) + ph[k - 1]);
    return v;
  };
  const auto u0 = test::grid_function(line, [&](double x, double) { return profile(x, 0); });
  double adv = 0;
  for (double bt : {0.013, 0.37, 1.9, 7.25}) {
    const auto u = solve_advection_analytic(u0, line, Quantity(bt, kVel), Quantity(1, kTime));
    adv = std::max(adv, test::rel_l2(u, test::grid_function(line, [&](double x, double) { return profile(x, bt); })));
  }

  // Uniform diffusion-reaction fields reduce to the FitzHugh-Nagumo ODE,
  // integrated here with a much finer classical RK4.
  const Grid dr = Grid::square(32);
  double ode = 0;
  for (auto [a, b, k] : {std::tuple{0.5, -0.2, 0.01}, std::tuple{-0.8, 0.3, 0.005}}) {
    const std::vector<double> uu(dr.size(), a), vv(dr.size(), b);
    const auto r = solve_diffreact_2d(uu, vv, dr, Quantity(0.1, kDiff), Quantity(0.05, kDiff), Quantity(k, kVel),
                                      Quantity(1, kTime), default_solver_config(SystemId::kDiffReact2d));
    double u = a, v = b;
    const int steps = 200000;
    const double h = 1.0 / steps;
    auto f = [k](double x, double y) { return std::pair{x - x * x * x - k - y, x - y}; };
    for (int i = 0; i < steps; ++i) {
      const auto [k1u, k1v] = f(u, v);
      const auto [k2u, k2v] = f(u + 0.5 * h * k1u, v + 0.5 * h * k1v);
      const auto [k3u, k3v] = f(u + 0.5 * h * k2u, v + 0.5 * h * k2v);
      const auto [k4u, k4v] = f(u + h * k3u, v + h * k3v);
      u += h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u);
      v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
    }
    ode = std::max({ode, std::abs(r.u[5] - u) / std::max(1.0, std::abs(u)), std::abs(r.v[77] - v) / std::max(1.0, std::abs(v))});
  }

  // Burgers self-convergence under step halving.
  const auto b0 = test::grid_function(line, [](double x, double) { return std::sin(2 * kPi * x) + 0.3; });
  auto c1 = default_solver_config(SystemId::kBurgers1d);
  c1.steps = 500;
  auto c2 = c1;
  c2.steps = 1000;
  const double burg = test::rel_l2(solve_burgers_1d(b0, line, Quantity(0.01, kDiff), Quantity(0.5, kTime), c1),
                                   solve_burgers_1d(b0, line, Quantity(0.01, kDiff), Quantity(0.5, kTime), c2));

  const bool pass = tg < 1e-6 && adv < 1e-10 && ode < 1e-6 && burg < 1e-6;
  return {pass, fmt::format("Taylor-Green {:.2e} (<1e-6), advection {:.2e} (<1e-10), ODE {:.2e} (<1e-6), "
                            "Burgers halving {:.2e} (<1e-6)",
                            tg, adv, ode, burg)};
}

Outcome gradients() {
  double prim = 0, model = 0;
  std::string worst_name;
  for (const auto& r : check_primitives<double>(100, 20240)) {
    if (r.worst > prim) worst_name = r.name;
    prim = std::max(prim, r.worst);
  }
  for (const auto& r : check_models<double>(5, 20240)) model = std::max(model, r.worst);
  return {prim < 1e-6 && model < 1e-6,
          fmt::format("primitives x100 seeds worst {:.2e} ({}), depth-4 models x5 seeds worst {:.2e} (<1e-6)", prim,
                      worst_name, model)};
}

Outcome training_gain() {
  // Advection, 256 training / 64 test samples, beta log-uniform in [0.2, 2],
  // grid 256, depth 4, 200 epochs, three seeds.
  auto gen = default_generator_config(SystemId::kAdvection1d);
  gen.horizon = 1.0;
  gen.ranges = {{"beta", 0.2, 2.0}};
  const auto ds = generate_dataset(gen, 256, 64, 606);
  std::vector<double> dim, twin;
  for (std::uint64_t seed : {1, 2, 3}) {
    TrainConfig tc;
    tc.epochs = 200;
    tc.seed = seed;
    for (auto variant : {ModelVariant::kDimINO, ModelVariant::kBaseline}) {
      auto cfg = default_model_config(SystemId::kAdvection1d, variant);
      cfg.seed = seed;
      const auto r = train(Model(cfg), ds.split("train"), tc);
      const double score = evaluate(r.best, ds, "test").rel_l2;
      (variant == ModelVariant::kDimINO ? dim : twin).push_back(score);
      std::cout << fmt::format("  [6] seed {} {:<9} test rel-L2 {:.4f} (best epoch {})\n", seed,
                               variant_name(variant), score, r.best_epoch)
                << std::flush;
    }
  }
  const double md = median(dim), mt = median(twin);
  return {md <= mt, fmt::format("median test rel-L2 DimINO {:.4f} vs twin {:.4f}", md, mt)};
}

Outcome gate_suite() {
  std::size_t layouts = 0, bad = 0;
  for (std::size_t n = 1; n <= 64; ++n) {
    for (std::size_t m = 0; m <= 8; ++m) {
      for (int q = 0; q <= 4; ++q) {
        const DimGateConfig cfg{n, m, q / 4.0, true};
        const std::size_t l = m == 0 ? 0 : ((4 - q) * n) / (4 * m);
        const auto layout = gate_layout(cfg);
        std::vector<double> c(m);
        for (std::size_t i = 0; i < m; ++i) c[i] = 2.0 + static_cast<double>(i);
        const auto expanded = expand_gate(c, cfg);
        bool ok = cfg.block() == l && layout.size() == n && expanded.size() == n;
        for (std::size_t i = 0; ok && i < n; ++i) {
          ok = i < m * l ? (layout[i] == static_cast<int>(i / l) && expanded[i] == c[i / l])
                         : (layout[i] == -1 && expanded[i] == 1.0);
        }
        bad += ok ? 0 : 1;
        ++layouts;
      }
    }
  }
  // gamma = 1 (no gated channel, the same path m = 0 takes) against the
  // gate-free variant on every system.
  std::size_t mismatches = 0;
  for (auto system :
       {SystemId::kAdvection1d, SystemId::kBurgers1d, SystemId::kDiffReact2d, SystemId::kNsVorticity2d}) {
    auto gated = default_model_config(system);
    gated.gamma = 1.0;
    gated.width = 8;
    gated.depth = 2;
    gated.modes = system_info(system).rank == 1 ? std::vector<std::size_t>{6} : std::vector<std::size_t>{3, 3};
    auto free = gated;
    free.variant = ModelVariant::kGateFree;
    free.gamma = 0.5;
    const auto s = test::random_sample(system, system_info(system).rank == 1 ? 32 : 16, 5);
    const auto a = Model(gated).predict(s), b = Model(free).predict(s);
    for (std::size_t f = 0; f < a.size(); ++f) mismatches += a[f].values == b[f].values ? 0 : 1;
  }
  const bool m0 = gate_layout({16, 0, 0.0, true}) == std::vector<int>(16, -1);
  return {bad == 0 && mismatches == 0 && m0,
          fmt::format("{} layouts, {} wrong; gamma=1 vs gate-free field mismatches {}; m=0 identity {}", layouts, bad,
                      mismatches, m0 ? "yes" : "no")};
}

Outcome metric_identities() {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> scale(-100, 100);
  double worst_equal = 0, worst_zero = 0, worst_scale = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Grid g = trial % 2 ? Grid::line(64) : Grid::square(16);
    std::vector<double> p(g.size()), t(g.size());
    for (auto& v : p) v = nd(rng);
    for (auto& v : t) v = nd(rng);
    double a = scale(rng);
    if (std::abs(a) < 1e-2) a = 3.0;
    auto ap = p, at = t;
    for (double& v : ap) v *= a;
    for (double& v : at) v *= a;
    const std::vector<double> zero(g.size(), 0.0);
    for (auto k : {MetricKind::kRelL2, MetricKind::kRelL1, MetricKind::kRelH1}) {
      worst_equal = std::max(worst_equal, std::abs(rel_metric(k, t, t, g)));
      worst_zero = std::max(worst_zero, std::abs(rel_metric(k, zero, t, g) - 1.0));
      const double base = rel_metric(k, p, t, g);
      worst_scale = std::max(worst_scale, std::abs(rel_metric(k, ap, at, g) - base) / base);
    }
  }
  const bool pass = worst_equal == 0 && worst_zero < 1e-12 && worst_scale < 1e-12;
  return {pass, fmt::format("1000 pairs: equal {:.1e}, zero prediction |m-1| {:.1e}, joint scaling {:.1e}",
                            worst_equal, worst_zero, worst_scale)};
}

int shell(const std::string& cmd) {
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome reproducibility() {
  const fs::path dir = fs::temp_directory_path() / ("dimino-accept-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cd = "cd '" + dir.string() + "' && '" DIMINO_CLI "' ";
  const std::string quiet = " > /dev/null 2>&1";
  int failures = 0;
  for (const char* tag : {"a", "b"}) {
    failures += shell(cd + "gen-data --system burgers1d --n 24 --n-test 8 --grid 64 --seed 77 --threads 1 --out d" +
                      tag + quiet) != 0;
    failures += shell(cd + "train --data d" + tag +
                      " --width 8 --depth 4 --modes 8 --epochs 4 --batch-size 4 --seed 3 --threads 1 --quiet"
                      " --ablate-gate --out t" + tag + quiet) != 0;
  }
  std::size_t compared = 0, differing = 0;
  for (const char* f : {"train.bin", "test.bin", "manifest.json"}) {
    ++compared;
    differing += slurp(dir / "da" / f) != slurp(dir / "db" / f);
  }
  for (const char* f : {"model.ckpt", "twin.ckpt", "model-history.jsonl", "twin-history.jsonl", "metrics.json"}) {
    ++compared;
    differing += slurp(dir / "ta" / f) != slurp(dir / "tb" / f) || slurp(dir / "ta" / f).empty();
  }
  fs::remove_all(dir);
  return {failures == 0 && differing == 0,
          fmt::format("{} command failures, {} of {} artifacts differ", failures, differing, compared)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "STI exactness", sti_exactness},
      {2, "baseline STI failure direction", baseline_degradation},
      {3, "dimensionless-group invariance", group_invariance},
      {4, "solver oracles", solver_oracles},
      {5, "gradient correctness", gradients},
      {6, "directional training gain", training_gain},
      {7, "DimGate layout suite", gate_suite},
      {8, "metric identities", metric_identities},
      {9, "reproducibility", reproducibility},
  };
  // Optional arguments select criteria by number.
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << fmt::format("criterion {} {}: {} | {} | {:.1f}s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail,
                             secs)
              << std::flush;
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
