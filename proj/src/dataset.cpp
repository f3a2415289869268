#include "dimino/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <random>

#include "dimino/dims.hpp"
#include "dimino/error.hpp"
#include "dimino/hash.hpp"

namespace dimino {

namespace {

double log_uniform(std::mt19937_64& rng, const ParamRange& r) {
  if (r.lo == r.hi) return r.lo;
  std::uniform_real_distribution<double> dist(std::log(r.lo), std::log(r.hi));
  return std::exp(dist(rng));
}

}  // namespace

int GeneratorConfig::effective_k_max() const {
  if (k_max > 0) return k_max;
  return std::max<int>(1, static_cast<int>(grid.points[0] / 8));
}

const ParamRange& GeneratorConfig::range(std::string_view name) const {
  for (const auto& r : ranges) {
    if (r.name == name) return r;
  }
  fail(ErrorCode::kInvalidArgument, "generator has no range for '" + std::string(name) + "'");
}

GeneratorConfig default_generator_config(SystemId system) {
  GeneratorConfig cfg;
  cfg.system = system;
  cfg.solver = default_solver_config(system);
  switch (system) {
    case SystemId::kAdvection1d:
      cfg.grid = Grid::line(256);
      cfg.horizon = 10.0;
      cfg.ranges = {{"beta", 0.2, 2.0}};
      break;
    case SystemId::kBurgers1d:
      cfg.grid = Grid::line(256);
      cfg.horizon = 10.0;
      cfg.ranges = {{"nu", 5e-3, 5e-2}};
      break;
    case SystemId::kDiffReact2d:
      cfg.grid = Grid::square(64);
      cfg.horizon = 10.0;
      cfg.ranges = {{"Du", 1e-3, 1e-2}, {"Dv", 1e-3, 1e-2}, {"k", 1e-3, 1e-2}};
      break;
    case SystemId::kNsVorticity2d:
      cfg.grid = Grid::square(64);
      cfg.horizon = 1.0;
      cfg.ranges = {{"nu", 1e-4, 1e-2}, {"f_amp", 0.1, 1.0}};
      break;
  }
  return cfg;
}

const std::vector<Sample>& Dataset::split(std::string_view name) const {
  auto it = splits.find(std::string(name));
  if (it == splits.end()) fail(ErrorCode::kMissingSplit, "dataset has no split '" + std::string(name) + "'");
  return it->second;
}

std::uint64_t sample_seed(std::uint64_t seed, std::string_view split, std::size_t index,
                          int attempt) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ fnv1a(split));
  h = splitmix64(h ^ static_cast<std::uint64_t>(index));
  return splitmix64(h ^ (static_cast<std::uint64_t>(attempt) << 32));
}

std::vector<double> random_fourier_field(const Grid& grid, int k_max, double decay,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  std::vector<double> out(grid.size(), 0.0);
  if (grid.rank() == 1) {
    const std::size_t n = grid.points[0];
    for (int k = 1; k <= k_max; ++k) {
      const double amp = std::pow(static_cast<double>(k), -decay);
      const double a = amp * normal(rng), b = amp * normal(rng);
      for (std::size_t i = 0; i < n; ++i) {
        const double th = kTwoPi * k * static_cast<double>(i) / static_cast<double>(n);
        out[i] += a * std::cos(th) + b * std::sin(th);
      }
    }
    return out;
  }
  const std::size_t n0 = grid.points[0], n1 = grid.points[1];
  // Half plane of wave vectors: ky > 0, or ky == 0 and kx > 0.
  for (int ky = 0; ky <= k_max; ++ky) {
    for (int kx = -k_max; kx <= k_max; ++kx) {
      if (ky == 0 && kx <= 0) continue;
      const double kk = std::sqrt(static_cast<double>(kx * kx + ky * ky));
      if (kk > k_max) continue;
      const double amp = std::pow(kk, -decay);
      const double a = amp * normal(rng), b = amp * normal(rng);
      for (std::size_t i0 = 0; i0 < n0; ++i0) {
        const double px = static_cast<double>(kx) * static_cast<double>(i0) / static_cast<double>(n0);
        for (std::size_t i1 = 0; i1 < n1; ++i1) {
          const double th = kTwoPi * (px + static_cast<double>(ky) * static_cast<double>(i1) /
                                               static_cast<double>(n1));
          out[i0 * n1 + i1] += a * std::cos(th) + b * std::sin(th);
        }
      }
    }
  }
  return out;
}

namespace {

Sample draw_sample(const GeneratorConfig& cfg, std::uint64_t seed) {
  const auto& info = system_info(cfg.system);
  std::mt19937_64 rng(seed);
  auto sub_seed = [&]() { return rng(); };
  const int k_max = cfg.effective_k_max();

  Sample s;
  s.system = cfg.system;
  s.grid = cfg.grid;
  s.horizon = cfg.horizon;
  for (const auto& name : info.input_fields) {
    std::vector<double> values;
    if (cfg.system == SystemId::kNsVorticity2d && name == "f") {
      values = random_fourier_field(cfg.grid, cfg.forcing_k_max, cfg.spectral_decay, sub_seed());
      double max_abs = 0.0;
      for (double v : values) max_abs = std::max(max_abs, std::abs(v));
      const double amp = log_uniform(rng, cfg.range("f_amp"));
      for (double& v : values) v *= amp / std::max(max_abs, kScaleFloor);
    } else {
      values = random_fourier_field(cfg.grid, k_max, cfg.spectral_decay, sub_seed());
    }
    s.inputs.push_back({name, info.quantity(name).dim, std::move(values)});
  }
  for (const auto& name : info.constants) {
    s.constants.push_back({name, Quantity(log_uniform(rng, cfg.range(name)), info.quantity(name).dim)});
  }
  return s;
}

}  // namespace

Sample generate_sample(const GeneratorConfig& cfg, std::uint64_t seed, std::string_view split,
                       std::size_t index) {
  for (int attempt = 0;; ++attempt) {
    Sample s = draw_sample(cfg, sample_seed(seed, split, index, attempt));
    try {
      s.targets = solve_sample(s, cfg.solver);
      return s;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kStepUnstable || attempt >= cfg.max_retries) throw;
    }
  }
}

std::vector<Sample> generate_samples_serial(const GeneratorConfig& cfg, std::size_t n,
                                            std::uint64_t seed, std::string_view split) {
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate_sample(cfg, seed, split, i));
  return out;
}

std::vector<Sample> generate_samples(const GeneratorConfig& cfg, std::size_t n,
                                     std::uint64_t seed, std::string_view split) {
  if (n == 0) fail(ErrorCode::kInvalidArgument, "need at least one sample");
  cfg.grid.validate();
  cfg.solver.validate();
  system_info(cfg.system);  // registry load happens before the parallel region
  std::vector<Sample> out(n);
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < count; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = generate_sample(cfg, seed, split, static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

Dataset generate_dataset(const GeneratorConfig& cfg, std::size_t n_train, std::size_t n_test,
                         std::uint64_t seed) {
  Dataset ds;
  ds.config = cfg;
  ds.seed = seed;
  ds.splits["train"] = generate_samples(cfg, n_train, seed, "train");
  if (n_test > 0) ds.splits["test"] = generate_samples(cfg, n_test, seed, "test");
  return ds;
}

}  // namespace dimino
