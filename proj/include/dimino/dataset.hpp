#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dimino/sample.hpp"
#include "dimino/solvers.hpp"

namespace dimino {

// Constants are drawn log-uniformly from [lo, hi].
struct ParamRange {
  std::string name;
  double lo = 1.0;
  double hi = 1.0;
};

struct GeneratorConfig {
  SystemId system = SystemId::kAdvection1d;
  Grid grid = Grid::line(256);
  double horizon = 1.0;
  std::vector<ParamRange> ranges;
  SolverConfig solver;
  double spectral_decay = 2.5;
  int k_max = 0;  // 0: grid / 8
  int forcing_k_max = 4;
  int max_retries = 3;

  int effective_k_max() const;
  const ParamRange& range(std::string_view name) const;
};

// Defaults per system: 256 points in 1D, 64^2 in 2D; T = 10 for the 1D
// systems and diffusion-reaction, T = 1 for vorticity.
GeneratorConfig default_generator_config(SystemId system);

struct Dataset {
  GeneratorConfig config;
  std::uint64_t seed = 0;
  std::map<std::string, std::vector<Sample>> splits;

  // Throws kMissingSplit.
  const std::vector<Sample>& split(std::string_view name) const;
};

// Derived per-sample seed; retries bump `attempt`.
std::uint64_t sample_seed(std::uint64_t seed, std::string_view split, std::size_t index,
                          int attempt);

// Random Fourier series with modes 1..k_max and amplitudes k^-decay.
std::vector<double> random_fourier_field(const Grid& grid, int k_max, double decay,
                                         std::uint64_t seed);

// Draws inputs and constants, then fills targets from the reference solver.
// A sample whose solve fails is redrawn with a new sub-seed up to max_retries.
Sample generate_sample(const GeneratorConfig& cfg, std::uint64_t seed, std::string_view split,
                       std::size_t index);

// OpenMP over samples; every sample owns its RNG so the result does not
// depend on the thread count.
std::vector<Sample> generate_samples(const GeneratorConfig& cfg, std::size_t n,
                                     std::uint64_t seed, std::string_view split);
// Serial reference of generate_samples.
std::vector<Sample> generate_samples_serial(const GeneratorConfig& cfg, std::size_t n,
                                            std::uint64_t seed, std::string_view split);

Dataset generate_dataset(const GeneratorConfig& cfg, std::size_t n_train, std::size_t n_test,
                         std::uint64_t seed);

}  // namespace dimino
