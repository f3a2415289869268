#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dimino {

struct GradCheckResult {
  std::string name;
  double worst = 0;  // worst relative error over all seeds
  std::size_t seeds = 0;
};

// Every primitive on random inputs, one grad_check per seed.
template <class Real>
std::vector<GradCheckResult> check_primitives(std::size_t seeds, std::uint64_t base_seed = 0, double step = 1e-4);

// Depth-4 models on small grids (16-point advection line for the DimINO
// variants and the baseline, 8x8 vorticity for the 2D path), differentiating
// the rel-H1 training loss with respect to every parameter.
template <class Real>
std::vector<GradCheckResult> check_models(std::size_t seeds, std::uint64_t base_seed = 0, double step = 1e-4);

}  // namespace dimino
