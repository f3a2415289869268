#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dimino/dataset.hpp"
#include "dimino/parallel.hpp"

using namespace dimino;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Arguments: channels, points.
template <bool Parallel>
void BM_ChannelMix(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto w = random_vec(c * c, 1);
  const auto x = random_vec(c * n, 2);
  std::vector<double> y(c * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::channel_mix_omp<double>(w, x, y, c, c, n);
    } else {
      kernels::channel_mix_serial<double>(w, x, y, c, c, n);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * c * c * n));
}

template <bool Parallel>
void BM_ChannelMixWeightGrad(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto dy = random_vec(c * n, 3);
  const auto x = random_vec(c * n, 4);
  std::vector<double> dw(c * c);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::channel_mix_weight_grad_omp<double>(dy, x, dw, c, c, n);
    } else {
      kernels::channel_mix_weight_grad_serial<double>(dy, x, dw, c, c, n);
    }
    benchmark::DoNotOptimize(dw.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * c * c * n));
}

template <bool Parallel>
void BM_GenerateBurgers(benchmark::State& state) {
  auto cfg = default_generator_config(SystemId::kBurgers1d);
  cfg.grid = Grid::line(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto s = Parallel ? generate_samples(cfg, 8, 1, "train") : generate_samples_serial(cfg, 8, 1, "train");
    benchmark::DoNotOptimize(s.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 8));
}

}  // namespace

BENCHMARK(BM_ChannelMix<false>)->Args({32, 4096})->Args({32, 65536});
BENCHMARK(BM_ChannelMix<true>)->Args({32, 4096})->Args({32, 65536});
BENCHMARK(BM_ChannelMixWeightGrad<false>)->Args({32, 4096})->Args({32, 65536});
BENCHMARK(BM_ChannelMixWeightGrad<true>)->Args({32, 4096})->Args({32, 65536});
BENCHMARK(BM_GenerateBurgers<false>)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GenerateBurgers<true>)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
