#include "dimino/grad_suite.hpp"

#include <functional>
#include <random>

#include "dimino/dataset.hpp"
#include "dimino/grad_check.hpp"
#include "dimino/hash.hpp"
#include "dimino/metrics.hpp"
#include "dimino/model.hpp"

namespace dimino {

namespace {

using ad::ElementKind;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

template <class Real>
Tensor<Real> random_tensor(Shape shape, std::mt19937_64& rng, ElementKind kind = ElementKind::kReal,
                           double lo = -1.0, double hi = 1.0) {
  Tensor<Real> t(std::move(shape), kind);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.data()) v = static_cast<Real>(dist(rng));
  return t;
}

// sum(w * y) with fixed random weights, so every output entry gets a
// distinct cotangent.
template <class Real>
Var<Real> weighted_sum(Tape<Real>& tape, Var<Real> y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ad::sum(ad::mul(y, tape.constant(random_tensor<Real>(y.shape(), rng))));
}

template <class Real>
struct PrimitiveCase {
  std::string name;
  std::function<std::vector<Tensor<Real>>(std::mt19937_64&)> inputs;
  ad::MultiLossBuilder<Real> loss;
};

template <class Real>
std::vector<PrimitiveCase<Real>> primitive_cases(std::uint64_t wseed) {
  using Leaves = std::span<const Var<Real>>;
  const Shape line{3, 16};
  const Shape square{2, 8, 8};
  const Shape sq_spatial{8, 8};
  std::vector<PrimitiveCase<Real>> cases;
  auto two = [](Shape s) {
    return [s](std::mt19937_64& g) { return std::vector{random_tensor<Real>(s, g), random_tensor<Real>(s, g)}; };
  };
  auto one = [](Shape s, double lo = -1.0, double hi = 1.0) {
    return [s, lo, hi](std::mt19937_64& g) { return std::vector{random_tensor<Real>(s, g, ElementKind::kReal, lo, hi)}; };
  };
  cases.push_back({"add", two(line), [=](Tape<Real>& t, Leaves x) { return weighted_sum(t, ad::add(x[0], x[1]), wseed); }});
  cases.push_back({"sub", two(line), [=](Tape<Real>& t, Leaves x) { return weighted_sum(t, ad::sub(x[0], x[1]), wseed); }});
  cases.push_back({"mul", two(line), [=](Tape<Real>& t, Leaves x) { return weighted_sum(t, ad::mul(x[0], x[1]), wseed); }});
  cases.push_back({"scale", one(line),
                   [=](Tape<Real>& t, Leaves x) { return weighted_sum(t, ad::scale(x[0], Real(-1.7)), wseed); }});
  cases.push_back({"linear",
                   [](std::mt19937_64& g) {
                     return std::vector{random_tensor<Real>({3, 16}, g), random_tensor<Real>({4, 3}, g)};
                   },
                   [=](Tape<Real>& t, Leaves x) { return weighted_sum(t, ad::linear(x[0], x[1]), wseed); }});
  cases.push_back({"bias_add",
                   [](std::mt19937_64& g) {
                     return std::vector{random_tensor<Real>({3, 16}, g), random_tensor<Real>({3}, g)};
                   },
                   [=](Tape<Real>& t, Leaves x) { return weighted_sum(t, ad::bias_add(x[0], x[1]), wseed); }});
  cases.push_back({"gelu", one(line, -3.0, 3.0),
                   [=](Tape<Real>& t, Leaves x) { return weighted_sum(t, ad::gelu(x[0]), wseed); }});
  cases.push_back({"layer_norm", one(square),
                   [=](Tape<Real>& t, Leaves x) { return weighted_sum(t, ad::layer_norm(x[0]), wseed); }});
  cases.push_back({"rfft", one(square), [=](Tape<Real>& t, Leaves x) {
                     // A fixed random spectral map turns the complex spectrum
                     // back into a real field with generic cotangents.
                     std::mt19937_64 g(wseed ^ 0x5bd1e995ULL);
                     auto w = t.constant(random_tensor<Real>({2, 2, 8, 4}, g, ElementKind::kComplex));
                     auto y = ad::irfft(ad::spectral_linear(ad::rfft(x[0]), w, sq_spatial, {4, 4}), sq_spatial);
                     return weighted_sum(t, y, wseed);
                   }});
  cases.push_back({"irfft",
                   [](std::mt19937_64& g) { return std::vector{random_tensor<Real>({2, 8, 5}, g, ElementKind::kComplex)}; },
                   [=](Tape<Real>& t, Leaves x) { return weighted_sum(t, ad::irfft(x[0], sq_spatial), wseed); }});
  cases.push_back({"spectral_linear",
                   [](std::mt19937_64& g) {
                     return std::vector{random_tensor<Real>({2, 8, 5}, g, ElementKind::kComplex),
                                        random_tensor<Real>({2, 3, 6, 3}, g, ElementKind::kComplex)};
                   },
                   [=](Tape<Real>& t, Leaves x) {
                     auto y = ad::irfft(ad::spectral_linear(x[0], x[1], sq_spatial, {3, 3}), sq_spatial);
                     return weighted_sum(t, y, wseed);
                   }});
  cases.push_back({"gate_mul",
                   [](std::mt19937_64& g) {
                     return std::vector{random_tensor<Real>({5, 16}, g), random_tensor<Real>({2}, g)};
                   },
                   [=](Tape<Real>& t, Leaves x) {
                     return weighted_sum(t, ad::gate_mul(x[0], x[1], {0, 0, 1, 1, -1}), wseed);
                   }});
  cases.push_back({"sum", one(line), [=](Tape<Real>&, Leaves x) { return ad::sum(x[0]); }});
  cases.push_back({"mean", one(line), [=](Tape<Real>& t, Leaves x) {
                     std::mt19937_64 g(wseed);
                     return ad::mean(ad::mul(x[0], t.constant(random_tensor<Real>(x[0].shape(), g))));
                   }});
  cases.push_back({"pow", one(line, 0.5, 2.0),
                   [=](Tape<Real>& t, Leaves x) { return weighted_sum(t, ad::pow(x[0], Real(2.5)), wseed); }});
  cases.push_back({"sqrt", one(line, 0.5, 2.0),
                   [=](Tape<Real>& t, Leaves x) { return weighted_sum(t, ad::sqrt(x[0]), wseed); }});
  return cases;
}

Sample random_sample(SystemId system, std::size_t n, std::uint64_t seed) {
  const auto& info = system_info(system);
  Sample s;
  s.system = system;
  s.grid = info.rank == 1 ? Grid::line(n) : Grid::square(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.2, 2.0);
  std::uint64_t k = 0;
  for (const auto& name : info.input_fields) {
    s.inputs.push_back({name, info.quantity(name).dim, random_fourier_field(s.grid, 3, 2.0, splitmix64(seed + ++k))});
  }
  for (const auto& name : info.constants) {
    s.constants.push_back({name, Quantity(pos(rng) * 1e-2, info.quantity(name).dim)});
  }
  s.horizon = pos(rng);
  for (const auto& name : info.targets) {
    s.targets.push_back({name, info.quantity(name).dim, random_fourier_field(s.grid, 3, 2.0, splitmix64(seed + ++k))});
  }
  return s;
}

}  // namespace

template <class Real>
std::vector<GradCheckResult> check_primitives(std::size_t seeds, std::uint64_t base_seed, double step) {
  std::vector<GradCheckResult> out;
  for (auto& c : primitive_cases<Real>(base_seed ^ 0x9e3779b97f4a7c15ULL)) {
    GradCheckResult r{c.name, 0.0, seeds};
    for (std::size_t s = 0; s < seeds; ++s) {
      std::mt19937_64 rng(splitmix64(base_seed + s) ^ fnv1a(c.name));
      const auto inputs = c.inputs(rng);
      ad::GradCheckOptions opt;
      opt.seed = splitmix64(base_seed + s);
      r.worst = std::max(r.worst, ad::grad_check_multi<Real>(c.loss, inputs, step, opt));
    }
    out.push_back(r);
  }
  return out;
}

template <class Real>
std::vector<GradCheckResult> check_models(std::size_t seeds, std::uint64_t base_seed, double step) {
  struct ModelCase {
    std::string name;
    ModelConfig cfg;
    std::size_t grid;
  };
  std::vector<ModelCase> cases;
  auto make = [](SystemId system, ModelVariant v, std::vector<std::size_t> modes) {
    ModelConfig cfg = default_model_config(system, v);
    cfg.width = 6;
    cfg.depth = 4;
    cfg.modes = std::move(modes);
    return cfg;
  };
  cases.push_back({"dimino", make(SystemId::kAdvection1d, ModelVariant::kDimINO, {4}), 16});
  auto after_lift = make(SystemId::kAdvection1d, ModelVariant::kDimINO, {4});
  after_lift.gate_position = GatePosition::kAfterLift;
  after_lift.post_order = PostOrder::kScaleLast;
  cases.push_back({"dimino-after-lift-scale-last", after_lift, 16});
  cases.push_back({"baseline", make(SystemId::kAdvection1d, ModelVariant::kBaseline, {4}), 16});
  cases.push_back({"dimino-vorticity-2d", make(SystemId::kNsVorticity2d, ModelVariant::kDimINO, {2, 2}), 8});

  std::vector<GradCheckResult> out;
  for (const auto& c : cases) {
    GradCheckResult r{c.name, 0.0, seeds};
    for (std::size_t s = 0; s < seeds; ++s) {
      ModelConfig cfg = c.cfg;
      cfg.seed = splitmix64(base_seed + s);
      Model model(cfg);
      const Sample sample = random_sample(cfg.system, c.grid, cfg.seed ^ 0xabcdefULL);
      if (cfg.variant == ModelVariant::kBaseline) {
        std::vector<Sample> stats{sample, random_sample(cfg.system, c.grid, cfg.seed ^ 0x1234ULL)};
        model.fit_statistics(stats);
      }
      const auto target = pack_fields(sample, model.system().targets, true);
      // Buffers (standardization statistics, fixed scales) are never
      // differentiated in training, so they enter as constants.
      std::vector<Tensor<Real>> params;
      for (const auto& p : model.parameters()) {
        if (p.trainable) params.push_back(p.value.cast<Real>());
      }
      ad::MultiLossBuilder<Real> loss = [&](Tape<Real>& tape, std::span<const Var<Real>> leaves) {
        std::vector<Var<Real>> all;
        std::size_t next = 0;
        for (const auto& p : model.parameters()) {
          all.push_back(p.trainable ? leaves[next++] : tape.constant(p.value.cast<Real>()));
        }
        auto res = model.forward_with<Real>(tape, sample, std::move(all));
        return rel_loss<Real>(MetricKind::kRelH1, res.output, target, sample.grid);
      };
      ad::GradCheckOptions opt;
      opt.seed = cfg.seed;
      opt.max_coordinates = 96;
      r.worst = std::max(r.worst, ad::grad_check_multi<Real>(loss, params, step, opt));
    }
    out.push_back(r);
  }
  return out;
}

template std::vector<GradCheckResult> check_primitives<double>(std::size_t, std::uint64_t, double);
template std::vector<GradCheckResult> check_primitives<float>(std::size_t, std::uint64_t, double);
template std::vector<GradCheckResult> check_models<double>(std::size_t, std::uint64_t, double);
template std::vector<GradCheckResult> check_models<float>(std::size_t, std::uint64_t, double);

}  // namespace dimino
