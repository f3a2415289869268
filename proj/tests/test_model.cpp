#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "dimino/model.hpp"
#include "support.hpp"

using namespace dimino;
using ad::Tape;
using ad::Tensor;

namespace {

template <class Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

ModelConfig small_config(SystemId system, ModelVariant variant = ModelVariant::kDimINO) {
  ModelConfig cfg = default_model_config(system, variant);
  cfg.width = 8;
  cfg.depth = 2;
  cfg.modes = system_info(system).rank == 1 ? std::vector<std::size_t>{6} : std::vector<std::size_t>{3, 3};
  cfg.seed = 42;
  return cfg;
}

std::vector<double> flat(const std::vector<Field>& fields) {
  std::vector<double> out;
  for (const auto& f : fields) out.insert(out.end(), f.values.begin(), f.values.end());
  return out;
}

std::vector<double> values_of(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("gate layout examples") {
  CHECK(gate_layout({8, 2, 0.25, true}) == std::vector<int>{0, 0, 0, 1, 1, 1, -1, -1});
  CHECK(gate_layout({8, 2, 1.0, true}) == std::vector<int>(8, -1));
  CHECK(gate_layout({7, 3, 0.0, true}) == std::vector<int>{0, 0, 1, 1, 2, 2, -1});
  CHECK(gate_layout({10, 7, 0.3, true}) == std::vector<int>{0, 1, 2, 3, 4, 5, 6, -1, -1, -1});

  const std::vector<double> c{5.0, 7.0};
  CHECK(expand_gate(c, {8, 2, 0.25, true}) == std::vector<double>{5, 5, 5, 7, 7, 7, 1, 1});
  CHECK(expand_gate(c, {8, 2, 1.0, true}) == std::vector<double>(8, 1.0));
  CHECK(code_of([&] { expand_gate(c, {8, 3, 0.5, true}); }) == ErrorCode::kLengthMismatch);
  CHECK(code_of([] { gate_layout({8, 2, 1.5, true}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("gate layout exhaustive property") {
  for (std::size_t n = 1; n <= 64; ++n) {
    for (std::size_t m = 0; m <= 8; ++m) {
      for (int q = 0; q <= 4; ++q) {
        const DimGateConfig cfg{n, m, q / 4.0, true};
        // gamma = q/4, so l = floor((4 - q) n / (4 m)) in integers.
        const std::size_t l = m == 0 ? 0 : ((4 - q) * n) / (4 * m);
        REQUIRE(cfg.block() == l);
        const auto layout = gate_layout(cfg);
        REQUIRE(layout.size() == n);
        std::size_t gated = 0;
        for (std::size_t i = 0; i < n; ++i) {
          if (i < m * l) {
            CHECK(layout[i] == static_cast<int>(i / l));
            ++gated;
          } else {
            CHECK(layout[i] == -1);
          }
        }
        CHECK(gated == m * l);
        CHECK(m * l <= n);
      }
    }
  }
}

TEST_CASE("gamma = 1 reduces to the gate-free model bit for bit") {
  for (auto system : {SystemId::kAdvection1d, SystemId::kNsVorticity2d}) {
    auto gated = small_config(system);
    gated.gamma = 1.0;
    CHECK_FALSE(gated.has_gate());
    const auto free = small_config(system, ModelVariant::kGateFree);
    const Model a(gated), b(free);
    CHECK(a.parameters().size() == b.parameters().size());
    const auto s = test::random_sample(system, system_info(system).rank == 1 ? 32 : 16, 3);
    CHECK(flat(a.predict(s)) == flat(b.predict(s)));
  }
  // The gate FFW's last bias starts at one; the gated model differs once gamma < 1.
  const Model g(small_config(SystemId::kAdvection1d));
  CHECK(g.has_parameter("gate.w1"));
  CHECK(values_of(g.parameter("gate.b2").value) == std::vector<double>{1.0});
}

TEST_CASE("spectral block") {
  const std::size_t c = 3, n = 64, modes = 10;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  auto rand = [&](ad::Shape s, ad::ElementKind k = ad::ElementKind::kReal) {
    Tensor<double> t(std::move(s), k);
    for (auto& v : t.data()) v = nd(rng);
    return t;
  };
  const auto x = rand({c, n});

  SUBCASE("zero weights and identity bypass give the identity") {
    Tape<double> tape;
    Tensor<double> eye({c, c});
    for (std::size_t i = 0; i < c; ++i) eye[i * c + i] = 1;
    SpectralBlockVars<double> b{tape.constant(Tensor<double>({c, c, modes}, ad::ElementKind::kComplex)),
                                tape.constant(eye), tape.constant(Tensor<double>({c}))};
    const auto& y = spectral_block_forward(tape.constant(x), b, {modes}, false).value();
    CHECK(values_of(y) == values_of(x));
  }

  SUBCASE("dense convolution oracle") {
    const auto w = rand({c, c, modes}, ad::ElementKind::kComplex);
    const auto bypass = rand({c, c});
    const auto bias = rand({c});
    Tape<double> tape;
    SpectralBlockVars<double> b{tape.constant(w), tape.constant(bypass), tape.constant(bias)};
    const auto y = values_of(spectral_block_forward(tape.constant(x), b, {modes}, false).value());

    // Physical-space kernel of the truncated multiplier, applied by direct
    // circular convolution.
    const auto wc = w.cdata();
    std::vector<double> expect(c * n, 0.0);
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t o = 0; o < c; ++o) {
        std::vector<double> kernel(n);
        for (std::size_t m = 0; m < n; ++m) {
          double v = wc[(i * c + o) * modes].real();
          for (std::size_t k = 1; k < modes; ++k) {
            const double th = 2 * test::kPi * static_cast<double>(k * m) / static_cast<double>(n);
            v += 2 * (wc[(i * c + o) * modes + k] * std::polar(1.0, th)).real();
          }
          kernel[m] = v / static_cast<double>(n);
        }
        for (std::size_t s = 0; s < n; ++s) {
          double acc = 0;
          for (std::size_t m = 0; m < n; ++m) acc += kernel[m] * x[i * n + (s + n - m) % n];
          expect[o * n + s] += acc + bypass[o * c + i] * x[i * n + s];
        }
      }
    }
    for (std::size_t o = 0; o < c; ++o) {
      for (std::size_t s = 0; s < n; ++s) expect[o * n + s] += bias[o];
    }
    CHECK(test::max_abs_diff(y, expect) < 1e-10);
  }

  SUBCASE("a single retained mode stays band-limited") {
    Tensor<double> wave({1, n});
    for (std::size_t s = 0; s < n; ++s) wave[s] = std::cos(2 * test::kPi * 3 * static_cast<double>(s) / n);
    Tape<double> tape;
    SpectralBlockVars<double> b{tape.constant(rand({1, 1, modes}, ad::ElementKind::kComplex)),
                                tape.constant(Tensor<double>({1, 1})), tape.constant(Tensor<double>({1}))};
    auto y = spectral_block_forward(tape.constant(wave), b, {modes}, false);
    const auto spec = ad::rfft(y).value().cdata();
    for (std::size_t k = 0; k < spec.size(); ++k) {
      if (k != 3) CHECK(std::abs(spec[k]) < 1e-10);
    }
  }

  SUBCASE("mode overflow") {
    Tape<double> tape;
    SpectralBlockVars<double> b{tape.constant(Tensor<double>({c, c, 40}, ad::ElementKind::kComplex)),
                                tape.constant(Tensor<double>({c, c})), tape.constant(Tensor<double>({c}))};
    CHECK(code_of([&] { spectral_block_forward(tape.constant(x), b, {40}, true); }) == ErrorCode::kModeOverflow);
  }
}

TEST_CASE("forward contracts") {
  const auto cfg = small_config(SystemId::kNsVorticity2d);
  Model model(cfg);
  const auto s = test::random_sample(cfg.system, 16, 2);

  SUBCASE("output shape and zeroed blocks") {
    for (auto& p : model.parameters()) {
      if (p.name.rfind("block", 0) == 0) p.value.fill(0);
    }
    const auto out = model.predict(s);
    REQUIRE(out.size() == 1);
    CHECK(out[0].name == "omega");
    CHECK(out[0].values.size() == s.grid.size());
    // Zeroed blocks make the latent field constant in space, so the output is too.
    for (double v : out[0].values) CHECK(v == doctest::Approx(out[0].values[0]).epsilon(1e-12));
  }

  SUBCASE("field set must match") {
    auto bad = s;
    bad.inputs.pop_back();
    CHECK(code_of([&] { model.predict(bad); }) == ErrorCode::kFieldSetMismatch);
    bad = s;
    bad.inputs[1].name = "g";
    CHECK(code_of([&] { model.predict(bad); }) == ErrorCode::kFieldSetMismatch);
  }

  SUBCASE("modes must fit the grid") {
    auto big = cfg;
    big.modes = {9, 9};
    CHECK(code_of([&] { Model(big).predict(s); }) == ErrorCode::kModeOverflow);
  }

  SUBCASE("single precision follows double precision") {
    const auto a = flat(model.predict(s, Precision::kF64));
    const auto b = flat(model.predict(s, Precision::kF32));
    CHECK(test::rel_l2(b, a) < 1e-5);
  }

  SUBCASE("equal dimensionless inputs give equal latents") {
    auto other = s;
    for (auto& f : other.targets) f.values.assign(f.values.size(), 0.5);
    Tape<double> t1, t2;
    const auto r1 = model.forward(t1, s);
    const auto l1 = values_of(dimnorm_forward<double>(model, t1, s, r1.params).latent.value());
    const auto r2 = model.forward(t2, other);
    CHECK(values_of(r2.latent.value()) == l1);
    CHECK(values_of(r1.latent.value()) == l1);
  }
}

TEST_CASE("similar transforms leave the dimensionless prediction unchanged") {
  for (auto order : {PostOrder::kDefinition, PostOrder::kScaleLast}) {
    for (auto position : {GatePosition::kAfterFfwPre, GatePosition::kAfterLift}) {
      auto cfg = small_config(SystemId::kNsVorticity2d);
      cfg.post_order = order;
      cfg.gate_position = position;
      const Model model(cfg);
      const auto s = test::random_sample(cfg.system, 16, 9);
      Tape<double> t0;
      const auto base = model.forward(t0, s);
      const auto latent0 = values_of(base.latent.value());
      const auto pre0 = values_of(base.pre_scale.value());
      const auto out0 = values_of(base.output.value());
      for (double p : {2.0, 4.0, 8.0}) {
        const auto ts = similar_transform(s, p);
        Tape<double> t1;
        const auto r = model.forward(t1, ts);
        CHECK(test::rel_l2(values_of(r.latent.value()), latent0) < 1e-12);
        CHECK(test::rel_l2(values_of(r.pre_scale.value()), pre0) < 1e-12);
        if (order == PostOrder::kScaleLast) {
          auto scaled = out0;
          for (double& v : scaled) v /= p;
          CHECK(test::rel_l2(values_of(r.output.value()), scaled) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("baseline variant") {
  const auto cfg = small_config(SystemId::kBurgers1d, ModelVariant::kBaseline);
  Model model(cfg);
  CHECK(cfg.in_channels() == 3);
  std::vector<Sample> train;
  for (std::uint64_t i = 0; i < 4; ++i) train.push_back(test::random_sample(cfg.system, 32, i, 1.0 + i));
  model.fit_statistics(train);
  const auto& mean = model.parameter("norm.in_mean").value;
  double m = 0;
  for (const auto& s : train) m += s.horizon;
  CHECK(mean[2] == doctest::Approx(m / 4));
  CHECK_FALSE(model.parameter("norm.in_mean").trainable);
  const auto out = model.predict(train[0]);
  REQUIRE(out.size() == 1);
  CHECK(out[0].values.size() == 32);
}

TEST_CASE("configuration") {
  auto cfg = small_config(SystemId::kDiffReact2d);
  cfg.post_order = PostOrder::kScaleLast;
  cfg.scale_mode = ScaleMode::kPerDataset;
  cfg.log_gate_inputs = false;
  const auto back = config_from_json(config_to_json(cfg));
  CHECK(config_to_json(back) == config_to_json(cfg));
  CHECK(back.modes == cfg.modes);
  CHECK(back.scale_mode == ScaleMode::kPerDataset);

  auto bad = cfg;
  bad.depth = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.modes = {3};
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(config_from_json("{not json"), Error);
  CHECK(parse_variant("gate-free") == ModelVariant::kGateFree);
  CHECK_THROWS_AS(parse_variant("tfno"), Error);
}

TEST_CASE("checkpoints") {
  namespace fs = std::filesystem;
  auto cfg = small_config(SystemId::kAdvection1d);
  cfg.scale_mode = ScaleMode::kPerDataset;
  Model model(cfg);
  std::vector<Sample> samples;
  for (std::uint64_t i = 0; i < 10; ++i) samples.push_back(test::random_sample(cfg.system, 32, 100 + i));
  model.fit_statistics(samples);

  const fs::path path = fs::temp_directory_path() / "dimino_test_model.ckpt";
  save_model(model, path);
  const Model back = load_model(path);
  CHECK(config_to_json(back.config()) == config_to_json(cfg));
  for (const auto& s : samples) CHECK(flat(back.predict(s)) == flat(model.predict(s)));
  fs::remove(path);

  const auto bytes = serialize_model(model);
  auto corrupt = [&](std::vector<std::uint8_t> b) {
    try {
      deserialize_model(b);
    } catch (const Error& e) {
      return std::pair{e.code(), std::string(e.what())};
    }
    return std::pair{ErrorCode::kIo, std::string()};
  };
  CHECK(corrupt({bytes.begin(), bytes.begin() + static_cast<long>(bytes.size() / 2)}).first ==
        ErrorCode::kCorruptCheckpoint);
  CHECK(corrupt({bytes.begin(), bytes.end() - 1}).first == ErrorCode::kCorruptCheckpoint);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  CHECK(corrupt(flipped).first == ErrorCode::kCorruptCheckpoint);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK(corrupt(magic).first == ErrorCode::kCorruptCheckpoint);
  auto version = bytes;
  version[8] = static_cast<std::uint8_t>(kCheckpointVersion + 1);
  const auto [code, msg] = corrupt(version);
  CHECK(code == ErrorCode::kCorruptCheckpoint);
  CHECK(msg.find("version") != std::string::npos);
  auto extra = bytes;
  extra.push_back(0);
  CHECK(corrupt(extra).first == ErrorCode::kCorruptCheckpoint);

  CHECK(code_of([] { load_model("/nonexistent/dir/model.ckpt"); }) == ErrorCode::kIo);
}
