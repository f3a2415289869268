#include "dimino/model.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <limits>
#include <optional>
#include <random>
#include <tuple>

#include "dimino/hash.hpp"

namespace dimino {

namespace {

using ad::Shape;
using ad::Tensor;
using ad::Var;

template <class E>
struct EnumName {
  E value;
  std::string_view name;
};

template <class E, std::size_t N>
std::string_view enum_to_name(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table) {
    if (e.value == v) return e.name;
  }
  return "unknown";
}

template <class E, std::size_t N>
E enum_from_name(const EnumName<E> (&table)[N], std::string_view s, std::string_view what) {
  for (const auto& e : table) {
    if (e.name == s) return e.value;
  }
  std::string options;
  for (const auto& e : table) options += (options.empty() ? "" : ", ") + std::string(e.name);
  fail(ErrorCode::kInvalidArgument, "unknown " + std::string(what) + " '" + std::string(s) + "' (expected " + options + ")");
}

constexpr EnumName<Precision> kPrecisions[] = {{Precision::kF64, "f64"}, {Precision::kF32, "f32"}};
constexpr EnumName<ModelVariant> kVariants[] = {
    {ModelVariant::kDimINO, "dimino"}, {ModelVariant::kGateFree, "gate-free"}, {ModelVariant::kBaseline, "baseline"}};
constexpr EnumName<GatePosition> kGatePositions[] = {{GatePosition::kAfterFfwPre, "after-ffw-pre"},
                                                     {GatePosition::kAfterLift, "after-lift"}};
constexpr EnumName<PostOrder> kPostOrders[] = {{PostOrder::kDefinition, "ffw-post-last"},
                                               {PostOrder::kScaleLast, "scale-last"}};
constexpr EnumName<ScaleMode> kScaleModes[] = {{ScaleMode::kPerSample, "per-sample"},
                                               {ScaleMode::kPerDataset, "per-dataset"}};

std::string block_name(std::size_t i, std::string_view part) {
  return "block" + std::to_string(i) + "." + std::string(part);
}

// Fan-in uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor<double> uniform_init(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  Tensor<double> t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

struct Declaration {
  std::string name;
  Shape shape;
  bool complex = false;
  bool trainable = true;
  std::size_t fan_in = 1;
  double fill = std::numeric_limits<double>::quiet_NaN();  // constant init when set
  double spectral_std = 0.0;
};

std::vector<Declaration> declarations(const ModelConfig& cfg) {
  const auto& info = system_info(cfg.system);
  const std::size_t n = cfg.width;
  const std::size_t cin = cfg.in_channels();
  const std::size_t cout = cfg.out_channels();
  std::vector<Declaration> out;
  auto lin = [&](std::string name, std::size_t o, std::size_t i) {
    out.push_back({std::move(name), {o, i}, false, true, i});
  };
  auto bias = [&](std::string name, std::size_t o, std::size_t fan_in) {
    out.push_back({std::move(name), {o}, false, true, fan_in});
  };
  lin("pre.w1", n, cin);
  bias("pre.b1", n, cin);
  lin("pre.w2", n, n);
  bias("pre.b2", n, n);
  if (cfg.has_gate()) {
    // Hidden width n like the other FFWs; input and output stay m.
    const std::size_t m = info.dimless.size();
    lin("gate.w1", n, m);
    bias("gate.b1", n, m);
    lin("gate.w2", m, n);
    Declaration b2{"gate.b2", {m}, false, true, n};
    b2.fill = 1.0;
    out.push_back(b2);
  }
  std::size_t mode_count = *std::max_element(cfg.modes.begin(), cfg.modes.end());
  for (std::size_t d = 0; d < cfg.depth; ++d) {
    Declaration spec{block_name(d, "spectral"), {n, n}, true, true, n};
    if (cfg.modes.size() == 1) {
      spec.shape.push_back(cfg.modes[0]);
    } else {
      spec.shape.push_back(2 * cfg.modes[0]);
      spec.shape.push_back(cfg.modes[1]);
    }
    spec.spectral_std = 1.0 / static_cast<double>(n * mode_count);
    out.push_back(spec);
    lin(block_name(d, "bypass"), n, n);
    bias(block_name(d, "bias"), n, n);
  }
  lin("post.w1", n, n);
  bias("post.b1", n, n);
  lin("post.w2", cout, n);
  bias("post.b2", cout, n);
  if (cfg.variant != ModelVariant::kBaseline && cfg.scale_mode == ScaleMode::kPerDataset) {
    for (const auto& f : info.input_fields) {
      Declaration d{"scale." + f, {1}, false, false, 1};
      d.fill = 1.0;
      out.push_back(d);
    }
  }
  if (cfg.variant == ModelVariant::kBaseline) {
    for (auto [name, size, fill] : {std::tuple{"norm.in_mean", cin, 0.0}, std::tuple{"norm.in_std", cin, 1.0},
                                    std::tuple{"norm.out_mean", cout, 0.0}, std::tuple{"norm.out_std", cout, 1.0}}) {
      Declaration d{name, {size}, false, false, 1};
      d.fill = fill;
      out.push_back(d);
    }
  }
  return out;
}

Parameter initialize(const Declaration& d, std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(seed ^ fnv1a(d.name)));
  Parameter p{d.name, Tensor<double>(d.shape, d.complex ? ad::ElementKind::kComplex : ad::ElementKind::kReal),
              d.trainable};
  if (!std::isnan(d.fill)) {
    p.value.fill(d.fill);
  } else if (d.complex) {
    std::normal_distribution<double> dist(0.0, d.spectral_std / std::sqrt(2.0));
    for (auto& v : p.value.data()) v = dist(rng);
  } else {
    p.value = uniform_init(d.shape, d.fan_in, rng);
  }
  return p;
}

template <class Real>
Tensor<Real> to_real(const Tensor<double>& t) {
  return t.cast<Real>();
}

// Characteristic scale of each target, in registry order.
template <class Real>
Tensor<Real> target_scales(const SystemInfo& info, const CharacteristicScales& scales) {
  Tensor<Real> t({info.targets.size()});
  for (std::size_t k = 0; k < info.targets.size(); ++k) t[k] = static_cast<Real>(scales.value(info.targets[k]));
  return t;
}

}  // namespace

std::string_view precision_name(Precision p) { return enum_to_name(kPrecisions, p); }
Precision parse_precision(std::string_view s) { return enum_from_name(kPrecisions, s, "precision"); }
std::string_view variant_name(ModelVariant v) { return enum_to_name(kVariants, v); }
ModelVariant parse_variant(std::string_view s) { return enum_from_name(kVariants, s, "model variant"); }
std::string_view gate_position_name(GatePosition g) { return enum_to_name(kGatePositions, g); }
GatePosition parse_gate_position(std::string_view s) { return enum_from_name(kGatePositions, s, "gate position"); }
std::string_view post_order_name(PostOrder p) { return enum_to_name(kPostOrders, p); }
PostOrder parse_post_order(std::string_view s) { return enum_from_name(kPostOrders, s, "post order"); }
std::string_view scale_mode_name(ScaleMode s) { return enum_to_name(kScaleModes, s); }
ScaleMode parse_scale_mode(std::string_view s) { return enum_from_name(kScaleModes, s, "scale mode"); }

std::size_t DimGateConfig::block() const {
  if (m == 0) return 0;
  // The small guard keeps exact quotients such as 0.7 * 10 / 7 from
  // flooring one below.
  const double l = (1.0 - gamma) * static_cast<double>(n) / static_cast<double>(m);
  return static_cast<std::size_t>(std::floor(l + 1e-9));
}

void DimGateConfig::validate() const {
  if (n == 0) fail(ErrorCode::kInvalidArgument, "gate needs at least one latent channel");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail(ErrorCode::kInvalidArgument, "gamma must lie in [0, 1]");
}

std::vector<int> gate_layout(const DimGateConfig& cfg) {
  cfg.validate();
  const std::size_t l = cfg.block();
  std::vector<int> layout(cfg.n, -1);
  for (std::size_t i = 0; i < cfg.m * l && i < cfg.n; ++i) layout[i] = static_cast<int>(i / l);
  return layout;
}

std::vector<double> expand_gate(std::span<const double> c, const DimGateConfig& cfg) {
  if (c.size() != cfg.m) {
    fail(ErrorCode::kLengthMismatch,
         "gate input has " + std::to_string(c.size()) + " entries, expected " + std::to_string(cfg.m));
  }
  const auto layout = gate_layout(cfg);
  std::vector<double> out(cfg.n, 1.0);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    if (layout[i] >= 0) out[i] = c[static_cast<std::size_t>(layout[i])];
  }
  return out;
}

std::size_t ModelConfig::in_channels() const {
  const auto& info = system_info(system);
  if (variant == ModelVariant::kBaseline) return info.input_fields.size() + info.constants.size() + 1;
  return info.input_fields.size();
}

std::size_t ModelConfig::out_channels() const { return system_info(system).targets.size(); }

DimGateConfig ModelConfig::gate() const {
  return {width, variant == ModelVariant::kDimINO ? system_info(system).dimless.size() : 0, gamma, log_gate_inputs};
}

bool ModelConfig::has_gate() const { return gate().block() > 0; }

void ModelConfig::validate() const {
  const auto& info = system_info(system);
  if (width == 0) fail(ErrorCode::kInvalidArgument, "width must be positive");
  if (depth == 0) fail(ErrorCode::kInvalidArgument, "depth must be at least 1");
  if (modes.size() != static_cast<std::size_t>(info.rank)) {
    fail(ErrorCode::kInvalidArgument, "modes needs one entry per spatial axis (" + std::to_string(info.rank) + ")");
  }
  for (auto m : modes) {
    if (m == 0) fail(ErrorCode::kInvalidArgument, "mode counts must be positive");
  }
  if (!(layer_norm_eps > 0)) fail(ErrorCode::kInvalidArgument, "layer-norm epsilon must be positive");
  gate().validate();
}

ModelConfig default_model_config(SystemId system, ModelVariant variant) {
  ModelConfig cfg;
  cfg.system = system;
  cfg.variant = variant;
  cfg.modes = system_info(system).rank == 1 ? std::vector<std::size_t>{16} : std::vector<std::size_t>{12, 12};
  return cfg;
}

std::string config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["system"] = system_name(cfg.system);
  j["variant"] = variant_name(cfg.variant);
  j["width"] = cfg.width;
  j["depth"] = cfg.depth;
  j["modes"] = cfg.modes;
  j["gamma"] = cfg.gamma;
  j["log_gate_inputs"] = cfg.log_gate_inputs;
  j["gate_position"] = gate_position_name(cfg.gate_position);
  j["post_order"] = post_order_name(cfg.post_order);
  j["scale_mode"] = scale_mode_name(cfg.scale_mode);
  j["layer_norm_eps"] = cfg.layer_norm_eps;
  j["seed"] = cfg.seed;
  return j.dump();
}

ModelConfig config_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    ModelConfig cfg;
    cfg.system = parse_system(j.at("system").get<std::string>());
    cfg.variant = parse_variant(j.at("variant").get<std::string>());
    cfg.width = j.at("width").get<std::size_t>();
    cfg.depth = j.at("depth").get<std::size_t>();
    cfg.modes = j.at("modes").get<std::vector<std::size_t>>();
    cfg.gamma = j.at("gamma").get<double>();
    cfg.log_gate_inputs = j.at("log_gate_inputs").get<bool>();
    cfg.gate_position = parse_gate_position(j.at("gate_position").get<std::string>());
    cfg.post_order = parse_post_order(j.at("post_order").get<std::string>());
    cfg.scale_mode = parse_scale_mode(j.at("scale_mode").get<std::string>());
    cfg.layer_norm_eps = j.at("layer_norm_eps").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("model config: ") + e.what());
  }
}

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  for (const auto& d : declarations(cfg_)) params_.push_back(initialize(d, cfg_.seed));
}

Model::Model(ModelConfig cfg, std::vector<Parameter> params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
  const auto decls = declarations(cfg_);
  if (decls.size() != params_.size()) {
    fail(ErrorCode::kShapeMismatch, "model expects " + std::to_string(decls.size()) + " parameters, got " +
                                        std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < decls.size(); ++i) {
    const auto& d = decls[i];
    const auto& p = params_[i];
    const auto kind = d.complex ? ad::ElementKind::kComplex : ad::ElementKind::kReal;
    if (p.name != d.name || p.value.shape() != d.shape || p.value.kind() != kind || p.trainable != d.trainable) {
      fail(ErrorCode::kShapeMismatch, "parameter " + std::to_string(i) + " '" + p.name + "' " +
                                          ad::shape_string(p.value.shape()) + " does not match declaration '" +
                                          d.name + "' " + ad::shape_string(d.shape));
    }
  }
}

std::size_t Model::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  fail(ErrorCode::kInvalidArgument, "model has no parameter '" + std::string(name) + "'");
}

bool Model::has_parameter(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

const Parameter& Model::parameter(std::string_view name) const { return params_[index_of(name)]; }
Parameter& Model::parameter(std::string_view name) { return params_[index_of(name)]; }

std::size_t Model::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += p.value.data().size();
  }
  return n;
}

void Model::fit_statistics(std::span<const Sample> train) {
  if (train.empty()) fail(ErrorCode::kInvalidArgument, "cannot fit statistics on an empty split");
  const auto& info = system();
  if (cfg_.variant != ModelVariant::kBaseline) {
    if (cfg_.scale_mode != ScaleMode::kPerDataset) return;
    for (const auto& name : info.input_fields) {
      double max_abs = 0;
      for (const auto& s : train) {
        for (double v : s.input(name).values) max_abs = std::max(max_abs, std::abs(v));
      }
      parameter("scale." + name).value[0] = std::max(max_abs, kScaleFloor);
    }
    return;
  }
  // Two-pass mean/std per channel, summed in sample order.
  const std::size_t cin = cfg_.in_channels();
  std::vector<double> sum(cin, 0.0), sq(cin, 0.0), count(cin, 0.0);
  std::vector<double> tsum(info.targets.size(), 0.0), tsq(info.targets.size(), 0.0), tcount(info.targets.size(), 0.0);
  auto channel_values = [&](const Sample& s, std::size_t c, auto&& visit) {
    const std::size_t nf = info.input_fields.size();
    if (c < nf) {
      for (double v : s.input(info.input_fields[c]).values) visit(v, 1.0);
    } else if (c < nf + info.constants.size()) {
      visit(s.constant(info.constants[c - nf]).value(), 1.0);
    } else {
      visit(s.horizon, 1.0);
    }
  };
  for (const auto& s : train) {
    for (std::size_t c = 0; c < cin; ++c) channel_values(s, c, [&](double v, double w) {
      sum[c] += v;
      count[c] += w;
    });
    for (std::size_t k = 0; k < info.targets.size(); ++k) {
      for (double v : s.target(info.targets[k]).values) {
        tsum[k] += v;
        tcount[k] += 1;
      }
    }
  }
  for (std::size_t c = 0; c < cin; ++c) sum[c] /= count[c];
  for (std::size_t k = 0; k < tsum.size(); ++k) tsum[k] /= tcount[k];
  for (const auto& s : train) {
    for (std::size_t c = 0; c < cin; ++c) channel_values(s, c, [&](double v, double) {
      sq[c] += (v - sum[c]) * (v - sum[c]);
    });
    for (std::size_t k = 0; k < info.targets.size(); ++k) {
      for (double v : s.target(info.targets[k]).values) tsq[k] += (v - tsum[k]) * (v - tsum[k]);
    }
  }
  // Channels without spread in the training set are centered only.
  auto spread = [](double ss, double n) {
    const double sd = std::sqrt(ss / n);
    return sd > 1e-12 ? sd : 1.0;
  };
  for (std::size_t c = 0; c < cin; ++c) {
    parameter("norm.in_mean").value[c] = sum[c];
    parameter("norm.in_std").value[c] = spread(sq[c], count[c]);
  }
  for (std::size_t k = 0; k < tsum.size(); ++k) {
    parameter("norm.out_mean").value[k] = tsum[k];
    parameter("norm.out_std").value[k] = spread(tsq[k], tcount[k]);
  }
}

CharacteristicScales model_scales(const Model& model, const Sample& sample) {
  CharacteristicScales scales = characteristic_scales_from_sample(sample);
  if (model.config().variant != ModelVariant::kBaseline && model.config().scale_mode == ScaleMode::kPerDataset) {
    for (const auto& name : model.system().input_fields) {
      scales.set(name, Quantity(model.parameter("scale." + name).value[0], scales.at(name).dim()));
    }
  }
  return scales;
}

ad::Tensor<double> pack_fields(const Sample& sample, const std::vector<std::string>& names, bool targets) {
  const auto& fields = targets ? sample.targets : sample.inputs;
  auto describe = [&] {
    std::string have;
    for (const auto& f : fields) have += (have.empty() ? "" : ",") + f.name;
    std::string want;
    for (const auto& n : names) want += (want.empty() ? "" : ",") + n;
    return std::string(targets ? "target" : "input") + " fields {" + have + "} do not match {" + want + "}";
  };
  if (fields.size() != names.size()) fail(ErrorCode::kFieldSetMismatch, describe());
  Shape shape{names.size()};
  for (auto p : sample.grid.points) shape.push_back(p);
  Tensor<double> out(shape);
  const std::size_t n = sample.grid.size();
  for (std::size_t c = 0; c < names.size(); ++c) {
    auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) { return f.name == names[c]; });
    if (it == fields.end()) fail(ErrorCode::kFieldSetMismatch, describe());
    if (it->values.size() != n) {
      fail(ErrorCode::kShapeMismatch, "field '" + it->name + "' has " + std::to_string(it->values.size()) +
                                          " values, grid has " + std::to_string(n));
    }
    std::copy(it->values.begin(), it->values.end(), out.data().begin() + static_cast<std::ptrdiff_t>(c * n));
  }
  return out;
}

template <class Real>
Var<Real> ffw_forward(Var<Real> x, const LayerVars<Real>& p) {
  auto h = ad::gelu(ad::bias_add(ad::linear(x, p.w1), p.b1));
  return ad::bias_add(ad::linear(h, p.w2), p.b2);
}

template <class Real>
DimNormOutput<Real> dimnorm_forward(const Model& model, ad::Tape<Real>& tape, const Sample& sample,
                                    std::span<const Var<Real>> params) {
  const auto& cfg = model.config();
  const auto& info = model.system();
  if (cfg.variant == ModelVariant::kBaseline) {
    fail(ErrorCode::kInvalidArgument, "the baseline variant has no DimNorm stage");
  }
  if (sample.system != cfg.system) {
    fail(ErrorCode::kSpecMismatch, "model is for " + std::string(system_name(cfg.system)) + ", sample is " +
                                       std::string(system_name(sample.system)));
  }
  if (params.size() != model.parameters().size()) {
    fail(ErrorCode::kShapeMismatch, "dimnorm_forward needs one leaf per model parameter");
  }
  auto param = [&](std::string_view name) { return params[model.index_of(name)]; };

  DimNormOutput<Real> out;
  out.scales = model_scales(model, sample);
  auto x = pack_fields(sample, info.input_fields, false);
  const std::size_t n = sample.grid.size();
  for (std::size_t c = 0; c < info.input_fields.size(); ++c) {
    const double s = out.scales.value(info.input_fields[c]);
    for (std::size_t i = 0; i < n; ++i) x[c * n + i] /= s;
  }
  auto h = ad::layer_norm(tape.constant(to_real<Real>(x)), static_cast<Real>(cfg.layer_norm_eps));

  std::optional<Var<Real>> gate;
  std::vector<int> layout;
  if (cfg.has_gate()) {
    const auto gcfg = cfg.gate();
    layout = gate_layout(gcfg);
    auto c = compute_dimensionless(info.dimless, out.scales);
    Tensor<Real> ct({gcfg.m, 1});
    for (std::size_t i = 0; i < gcfg.m; ++i) ct[i] = static_cast<Real>(gcfg.log_inputs ? std::log(c[i]) : c[i]);
    gate = ffw_forward(tape.constant(std::move(ct)),
                       LayerVars<Real>{param("gate.w1"), param("gate.b1"), param("gate.w2"), param("gate.b2")});
  }

  h = ad::bias_add(ad::linear(h, param("pre.w1")), param("pre.b1"));
  if (gate && cfg.gate_position == GatePosition::kAfterLift) h = ad::gate_mul(h, *gate, layout);
  h = ad::bias_add(ad::linear(ad::gelu(h), param("pre.w2")), param("pre.b2"));
  if (gate && cfg.gate_position == GatePosition::kAfterFfwPre) h = ad::gate_mul(h, *gate, layout);
  out.latent = h;
  return out;
}

template <class Real>
Var<Real> spectral_block_forward(Var<Real> x, const SpectralBlockVars<Real>& block,
                                 const std::vector<std::size_t>& modes, bool activate) {
  const Shape spatial(x.shape().begin() + 1, x.shape().end());
  auto spectral = ad::irfft(ad::spectral_linear(ad::rfft(x), block.spectral, spatial, modes), spatial);
  auto y = ad::bias_add(ad::add(spectral, ad::linear(x, block.bypass)), block.bias);
  return activate ? ad::gelu(y) : y;
}

template <class Real>
ForwardResult<Real> Model::forward(ad::Tape<Real>& tape, const Sample& sample, bool track_grad) const {
  std::vector<Var<Real>> leaves;
  leaves.reserve(params_.size());
  for (const auto& p : params_) leaves.push_back(tape.leaf(to_real<Real>(p.value), track_grad && p.trainable));
  return forward_with(tape, sample, std::move(leaves));
}

template <class Real>
ForwardResult<Real> Model::forward_with(ad::Tape<Real>& tape, const Sample& sample,
                                        std::vector<Var<Real>> params) const {
  const auto& info = system();
  if (sample.system != cfg_.system) {
    fail(ErrorCode::kSpecMismatch, "model is for " + std::string(system_name(cfg_.system)) + ", sample is " +
                                       std::string(system_name(sample.system)));
  }
  if (params.size() != params_.size()) {
    fail(ErrorCode::kShapeMismatch, "forward needs " + std::to_string(params_.size()) + " parameter leaves, got " +
                                        std::to_string(params.size()));
  }
  ForwardResult<Real> r;
  r.params = std::move(params);
  auto param = [&](std::string_view name) { return r.params[index_of(name)]; };

  Var<Real> h;
  if (cfg_.variant == ModelVariant::kBaseline) {
    r.scales = characteristic_scales_from_sample(sample);
    const std::size_t nf = info.input_fields.size();
    const std::size_t cin = cfg_.in_channels();
    const std::size_t n = sample.grid.size();
    auto fields = pack_fields(sample, info.input_fields, false);
    Shape shape{cin};
    for (auto p : sample.grid.points) shape.push_back(p);
    Tensor<double> x(shape);
    for (std::size_t c = 0; c < cin; ++c) {
      double constant = 0;
      if (c >= nf) constant = c < nf + info.constants.size() ? sample.constant(info.constants[c - nf]).value() : sample.horizon;
      for (std::size_t i = 0; i < n; ++i) x[c * n + i] = c < nf ? fields[c * n + i] : constant;
    }
    std::vector<int> identity(cin);
    for (std::size_t c = 0; c < cin; ++c) identity[c] = static_cast<int>(c);
    auto centered = ad::bias_add(tape.constant(to_real<Real>(x)), ad::scale(param("norm.in_mean"), Real(-1)));
    auto standardized = ad::gate_mul(centered, ad::pow(param("norm.in_std"), Real(-1)), identity);
    h = ffw_forward(standardized,
                    LayerVars<Real>{param("pre.w1"), param("pre.b1"), param("pre.w2"), param("pre.b2")});
  } else {
    auto dn = dimnorm_forward<Real>(*this, tape, sample, r.params);
    h = dn.latent;
    r.scales = std::move(dn.scales);
  }
  r.latent = h;

  for (std::size_t d = 0; d < cfg_.depth; ++d) {
    h = spectral_block_forward(
        h, SpectralBlockVars<Real>{param(block_name(d, "spectral")), param(block_name(d, "bypass")),
                                   param(block_name(d, "bias"))},
        cfg_.modes, d + 1 < cfg_.depth);
  }

  const LayerVars<Real> post{param("post.w1"), param("post.b1"), param("post.w2"), param("post.b2")};
  const std::size_t k = info.targets.size();
  if (cfg_.variant == ModelVariant::kBaseline) {
    r.pre_scale = ffw_forward(h, post);
    std::vector<int> identity(k);
    for (std::size_t i = 0; i < k; ++i) identity[i] = static_cast<int>(i);
    r.output = ad::bias_add(ad::gate_mul(r.pre_scale, param("norm.out_std"), identity), param("norm.out_mean"));
    return r;
  }

  auto scales = tape.constant(target_scales<Real>(info, r.scales));
  if (cfg_.post_order == PostOrder::kScaleLast) {
    r.pre_scale = ffw_forward(h, post);
    std::vector<int> identity(k);
    for (std::size_t i = 0; i < k; ++i) identity[i] = static_cast<int>(i);
    r.output = ad::gate_mul(r.pre_scale, scales, identity);
  } else {
    // Latent channel j carries the scale of target floor(j k / n).
    r.pre_scale = h;
    std::vector<int> layout(cfg_.width);
    for (std::size_t j = 0; j < cfg_.width; ++j) layout[j] = static_cast<int>(j * k / cfg_.width);
    r.output = ffw_forward(ad::gate_mul(h, scales, layout), post);
  }
  return r;
}

std::vector<Field> Model::predict(const Sample& sample, Precision precision) const {
  const auto& info = system();
  auto run = [&]<class Real>(ad::Tape<Real>& tape) {
    auto r = forward<Real>(tape, sample, false);
    const auto& y = r.output.value();
    const std::size_t n = sample.grid.size();
    std::vector<Field> out;
    for (std::size_t k = 0; k < info.targets.size(); ++k) {
      Field f{info.targets[k], info.quantity(info.targets[k]).dim, std::vector<double>(n)};
      for (std::size_t i = 0; i < n; ++i) f.values[i] = static_cast<double>(y[k * n + i]);
      out.push_back(std::move(f));
    }
    return out;
  };
  if (precision == Precision::kF32) {
    ad::Tape<float> tape;
    return run(tape);
  }
  ad::Tape<double> tape;
  return run(tape);
}

#define DIMINO_INSTANTIATE_MODEL(R)                                                                              \
  template ForwardResult<R> Model::forward<R>(ad::Tape<R>&, const Sample&, bool) const;                         \
  template ForwardResult<R> Model::forward_with<R>(ad::Tape<R>&, const Sample&, std::vector<Var<R>>) const;     \
  template Var<R> ffw_forward<R>(Var<R>, const LayerVars<R>&);                                                  \
  template DimNormOutput<R> dimnorm_forward<R>(const Model&, ad::Tape<R>&, const Sample&,                       \
                                                std::span<const Var<R>>);                                       \
  template Var<R> spectral_block_forward<R>(Var<R>, const SpectralBlockVars<R>&, const std::vector<std::size_t>&, \
                                            bool);

DIMINO_INSTANTIATE_MODEL(double)
DIMINO_INSTANTIATE_MODEL(float)

}  // namespace dimino
