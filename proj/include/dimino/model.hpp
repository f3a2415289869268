#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dimino/dims.hpp"
#include "dimino/ops.hpp"

namespace dimino {

enum class Precision { kF64, kF32 };
std::string_view precision_name(Precision p);
Precision parse_precision(std::string_view s);

enum class ModelVariant {
  kDimINO,    // full pipeline with DimGate
  kGateFree,  // same pipeline, gate removed
  kBaseline,  // raw standardized fields plus constants as channels, no nondimensionalization
};

// Where the gate multiplies the latent: after the whole pre-FFW, or between
// its lifting layer and its second layer.
enum class GatePosition { kAfterFfwPre, kAfterLift };

// kDefinition: FFW_post(phi_dim(latent)); kScaleLast: phi_dim(FFW_post(latent)).
// Only kScaleLast makes the output an exact ratio under similar transforms.
enum class PostOrder { kDefinition, kScaleLast };

// Field scales either per sample, or fixed from the training set (constants
// and the horizon stay per sample either way).
enum class ScaleMode { kPerSample, kPerDataset };

std::string_view variant_name(ModelVariant v);
ModelVariant parse_variant(std::string_view s);
std::string_view gate_position_name(GatePosition g);
GatePosition parse_gate_position(std::string_view s);
std::string_view post_order_name(PostOrder p);
PostOrder parse_post_order(std::string_view s);
std::string_view scale_mode_name(ScaleMode s);
ScaleMode parse_scale_mode(std::string_view s);

struct DimGateConfig {
  std::size_t n = 32;  // latent channels
  std::size_t m = 0;   // dimensionless numbers
  double gamma = 0.5;  // skip fraction
  bool log_inputs = true;

  // l = floor((1 - gamma) n / m), 0 when m = 0.
  std::size_t block() const;
  void validate() const;
};

// Channel -> gate index, -1 for the ones-padding.
std::vector<int> gate_layout(const DimGateConfig& cfg);
// c' with c'[i] = c[i / l] on [0, m l) and 1 elsewhere. kLengthMismatch when
// c does not have m entries.
std::vector<double> expand_gate(std::span<const double> c, const DimGateConfig& cfg);

struct ModelConfig {
  SystemId system = SystemId::kAdvection1d;
  ModelVariant variant = ModelVariant::kDimINO;
  std::size_t width = 32;
  std::size_t depth = 4;
  std::vector<std::size_t> modes;  // per spatial axis
  double gamma = 0.5;
  bool log_gate_inputs = true;
  GatePosition gate_position = GatePosition::kAfterFfwPre;
  PostOrder post_order = PostOrder::kDefinition;
  ScaleMode scale_mode = ScaleMode::kPerSample;
  double layer_norm_eps = 1e-5;
  std::uint64_t seed = 0;

  std::size_t in_channels() const;
  std::size_t out_channels() const;
  DimGateConfig gate() const;
  bool has_gate() const;
  void validate() const;
};

// Defaults: width 32, depth 4, 16 modes in 1D and 12 per axis in 2D.
ModelConfig default_model_config(SystemId system, ModelVariant variant = ModelVariant::kDimINO);

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(std::string_view text);

// Parameters are stored in double; forward passes cast them to the working
// precision. Buffers (trainable = false) hold statistics fixed from the
// training set.
struct Parameter {
  std::string name;
  ad::Tensor<double> value;
  bool trainable = true;
};

template <class Real>
struct ForwardResult {
  ad::Var<Real> output;     // [targets, spatial...] in physical units
  ad::Var<Real> pre_scale;  // the dimensionless prediction right before phi_dim
  ad::Var<Real> latent;     // DimNorm output (or the lifted input for the baseline)
  CharacteristicScales scales;
  std::vector<ad::Var<Real>> params;  // one leaf per model parameter, declaration order
};

class Model {
 public:
  Model(ModelConfig cfg, std::vector<Parameter> params);
  // Fresh initialization from cfg.seed.
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  const SystemInfo& system() const { return system_info(cfg_.system); }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  const Parameter& parameter(std::string_view name) const;
  Parameter& parameter(std::string_view name);
  // Declaration index of a parameter; kInvalidArgument when absent.
  std::size_t index_of(std::string_view name) const;
  bool has_parameter(std::string_view name) const;
  std::size_t trainable_count() const;

  // Baseline input/output standardization and per-dataset field scales.
  // Call once with the training split before training.
  void fit_statistics(std::span<const Sample> train);

  // Builds the forward graph. Parameters become leaves that require a
  // gradient when `track_grad` is set.
  template <class Real>
  ForwardResult<Real> forward(ad::Tape<Real>& tape, const Sample& sample, bool track_grad = false) const;
  // Same graph on caller-provided parameter leaves (declaration order).
  template <class Real>
  ForwardResult<Real> forward_with(ad::Tape<Real>& tape, const Sample& sample,
                                   std::vector<ad::Var<Real>> params) const;

  // Physical-unit prediction, one field per target.
  std::vector<Field> predict(const Sample& sample, Precision precision = Precision::kF64) const;

 private:
  ModelConfig cfg_;
  std::vector<Parameter> params_;
};

// Scales used for a sample under the model's scale mode.
CharacteristicScales model_scales(const Model& model, const Sample& sample);

// Packs the named fields of a sample into [C, spatial...]. kFieldSetMismatch
// when the sample does not carry exactly the fields the system declares.
ad::Tensor<double> pack_fields(const Sample& sample, const std::vector<std::string>& names, bool targets);

// Two-layer feed-forward block: linear, bias, gelu, linear, bias.
template <class Real>
struct LayerVars {
  ad::Var<Real> w1, b1, w2, b2;
};

template <class Real>
ad::Var<Real> ffw_forward(ad::Var<Real> x, const LayerVars<Real>& p);

template <class Real>
struct DimNormOutput {
  ad::Var<Real> latent;
  CharacteristicScales scales;
};

// The DimNorm stage of a model (variant kDimINO or kGateFree) on its own
// tape; `params` are the model's parameter leaves in declaration order.
template <class Real>
DimNormOutput<Real> dimnorm_forward(const Model& model, ad::Tape<Real>& tape, const Sample& sample,
                                    std::span<const ad::Var<Real>> params);

template <class Real>
struct SpectralBlockVars {
  ad::Var<Real> spectral;  // complex [width, width, modes...]
  ad::Var<Real> bypass;    // [width, width]
  ad::Var<Real> bias;      // [width]
};

// irfft(W * truncated rfft(x)) + bypass x + bias, followed by gelu when
// `activate` is set.
template <class Real>
ad::Var<Real> spectral_block_forward(ad::Var<Real> x, const SpectralBlockVars<Real>& block,
                                     const std::vector<std::size_t>& modes, bool activate);

// Checkpoint: magic "DINOCKPT", u32 version, u64 length + canonical JSON
// config, parameters in declaration order, trailing u64 FNV-1a of all
// preceding bytes. Loading throws kCorruptCheckpoint on any mismatch.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_model(const Model& model);
Model deserialize_model(std::span<const std::uint8_t> bytes);

}  // namespace dimino
