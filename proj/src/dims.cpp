#include "dimino/dims.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dimino/error.hpp"

namespace dimino {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDivisionByZero: return "DivisionByZero";
    case ErrorCode::kNonIntegerPower: return "NonIntegerPower";
    case ErrorCode::kMissingScale: return "MissingScale";
    case ErrorCode::kNonDimensionlessMonomial: return "NonDimensionlessMonomial";
    case ErrorCode::kEmptyField: return "EmptyField";
    case ErrorCode::kUnknownSystemRule: return "UnknownSystemRule";
    case ErrorCode::kStepUnstable: return "StepUnstable";
    case ErrorCode::kNonZeroMeanInput: return "NonZeroMeanInput";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kUnsupportedPrimitive: return "UnsupportedPrimitive";
    case ErrorCode::kNonScalarLoss: return "NonScalarLoss";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kFieldSetMismatch: return "FieldSetMismatch";
    case ErrorCode::kModeOverflow: return "ModeOverflow";
    case ErrorCode::kCorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::kNaNLoss: return "NaNLoss";
    case ErrorCode::kMissingSplit: return "MissingSplit";
    case ErrorCode::kSpecMismatch: return "SpecMismatch";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

// ---------------------------------------------------------------- units

std::string Dimension::to_string() const {
  std::ostringstream out;
  out << "[M" << exponents[0] << ",L" << exponents[1] << ",T" << exponents[2] << "]";
  return out.str();
}

Quantity::Quantity(double value, Dimension dim) : value_(value), dim_(dim) {
  if (!std::isfinite(value)) {
    fail(ErrorCode::kInvalidArgument, "quantity value must be finite");
  }
}

Quantity operator+(const Quantity& a, const Quantity& b) {
  if (a.dim() != b.dim()) {
    fail(ErrorCode::kDimensionMismatch,
         "cannot add " + a.dim().to_string() + " and " + b.dim().to_string());
  }
  return Quantity(a.value() + b.value(), a.dim());
}

Quantity operator-(const Quantity& a, const Quantity& b) {
  if (a.dim() != b.dim()) {
    fail(ErrorCode::kDimensionMismatch,
         "cannot subtract " + b.dim().to_string() + " from " + a.dim().to_string());
  }
  return Quantity(a.value() - b.value(), a.dim());
}

Quantity operator*(const Quantity& a, const Quantity& b) {
  return Quantity(a.value() * b.value(), a.dim() * b.dim());
}

Quantity operator/(const Quantity& a, const Quantity& b) {
  if (b.value() == 0.0) fail(ErrorCode::kDivisionByZero, "division by a zero quantity");
  return Quantity(a.value() / b.value(), a.dim() / b.dim());
}

Quantity dim_combine(const Quantity& a, const Quantity& b, DimOp op) {
  switch (op.kind) {
    case DimOp::Kind::kMul:
      return a * b;
    case DimOp::Kind::kDiv:
      return a / b;
    case DimOp::Kind::kPow: {
      const double k = op.exponent;
      if (!std::isfinite(k) || std::floor(k) != k) {
        fail(ErrorCode::kNonIntegerPower, "dimensioned power needs an integer exponent");
      }
      const int ik = static_cast<int>(k);
      if (ik < 0 && a.value() == 0.0) {
        fail(ErrorCode::kDivisionByZero, "negative power of a zero quantity");
      }
      return Quantity(std::pow(a.value(), k), a.dim().pow(ik));
    }
  }
  fail(ErrorCode::kInvalidArgument, "unknown unit operation");
}

// ---------------------------------------------------------------- sample

std::string_view system_name(SystemId id) {
  switch (id) {
    case SystemId::kAdvection1d: return "advection1d";
    case SystemId::kBurgers1d: return "burgers1d";
    case SystemId::kDiffReact2d: return "diffreact2d";
    case SystemId::kNsVorticity2d: return "ns-vorticity2d";
  }
  return "unknown";
}

SystemId parse_system(std::string_view name) {
  for (auto id : {SystemId::kAdvection1d, SystemId::kBurgers1d, SystemId::kDiffReact2d,
                  SystemId::kNsVorticity2d}) {
    if (system_name(id) == name) return id;
  }
  fail(ErrorCode::kInvalidArgument, "unknown system '" + std::string(name) + "'");
}

Grid Grid::line(std::size_t n, double length) {
  Grid g{{n}, {length}, {true}};
  g.validate();
  return g;
}

Grid Grid::square(std::size_t n, double length) {
  Grid g{{n, n}, {length, length}, {true, true}};
  g.validate();
  return g;
}

std::size_t Grid::size() const {
  std::size_t n = 1;
  for (auto p : points) n *= p;
  return n;
}

void Grid::validate() const {
  if (points.empty() || points.size() > 2 || extent.size() != points.size() ||
      periodic.size() != points.size()) {
    fail(ErrorCode::kInvalidArgument, "grid rank must be 1 or 2");
  }
  for (std::size_t a = 0; a < points.size(); ++a) {
    const auto n = points[a];
    if (n < 2 || (n & (n - 1)) != 0) {
      fail(ErrorCode::kInvalidArgument, "grid points per axis must be a power of two");
    }
    if (!(extent[a] > 0.0)) fail(ErrorCode::kInvalidArgument, "grid extent must be positive");
  }
}

namespace {

template <class Vec>
auto find_named(Vec& v, std::string_view name) {
  return std::find_if(v.begin(), v.end(), [&](const auto& f) { return f.name == name; });
}

}  // namespace

const Field& Sample::input(std::string_view name) const {
  auto it = find_named(inputs, name);
  if (it == inputs.end()) fail(ErrorCode::kFieldSetMismatch, "sample has no input field '" + std::string(name) + "'");
  return *it;
}

Field& Sample::input(std::string_view name) {
  auto it = find_named(inputs, name);
  if (it == inputs.end()) fail(ErrorCode::kFieldSetMismatch, "sample has no input field '" + std::string(name) + "'");
  return *it;
}

const Field& Sample::target(std::string_view name) const {
  auto it = find_named(targets, name);
  if (it == targets.end()) fail(ErrorCode::kFieldSetMismatch, "sample has no target field '" + std::string(name) + "'");
  return *it;
}

const Quantity& Sample::constant(std::string_view name) const {
  auto it = find_named(constants, name);
  if (it == constants.end()) fail(ErrorCode::kMissingScale, "sample has no constant '" + std::string(name) + "'");
  return it->quantity;
}

bool Sample::has_constant(std::string_view name) const {
  return find_named(constants, name) != constants.end();
}

// ---------------------------------------------------------------- scales

bool CharacteristicScales::contains(std::string_view name) const {
  return scales_.find(name) != scales_.end();
}

const Quantity& CharacteristicScales::at(std::string_view name) const {
  auto it = scales_.find(name);
  if (it == scales_.end()) {
    fail(ErrorCode::kMissingScale, "no characteristic scale for '" + std::string(name) + "'");
  }
  return it->second;
}

std::vector<std::string> DimlessSpec::names() const {
  std::vector<std::string> out;
  for (const auto& n : numbers) out.push_back(n.name);
  return out;
}

int SimilarityRule::exponent_of(std::string_view name) const {
  for (const auto& [n, e] : exponents) {
    if (n == name) return e;
  }
  return 0;
}

const QuantityDecl& SystemInfo::quantity(std::string_view qname) const {
  auto it = find_named(quantities, qname);
  if (it == quantities.end()) {
    fail(ErrorCode::kMissingScale, "system " + name + " declares no quantity '" + std::string(qname) + "'");
  }
  return *it;
}

CharacteristicScales characteristic_scales_from_sample(const Sample& sample) {
  if (sample.inputs.empty()) fail(ErrorCode::kEmptyField, "sample has no input fields");
  CharacteristicScales scales;
  for (const auto& field : sample.inputs) {
    if (field.values.empty()) {
      fail(ErrorCode::kEmptyField, "input field '" + field.name + "' is empty");
    }
    double max_abs = 0.0;
    for (double v : field.values) max_abs = std::max(max_abs, std::abs(v));
    scales.set(field.name, Quantity(std::max(max_abs, kScaleFloor), field.dim));
  }
  for (const auto& c : sample.constants) {
    scales.set(c.name, Quantity(std::max(std::abs(c.quantity.value()), kScaleFloor), c.quantity.dim()));
  }
  scales.set("L", Quantity(sample.grid.extent.at(0), Dimension::of(0, 1, 0)));
  scales.set("T", Quantity(sample.horizon, Dimension::of(0, 0, 1)));
  return scales;
}

std::vector<double> compute_dimensionless(const DimlessSpec& spec,
                                          const CharacteristicScales& scales) {
  std::vector<double> out;
  out.reserve(spec.numbers.size());
  for (const auto& number : spec.numbers) {
    double value = 1.0;
    Dimension dim;
    for (const auto& [name, exponent] : number.factors) {
      const Quantity& q = scales.at(name);
      if (!(q.value() > 0.0)) {
        fail(ErrorCode::kInvalidArgument, "scale '" + name + "' must be positive");
      }
      value *= std::pow(q.value(), exponent);
      dim = dim * q.dim().pow(exponent);
    }
    if (!dim.is_dimensionless()) {
      fail(ErrorCode::kNonDimensionlessMonomial,
           "group " + number.name + " of " + spec.id + " has dimension " + dim.to_string());
    }
    if (number.root == 2) {
      value = std::sqrt(value);
    } else if (number.root != 1) {
      value = std::pow(value, 1.0 / number.root);
    }
    out.push_back(value);
  }
  return out;
}

Sample nondimensionalize(const Sample& sample, const CharacteristicScales& scales) {
  const auto& spec = dimless_spec(sample.system);
  Sample out;
  out.system = sample.system;
  out.grid = sample.grid;
  auto scale_field = [&](const Field& f) {
    const double s = scales.value(f.name);
    Field g{f.name, Dimension::dimensionless(), f.values};
    for (double& v : g.values) v /= s;
    return g;
  };
  for (const auto& f : sample.inputs) out.inputs.push_back(scale_field(f));
  for (const auto& f : sample.targets) out.targets.push_back(scale_field(f));
  const auto numbers = compute_dimensionless(spec, scales);
  for (std::size_t i = 0; i < numbers.size(); ++i) {
    out.constants.push_back({spec.numbers[i].name, Quantity(numbers[i], Dimension::dimensionless())});
  }
  out.horizon = sample.horizon / scales.value("T");
  return out;
}

std::vector<double> redimensionalize(std::span<const double> field,
                                     const CharacteristicScales& scales,
                                     std::string_view target_name) {
  const double s = scales.value(target_name);
  std::vector<double> out(field.begin(), field.end());
  for (double& v : out) v *= s;
  return out;
}

Sample similar_transform(const Sample& sample, double p) {
  if (!(p > 0.0) || !std::isfinite(p)) {
    fail(ErrorCode::kInvalidArgument, "similar transform needs p > 0");
  }
  const auto& info = system_info(sample.system);
  if (info.rule.exponents.empty()) {
    fail(ErrorCode::kUnknownSystemRule, "no similar-transform rule for " + info.name);
  }
  auto factor = [&](std::string_view name) {
    const int e = info.rule.exponent_of(name);
    return e == 0 ? 1.0 : std::pow(p, e);
  };
  Sample out = sample;
  for (auto& f : out.inputs) {
    const double s = factor(f.name);
    for (double& v : f.values) v *= s;
  }
  for (auto& c : out.constants) {
    c.quantity = Quantity(c.quantity.value() * factor(c.name), c.quantity.dim());
  }
  out.horizon = sample.horizon * factor("T");
  if (info.rule.exact) {
    for (auto& f : out.targets) {
      const double s = factor(f.name);
      for (double& v : f.values) v *= s;
    }
  } else {
    out.targets.clear();
  }
  return out;
}

}  // namespace dimino
