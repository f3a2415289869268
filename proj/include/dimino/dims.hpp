#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dimino/sample.hpp"
#include "dimino/units.hpp"

namespace dimino {

inline constexpr double kScaleFloor = 1e-8;

// Characteristic scale per field or constant name (the e0 of a sample).
class CharacteristicScales {
 public:
  void set(std::string name, Quantity q) { scales_[std::move(name)] = q; }
  bool contains(std::string_view name) const;
  // Throws kMissingScale.
  const Quantity& at(std::string_view name) const;
  double value(std::string_view name) const { return at(name).value(); }

  auto begin() const { return scales_.begin(); }
  auto end() const { return scales_.end(); }
  std::size_t size() const { return scales_.size(); }

 private:
  std::map<std::string, Quantity, std::less<>> scales_;
};

// value = (prod_i scale_i^e_i)^(1/root). root > 1 only where a group is
// defined through a square root (the Froude number).
struct Monomial {
  std::string name;
  std::vector<std::pair<std::string, int>> factors;
  int root = 1;
};

struct DimlessSpec {
  std::string id;  // "<system>/v<version>"
  SystemId system = SystemId::kAdvection1d;
  std::vector<Monomial> numbers;

  std::size_t size() const { return numbers.size(); }
  std::vector<std::string> names() const;
};

// Exponent of p applied to each named quantity under a similar transform.
struct SimilarityRule {
  std::vector<std::pair<std::string, int>> exponents;
  // True when the rule maps solutions onto solutions (targets can be carried
  // along); false when it only preserves the registered groups.
  bool exact = false;

  int exponent_of(std::string_view name) const;
};

struct QuantityDecl {
  enum class Role { kField, kConstant, kLength, kTime };
  std::string name;
  Role role = Role::kField;
  Dimension dim;
};

struct SystemInfo {
  SystemId id = SystemId::kAdvection1d;
  std::string name;
  int rank = 1;
  std::vector<QuantityDecl> quantities;
  std::vector<std::string> input_fields;
  std::vector<std::string> constants;
  std::vector<std::string> targets;
  DimlessSpec dimless;
  SimilarityRule rule;

  const QuantityDecl& quantity(std::string_view name) const;
};

struct Registry {
  int version = 0;
  std::vector<SystemInfo> systems;
};

// The registry text shipped in the binary.
std::string_view registry_text();
// Parses and machine-checks a registry table: every monomial must have a zero
// composite dimension (kNonDimensionlessMonomial otherwise).
Registry parse_registry(std::string_view text);
const Registry& registry();
const SystemInfo& system_info(SystemId id);
const DimlessSpec& dimless_spec(SystemId id);

// Max-abs per input field (floored), |value| per constant (floored), the
// domain extent as "L" and the prediction interval as "T".
CharacteristicScales characteristic_scales_from_sample(const Sample& sample);

std::vector<double> compute_dimensionless(const DimlessSpec& spec,
                                          const CharacteristicScales& scales);

// Fields divided by their scales; constants replaced by the dimensionless
// numbers of the system; horizon divided by "T".
Sample nondimensionalize(const Sample& sample, const CharacteristicScales& scales);

std::vector<double> redimensionalize(std::span<const double> field,
                                     const CharacteristicScales& scales,
                                     std::string_view target_name);

Sample similar_transform(const Sample& sample, double p);

}  // namespace dimino
