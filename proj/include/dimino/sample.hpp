#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "dimino/units.hpp"

namespace dimino {

enum class SystemId { kAdvection1d, kBurgers1d, kDiffReact2d, kNsVorticity2d };

std::string_view system_name(SystemId id);
// Throws kInvalidArgument for names outside the four registered systems.
SystemId parse_system(std::string_view name);

// Uniform periodic grid of rank 1 or 2, row-major storage.
struct Grid {
  std::vector<std::size_t> points;
  std::vector<double> extent;
  std::vector<bool> periodic;

  static Grid line(std::size_t n, double length = 1.0);
  static Grid square(std::size_t n, double length = 1.0);

  int rank() const { return static_cast<int>(points.size()); }
  std::size_t size() const;
  double spacing(int axis) const { return extent[axis] / static_cast<double>(points[axis]); }

  // Throws kInvalidArgument unless rank is 1 or 2, sizes are powers of two
  // and extents are positive.
  void validate() const;

  friend bool operator==(const Grid&, const Grid&) = default;
};

struct Field {
  std::string name;
  Dimension dim;
  std::vector<double> values;
};

struct NamedQuantity {
  std::string name;
  Quantity quantity;
};

// One operator-learning example: input fields and constants at t = 0, the
// prediction interval T and the target fields at t = T.
struct Sample {
  SystemId system = SystemId::kAdvection1d;
  Grid grid;
  std::vector<Field> inputs;
  std::vector<NamedQuantity> constants;
  double horizon = 1.0;
  std::vector<Field> targets;

  const Field& input(std::string_view name) const;
  Field& input(std::string_view name);
  const Field& target(std::string_view name) const;
  const Quantity& constant(std::string_view name) const;
  bool has_constant(std::string_view name) const;
};

}  // namespace dimino
