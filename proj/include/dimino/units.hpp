#pragma once

#include <array>
#include <string>

namespace dimino {

// Integer exponents over the base units (mass, length, time).
struct Dimension {
  std::array<int, 3> exponents{0, 0, 0};

  static constexpr Dimension dimensionless() { return {}; }
  static constexpr Dimension of(int mass, int length, int time) {
    return Dimension{{mass, length, time}};
  }

  constexpr int mass() const { return exponents[0]; }
  constexpr int length() const { return exponents[1]; }
  constexpr int time() const { return exponents[2]; }

  constexpr bool is_dimensionless() const {
    return exponents[0] == 0 && exponents[1] == 0 && exponents[2] == 0;
  }

  constexpr Dimension pow(int k) const {
    return of(exponents[0] * k, exponents[1] * k, exponents[2] * k);
  }
  constexpr Dimension inverse() const { return pow(-1); }

  friend constexpr Dimension operator*(const Dimension& a, const Dimension& b) {
    return of(a.exponents[0] + b.exponents[0], a.exponents[1] + b.exponents[1],
              a.exponents[2] + b.exponents[2]);
  }
  friend constexpr Dimension operator/(const Dimension& a, const Dimension& b) {
    return a * b.inverse();
  }
  friend constexpr bool operator==(const Dimension&, const Dimension&) = default;

  // "[M1,L-2,T-1]"
  std::string to_string() const;
};

// A finite scalar tagged with its Dimension.
class Quantity {
 public:
  Quantity() = default;
  Quantity(double value, Dimension dim);

  double value() const { return value_; }
  const Dimension& dim() const { return dim_; }

  Quantity operator-() const { return Quantity(-value_, dim_); }

  friend Quantity operator+(const Quantity& a, const Quantity& b);
  friend Quantity operator-(const Quantity& a, const Quantity& b);
  friend Quantity operator*(const Quantity& a, const Quantity& b);
  friend Quantity operator/(const Quantity& a, const Quantity& b);

 private:
  double value_ = 0.0;
  Dimension dim_{};
};

struct DimOp {
  enum class Kind { kMul, kDiv, kPow };
  Kind kind = Kind::kMul;
  double exponent = 1.0;  // only read for kPow

  static DimOp mul() { return {Kind::kMul, 1.0}; }
  static DimOp div() { return {Kind::kDiv, 1.0}; }
  static DimOp pow(double k) { return {Kind::kPow, k}; }
};

// Unit algebra entry point: mul/div combine a with b, pow raises a to an
// integer exponent (b is ignored).
Quantity dim_combine(const Quantity& a, const Quantity& b, DimOp op);

}  // namespace dimino
