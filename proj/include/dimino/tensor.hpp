#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dimino::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

enum class ElementKind { kReal, kComplex };

// Dense row-major array. Complex tensors store interleaved (re, im) pairs and
// only occur inside the spectral primitives.
template <class Real>
class Tensor {
 public:
  using value_type = Real;
  using complex_type = std::complex<Real>;

  Tensor() = default;
  explicit Tensor(Shape shape, ElementKind kind = ElementKind::kReal);
  Tensor(Shape shape, std::vector<Real> data, ElementKind kind = ElementKind::kReal);

  static Tensor scalar(Real v) { return Tensor({1}, std::vector<Real>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return ad::numel(shape_); }
  ElementKind kind() const { return kind_; }
  bool is_complex() const { return kind_ == ElementKind::kComplex; }
  bool empty() const { return data_.empty(); }

  // Raw storage; 2 * numel() entries for complex tensors.
  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  std::span<complex_type> cdata();
  std::span<const complex_type> cdata() const;

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }
  Real item() const;

  void fill(Real v);
  // this += other, same shape and kind.
  void accumulate(const Tensor& other);

  template <class Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, std::vector<Other>(data_.begin(), data_.end()), kind_);
  }

  bool same_layout(const Tensor& other) const {
    return shape_ == other.shape_ && kind_ == other.kind_;
  }

 private:
  Shape shape_;
  ElementKind kind_ = ElementKind::kReal;
  std::vector<Real> data_;
};

extern template class Tensor<double>;
extern template class Tensor<float>;

}  // namespace dimino::ad
