#include "dimino/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "dimino/error.hpp"

namespace dimino::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << "]";
  return out.str();
}

template <class Real>
Tensor<Real>::Tensor(Shape shape, ElementKind kind)
    : shape_(std::move(shape)),
      kind_(kind),
      data_(ad::numel(shape_) * (kind == ElementKind::kComplex ? 2 : 1), Real(0)) {}

template <class Real>
Tensor<Real>::Tensor(Shape shape, std::vector<Real> data, ElementKind kind)
    : shape_(std::move(shape)), kind_(kind), data_(std::move(data)) {
  const std::size_t expected = ad::numel(shape_) * (kind == ElementKind::kComplex ? 2 : 1);
  if (data_.size() != expected) {
    fail(ErrorCode::kShapeMismatch, "tensor data has " + std::to_string(data_.size()) +
                                        " entries, shape " + shape_string(shape_) + " needs " +
                                        std::to_string(expected));
  }
}

template <class Real>
std::span<typename Tensor<Real>::complex_type> Tensor<Real>::cdata() {
  if (!is_complex()) fail(ErrorCode::kShapeMismatch, "complex view of a real tensor");
  return {reinterpret_cast<complex_type*>(data_.data()), numel()};
}

template <class Real>
std::span<const typename Tensor<Real>::complex_type> Tensor<Real>::cdata() const {
  if (!is_complex()) fail(ErrorCode::kShapeMismatch, "complex view of a real tensor");
  return {reinterpret_cast<const complex_type*>(data_.data()), numel()};
}

template <class Real>
Real Tensor<Real>::item() const {
  if (numel() != 1 || is_complex()) fail(ErrorCode::kNonScalarLoss, "item() of a non-scalar tensor");
  return data_[0];
}

template <class Real>
void Tensor<Real>::fill(Real v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <class Real>
void Tensor<Real>::accumulate(const Tensor& other) {
  if (!same_layout(other)) {
    fail(ErrorCode::kShapeMismatch, "accumulate " + shape_string(other.shape_) + " into " + shape_string(shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

template class Tensor<double>;
template class Tensor<float>;

}  // namespace dimino::ad
