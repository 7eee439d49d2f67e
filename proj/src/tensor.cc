#include "ssd/tensor.h"

#include <algorithm>
#include <cmath>

#include "ssd/errors.h"

namespace ssd {

std::string Shape::str() const {
  return std::to_string(channels) + "x" + std::to_string(height) + "x" +
         std::to_string(width);
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {
  if (shape.channels < 0 || shape.height < 0 || shape.width < 0) {
    throw ShapeError("negative tensor extent " + shape.str());
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape.numel()) {
    throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                     " does not match shape " + shape.str());
  }
}

std::span<double> Tensor::plane(int c) {
  const std::size_t n = static_cast<std::size_t>(shape_.height) * shape_.width;
  return std::span<double>(data_).subspan(c * n, n);
}

std::span<const double> Tensor::plane(int c) const {
  const std::size_t n = static_cast<std::size_t>(shape_.height) * shape_.width;
  return std::span<const double>(data_).subspan(c * n, n);
}

Tensor& Tensor::operator+=(const Tensor& other) { return axpy(1.0, other); }
Tensor& Tensor::operator-=(const Tensor& other) { return axpy(-1.0, other); }

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Tensor& Tensor::axpy(double s, const Tensor& other) {
  require_shape(other.shape_, shape_, "axpy operand");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
  return *this;
}

double Tensor::dot(const Tensor& other) const {
  require_shape(other.shape_, shape_, "dot operand");
  double acc = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) acc += data_[i] * other.data_[i];
  return acc;
}

double Tensor::norm() const { return std::sqrt(dot(*this)); }

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(double s, Tensor a) { return a *= s; }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_shape(b.shape(), a.shape(), "max_abs_diff operand");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void require_shape(const Shape& got, const Shape& want, const char* what) {
  if (!(got == want)) {
    throw ShapeError(std::string(what) + ": expected " + want.str() + ", got " +
                     got.str());
  }
}

}  // namespace ssd
