#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ssd {

/// Channels x height x width extent of an image tensor.
struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Rank-3 grid of doubles stored channel-major, row-major:
/// index = (c * H + y) * W + x.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor constant(Shape shape, double value) { return Tensor(shape, value); }

  const Shape& shape() const { return shape_; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[index(c, y, x)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& vector() const { return data_; }

  std::span<double> plane(int c);
  std::span<const double> plane(int c) const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double s);
  /// this += s * other
  Tensor& axpy(double s, const Tensor& other);

  double dot(const Tensor& other) const;
  double norm() const;
  double max_abs() const;

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x;
  }

  Shape shape_;
  std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(double s, Tensor a);

/// Largest |a_i - b_i|; throws ShapeError on mismatch.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Throws ShapeError naming `what` unless `got == want`.
void require_shape(const Shape& got, const Shape& want, const char* what);

}  // namespace ssd
