#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace adagtcn {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major tensor of 64-bit floats. Tensors are plain values; the
/// computation tape (tape.hpp) attaches gradient bookkeeping to them.
class Tensor {
 public:
  Tensor() = default;

  /// Zero-filled tensor of the given shape.
  explicit Tensor(Shape shape);

  Tensor(Shape shape, double fill);

  /// Takes ownership of `data`; size must equal the shape's element count.
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);

  /// 2-D tensor from row lists, e.g. Tensor::from_rows({{1, 2}, {3, 4}}).
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  /// 1-D tensor from a flat list.
  static Tensor from_values(std::initializer_list<double> values);

  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }
  bool is_scalar() const { return data_.size() == 1; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const double* raw() const { return data_.data(); }
  double* raw() { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 2-D / 3-D element access (unchecked).
  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  /// Exact elementwise equality (bit-level modulo -0.0 == 0.0).
  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

  /// Max absolute elementwise difference; shapes must agree.
  double max_abs_diff(const Tensor& other) const;

  bool all_finite() const;
  double max_abs() const;

  std::string shape_str() const { return shape_string(shape_); }

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace adagtcn
