// Dense row-major 64-bit float tensor. Plain value type: copying copies data.
#pragma once

#include <cstdint>
#include <memory>
#include <vector>

namespace embryostage::ad {

class Tensor {
 public:
  Tensor() = default;
  Tensor(const Tensor& other);
  Tensor(Tensor&&) noexcept = default;
  Tensor& operator=(const Tensor& other);
  Tensor& operator=(Tensor&&) noexcept = default;

  static Tensor zeros(std::vector<std::int64_t> shape);
  static Tensor full(std::vector<std::int64_t> shape, double value);
  /// Uninitialized storage; callers must overwrite every element.
  static Tensor uninit(std::vector<std::int64_t> shape);
  static Tensor from_values(std::vector<std::int64_t> shape, std::vector<double> values);
  /// Square identity as a [dim, dim] tensor.
  static Tensor identity(std::int64_t dim);

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t dim(std::size_t axis) const { return shape_[axis]; }
  std::size_t rank() const { return shape_.size(); }
  std::int64_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  /// Rows/cols of a rank-1 or rank-2 tensor ([n] is treated as [1, n]).
  std::int64_t rows() const;
  std::int64_t cols() const;

  double* data() { return data_.get(); }
  const double* data() const { return data_.get(); }
  double& operator[](std::int64_t i) { return data_[i]; }
  double operator[](std::int64_t i) const { return data_[i]; }
  double& at(std::int64_t r, std::int64_t c) { return data_[r * cols() + c]; }
  double at(std::int64_t r, std::int64_t c) const { return data_[r * cols() + c]; }

  void fill(double value);
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  explicit Tensor(std::vector<std::int64_t> shape, bool zero_fill);

  std::vector<std::int64_t> shape_;
  std::int64_t size_ = 0;
  std::unique_ptr<double[]> data_;
};

}  // namespace embryostage::ad
