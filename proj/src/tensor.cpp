#include "embryostage/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace embryostage::ad {

namespace {
std::int64_t shape_size(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::int64_t> shape, bool zero_fill)
    : shape_(std::move(shape)), size_(shape_size(shape_)) {
  data_ = std::unique_ptr<double[]>(zero_fill ? new double[size_]()
                                              : new double[size_]);
}

Tensor::Tensor(const Tensor& other) : shape_(other.shape_), size_(other.size_) {
  if (other.data_) {
    data_ = std::unique_ptr<double[]>(new double[size_]);
    std::memcpy(data_.get(), other.data_.get(), sizeof(double) * static_cast<std::size_t>(size_));
  }
}

Tensor& Tensor::operator=(const Tensor& other) {
  if (this == &other) return *this;
  Tensor copy(other);
  *this = std::move(copy);
  return *this;
}

Tensor Tensor::zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape), true); }

Tensor Tensor::uninit(std::vector<std::int64_t> shape) { return Tensor(std::move(shape), false); }

Tensor Tensor::full(std::vector<std::int64_t> shape, double value) {
  Tensor t(std::move(shape), false);
  t.fill(value);
  return t;
}

Tensor Tensor::from_values(std::vector<std::int64_t> shape, std::vector<double> values) {
  Tensor t(std::move(shape), false);
  if (static_cast<std::int64_t>(values.size()) != t.size_) {
    throw std::invalid_argument("Tensor::from_values: size mismatch");
  }
  std::copy(values.begin(), values.end(), t.data_.get());
  return t;
}

Tensor Tensor::identity(std::int64_t dim) {
  Tensor t = zeros({dim, dim});
  for (std::int64_t i = 0; i < dim; ++i) t.at(i, i) = 1.0;
  return t;
}

std::int64_t Tensor::rows() const {
  if (shape_.size() == 1) return 1;
  if (shape_.size() == 2) return shape_[0];
  throw std::invalid_argument("Tensor::rows: rank > 2");
}

std::int64_t Tensor::cols() const {
  if (shape_.size() == 1) return shape_[0];
  if (shape_.size() == 2) return shape_[1];
  throw std::invalid_argument("Tensor::cols: rank > 2");
}

void Tensor::fill(double value) {
  std::fill_n(data_.get(), size_, value);
}

bool Tensor::all_finite() const {
  for (std::int64_t i = 0; i < size_; ++i) {
    if (!std::isfinite(data_[i])) return false;
  }
  return true;
}

}  // namespace embryostage::ad
