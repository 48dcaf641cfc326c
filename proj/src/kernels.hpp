// Shared dense kernels for the graph and inference paths. Both call into the
// same routines so the two paths agree bit-for-bit.
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "embryostage/tensor.hpp"

namespace embryostage::ad::kernels {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

inline ConstMatMap as_matrix(const Tensor& t, std::int64_t rows, std::int64_t cols) {
  return ConstMatMap(t.data(), rows, cols);
}
inline MatMap as_matrix(Tensor& t, std::int64_t rows, std::int64_t cols) {
  return MatMap(t.data(), rows, cols);
}

/// C = A[m,k] * B[k,n].
void gemm(const Tensor& a, const Tensor& b, Tensor& c, std::int64_t m, std::int64_t k,
          std::int64_t n);

/// dA += dC * B^T and dB += A^T * dC. Rows of dC that are entirely zero are
/// skipped; after a max-pool only the argmax rows carry gradient, which makes
/// the per-point backward roughly 4x cheaper at n = 4096.
void gemm_backward(const Tensor& a, const Tensor& b, const Tensor& dc, Tensor* da, Tensor* db,
                   std::int64_t m, std::int64_t k, std::int64_t n);

/// out[r, :] = x[r, :] + bias for every row.
void add_bias(const Tensor& x, const Tensor& bias, Tensor& out, std::int64_t rows,
              std::int64_t cols);

/// out = max(x, 0) elementwise.
void relu(const Tensor& x, Tensor& out);

/// Column-wise max over rows; argmax picks the lowest row index on ties.
void max_over_rows(const Tensor& x, Tensor& out, std::vector<std::int32_t>& argmax,
                   std::int64_t rows, std::int64_t cols);

}  // namespace embryostage::ad::kernels
