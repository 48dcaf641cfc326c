#include "kernels.hpp"

namespace embryostage::ad::kernels {

void gemm(const Tensor& a, const Tensor& b, Tensor& c, std::int64_t m, std::int64_t k,
          std::int64_t n) {
  as_matrix(c, m, n).noalias() = as_matrix(a, m, k) * as_matrix(b, k, n);
}

namespace {

/// Indices of rows of dc [m,n] that contain at least one nonzero.
std::vector<std::int32_t> nonzero_rows(const Tensor& dc, std::int64_t m, std::int64_t n) {
  std::vector<std::int32_t> rows;
  const double* ptr = dc.data();
  for (std::int64_t r = 0; r < m; ++r, ptr += n) {
    for (std::int64_t j = 0; j < n; ++j) {
      if (ptr[j] != 0.0) {
        rows.push_back(static_cast<std::int32_t>(r));
        break;
      }
    }
  }
  return rows;
}

void gather_rows(const Tensor& src, const std::vector<std::int32_t>& rows, std::int64_t cols,
                 RowMat& out) {
  out.resize(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        ConstMatMap(src.data() + static_cast<std::int64_t>(rows[i]) * cols, 1, cols);
  }
}

}  // namespace

void gemm_backward(const Tensor& a, const Tensor& b, const Tensor& dc, Tensor* da, Tensor* db,
                   std::int64_t m, std::int64_t k, std::int64_t n) {
  // Compacting pays off only for tall activations; small matrices go dense.
  if (m >= 256) {
    const std::vector<std::int32_t> support = nonzero_rows(dc, m, n);
    if (static_cast<std::int64_t>(support.size()) * 2 < m) {
      RowMat dc_rows, a_rows;
      gather_rows(dc, support, n, dc_rows);
      if (da) {
        RowMat da_rows = dc_rows * as_matrix(b, k, n).transpose();
        for (std::size_t i = 0; i < support.size(); ++i) {
          MatMap(da->data() + static_cast<std::int64_t>(support[i]) * k, 1, k) +=
              da_rows.row(static_cast<Eigen::Index>(i));
        }
      }
      if (db) {
        gather_rows(a, support, k, a_rows);
        as_matrix(*db, k, n).noalias() += a_rows.transpose() * dc_rows;
      }
      return;
    }
  }
  if (da) {
    as_matrix(*da, m, k).noalias() += as_matrix(dc, m, n) * as_matrix(b, k, n).transpose();
  }
  if (db) {
    as_matrix(*db, k, n).noalias() += as_matrix(a, m, k).transpose() * as_matrix(dc, m, n);
  }
}

void add_bias(const Tensor& x, const Tensor& bias, Tensor& out, std::int64_t rows,
              std::int64_t cols) {
  const double* src = x.data();
  const double* b = bias.data();
  double* dst = out.data();
  for (std::int64_t r = 0; r < rows; ++r, src += cols, dst += cols) {
    for (std::int64_t j = 0; j < cols; ++j) dst[j] = src[j] + b[j];
  }
}

void relu(const Tensor& x, Tensor& out) {
  const double* src = x.data();
  double* dst = out.data();
  const std::int64_t n = x.size();
  for (std::int64_t i = 0; i < n; ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
}

void max_over_rows(const Tensor& x, Tensor& out, std::vector<std::int32_t>& argmax,
                   std::int64_t rows, std::int64_t cols) {
  argmax.assign(static_cast<std::size_t>(cols), 0);
  double* dst = out.data();
  const double* first = x.data();
  for (std::int64_t j = 0; j < cols; ++j) dst[j] = first[j];
  const double* src = x.data();
  for (std::int64_t r = 1; r < rows; ++r) {
    src += cols;
    for (std::int64_t j = 0; j < cols; ++j) {
      if (src[j] > dst[j]) {  // strict: ties keep the lowest row
        dst[j] = src[j];
        argmax[static_cast<std::size_t>(j)] = static_cast<std::int32_t>(r);
      }
    }
  }
}

}  // namespace embryostage::ad::kernels
