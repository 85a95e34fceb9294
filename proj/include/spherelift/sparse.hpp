#pragma once

#include "spherelift/types.hpp"

#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace spherelift {

/// Row-compressed sparsity pattern with sorted column indices inside each row.
struct CsrPattern {
  Index rows = 0;
  Index cols = 0;
  std::vector<std::int32_t> row_ptr{0};
  std::vector<std::int32_t> col_idx;

  Index nnz() const { return static_cast<Index>(col_idx.size()); }
  Index row_degree(Index r) const { return row_ptr[r + 1] - row_ptr[r]; }
  std::span<const std::int32_t> row(Index r) const {
    return {col_idx.data() + row_ptr[r], static_cast<std::size_t>(row_degree(r))};
  }
  bool contains(Index r, Index c) const;

  /// Row index of every stored entry, in storage order.
  std::vector<std::int32_t> entry_rows() const;

  CsrPattern transpose() const;

  /// Builds a pattern from (row, col) pairs; duplicates are merged.
  static CsrPattern from_pairs(Index rows, Index cols,
                               std::vector<std::pair<std::int32_t, std::int32_t>> pairs);

  friend bool operator==(const CsrPattern&, const CsrPattern&) = default;
};

using PatternPtr = std::shared_ptr<const CsrPattern>;

/// Sparse real matrix: a shared pattern plus one value per stored entry.
struct CsrMatrix {
  PatternPtr pattern;
  std::vector<double> values;

  CsrMatrix() = default;
  CsrMatrix(PatternPtr p, std::vector<double> v);
  /// All stored entries set to `fill`.
  CsrMatrix(PatternPtr p, double fill);

  Index rows() const { return pattern->rows; }
  Index cols() const { return pattern->cols; }
  Index nnz() const { return pattern->nnz(); }
  double row_sum(Index r) const;
  Matrix to_dense() const;
};

// Kernels shared by the eager transforms and the autodiff tape, so that both
// paths produce bitwise-identical results.

/// out = S * x, where S has pattern `p` and entry values `vals`.
void csr_multiply(const CsrPattern& p, std::span<const double> vals, const Matrix& x, Matrix& out);

/// out += sign * (S * x) over row-major blocks with `f` columns. Each row of
/// S * x is summed in the same order as csr_multiply before it is added.
void csr_multiply_accumulate(const CsrPattern& p, std::span<const double> vals, const double* x, Index f,
                             double sign, double* out);

/// out += S^T * y.
void csr_multiply_transposed_add(const CsrPattern& p, std::span<const double> vals, const Matrix& y,
                                 Matrix& out);

/// grad_vals[e] += <y.row(row(e)), x.row(col(e))> for every entry e.
void csr_value_gradient_add(const CsrPattern& p, const Matrix& y, const Matrix& x,
                            std::span<double> grad_vals);

/// Row-wise softmax of entry values restricted to each row's support. Rows with
/// no entries are left empty.
void csr_row_softmax(const CsrPattern& p, std::span<const double> scores, std::span<double> out);

inline Matrix operator*(const CsrMatrix& s, const Matrix& x) {
  Matrix out;
  csr_multiply(*s.pattern, s.values, x, out);
  return out;
}

}  // namespace spherelift
