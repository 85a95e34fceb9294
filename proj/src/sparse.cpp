#include "spherelift/sparse.hpp"

#include <algorithm>
#include <cmath>

namespace spherelift {

bool CsrPattern::contains(Index r, Index c) const {
  auto cols_in_row = row(r);
  return std::binary_search(cols_in_row.begin(), cols_in_row.end(), static_cast<std::int32_t>(c));
}

std::vector<std::int32_t> CsrPattern::entry_rows() const {
  std::vector<std::int32_t> out(col_idx.size());
  for (Index r = 0; r < rows; ++r)
    for (auto e = row_ptr[r]; e < row_ptr[r + 1]; ++e) out[e] = static_cast<std::int32_t>(r);
  return out;
}

CsrPattern CsrPattern::transpose() const {
  CsrPattern t;
  t.rows = cols;
  t.cols = rows;
  t.row_ptr.assign(cols + 1, 0);
  for (auto c : col_idx) ++t.row_ptr[c + 1];
  for (Index i = 0; i < cols; ++i) t.row_ptr[i + 1] += t.row_ptr[i];
  t.col_idx.resize(col_idx.size());
  std::vector<std::int32_t> fill(t.row_ptr.begin(), t.row_ptr.end() - 1);
  // Rows are visited in increasing order, so columns of the transpose come out sorted.
  for (Index r = 0; r < rows; ++r)
    for (auto e = row_ptr[r]; e < row_ptr[r + 1]; ++e)
      t.col_idx[fill[col_idx[e]]++] = static_cast<std::int32_t>(r);
  return t;
}

CsrPattern CsrPattern::from_pairs(Index rows, Index cols,
                                  std::vector<std::pair<std::int32_t, std::int32_t>> pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  CsrPattern p;
  p.rows = rows;
  p.cols = cols;
  p.row_ptr.assign(rows + 1, 0);
  p.col_idx.reserve(pairs.size());
  for (auto [r, c] : pairs) {
    require(r >= 0 && r < rows && c >= 0 && c < cols, ErrorKind::Internal,
            "sparse entry out of range");
    ++p.row_ptr[r + 1];
    p.col_idx.push_back(c);
  }
  for (Index i = 0; i < rows; ++i) p.row_ptr[i + 1] += p.row_ptr[i];
  return p;
}

CsrMatrix::CsrMatrix(PatternPtr p, std::vector<double> v) : pattern(std::move(p)), values(std::move(v)) {
  require(static_cast<Index>(values.size()) == pattern->nnz(), ErrorKind::Internal,
          "sparse value count does not match pattern");
}

CsrMatrix::CsrMatrix(PatternPtr p, double fill)
    : pattern(std::move(p)), values(static_cast<std::size_t>(pattern->nnz()), fill) {}

double CsrMatrix::row_sum(Index r) const {
  double s = 0.0;
  for (auto e = pattern->row_ptr[r]; e < pattern->row_ptr[r + 1]; ++e) s += values[e];
  return s;
}

Matrix CsrMatrix::to_dense() const {
  Matrix d = Matrix::Zero(rows(), cols());
  for (Index r = 0; r < rows(); ++r)
    for (auto e = pattern->row_ptr[r]; e < pattern->row_ptr[r + 1]; ++e)
      d(r, pattern->col_idx[e]) = values[e];
  return d;
}

void csr_multiply(const CsrPattern& p, std::span<const double> vals, const Matrix& x, Matrix& out) {
  require(x.rows() == p.cols, ErrorKind::Data, "sparse product shape mismatch");
  require(static_cast<Index>(vals.size()) == p.nnz(), ErrorKind::Internal,
          "sparse value count does not match pattern");
  out.setZero(p.rows, x.cols());
  const Index f = x.cols();
  for (Index r = 0; r < p.rows; ++r) {
    double* dst = out.data() + r * f;
    for (auto e = p.row_ptr[r]; e < p.row_ptr[r + 1]; ++e) {
      const double w = vals[e];
      const double* src = x.data() + static_cast<Index>(p.col_idx[e]) * f;
      for (Index c = 0; c < f; ++c) dst[c] += w * src[c];
    }
  }
}

void csr_multiply_accumulate(const CsrPattern& p, std::span<const double> vals, const double* x, Index f,
                             double sign, double* out) {
  require(static_cast<Index>(vals.size()) == p.nnz(), ErrorKind::Internal,
          "sparse value count does not match pattern");
  std::vector<double> acc(static_cast<std::size_t>(f));
  for (Index r = 0; r < p.rows; ++r) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (auto e = p.row_ptr[r]; e < p.row_ptr[r + 1]; ++e) {
      const double w = vals[e];
      const double* src = x + static_cast<Index>(p.col_idx[e]) * f;
      for (Index c = 0; c < f; ++c) acc[c] += w * src[c];
    }
    double* dst = out + r * f;
    for (Index c = 0; c < f; ++c) dst[c] += sign * acc[c];
  }
}

void csr_multiply_transposed_add(const CsrPattern& p, std::span<const double> vals, const Matrix& y,
                                 Matrix& out) {
  const Index f = y.cols();
  for (Index r = 0; r < p.rows; ++r) {
    const double* src = y.data() + r * f;
    for (auto e = p.row_ptr[r]; e < p.row_ptr[r + 1]; ++e) {
      const double w = vals[e];
      double* dst = out.data() + static_cast<Index>(p.col_idx[e]) * f;
      for (Index c = 0; c < f; ++c) dst[c] += w * src[c];
    }
  }
}

void csr_value_gradient_add(const CsrPattern& p, const Matrix& y, const Matrix& x,
                            std::span<double> grad_vals) {
  const Index f = y.cols();
  for (Index r = 0; r < p.rows; ++r) {
    const double* yr = y.data() + r * f;
    for (auto e = p.row_ptr[r]; e < p.row_ptr[r + 1]; ++e) {
      const double* xr = x.data() + static_cast<Index>(p.col_idx[e]) * f;
      double acc = 0.0;
      for (Index c = 0; c < f; ++c) acc += yr[c] * xr[c];
      grad_vals[e] += acc;
    }
  }
}

void csr_row_softmax(const CsrPattern& p, std::span<const double> scores, std::span<double> out) {
  for (Index r = 0; r < p.rows; ++r) {
    const auto begin = p.row_ptr[r];
    const auto end = p.row_ptr[r + 1];
    if (begin == end) continue;
    double mx = scores[begin];
    for (auto e = begin + 1; e < end; ++e) mx = std::max(mx, scores[e]);
    double total = 0.0;
    for (auto e = begin; e < end; ++e) {
      out[e] = std::exp(scores[e] - mx);
      total += out[e];
    }
    for (auto e = begin; e < end; ++e) out[e] /= total;
  }
}

}  // namespace spherelift
