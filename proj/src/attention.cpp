#include "spherelift/attention.hpp"

#include <cmath>

namespace spherelift {

AttentionRole AttentionRole::zeros(Index features, Index hidden) {
  require(features >= 1 && hidden >= 1, ErrorKind::Config, "attention dimensions must be positive");
  return {Matrix::Zero(features, hidden), Matrix::Zero(hidden, 1), Matrix::Zero(hidden, 1)};
}

void AttentionParams::validate() const {
  auto check = [](const AttentionRole& r, const char* name) {
    require(r.W0.cols() >= 1 && r.w1.rows() == r.W0.cols() && r.w2.rows() == r.W0.cols() && r.w1.cols() == 1 &&
                r.w2.cols() == 1,
            ErrorKind::Config, std::string(name) + " attention parameters have inconsistent shapes");
    require(r.W0.allFinite() && r.w1.allFinite() && r.w2.allFinite(), ErrorKind::Config,
            std::string(name) + " attention parameters are not finite");
  };
  check(update, "update");
  if (!share_roles) {
    check(predict, "predict");
    require(predict.features() == update.features(), ErrorKind::Config, "attention roles disagree on feature width");
  }
  require(std::isfinite(negative_slope), ErrorKind::Config, "negative slope must be finite");
}

double attention_score(const Matrix& xi, const Matrix& xj, const AttentionRole& role, double negative_slope) {
  require(xi.rows() == 1 && xj.rows() == 1 && xi.cols() == role.features() && xj.cols() == role.features(),
          ErrorKind::Data, "attention_score: feature dimension mismatch");
  const double a = (xi * role.W0 * role.w1)(0, 0);
  const double b = (xj * role.W0 * role.w2)(0, 0);
  return leaky(a + b, negative_slope);
}

namespace {

// sigma(left[r] + right[c]) for every entry (r, c) of the pattern.
std::vector<double> masked_sum_scores(const CsrPattern& p, const Matrix& left, const Matrix& right, double slope) {
  std::vector<double> out(static_cast<std::size_t>(p.nnz()));
  for (Index r = 0; r < p.rows; ++r)
    for (auto e = p.row_ptr[r]; e < p.row_ptr[r + 1]; ++e) out[e] = leaky(left(r, 0) + right(p.col_idx[e], 0), slope);
  return out;
}

void check_inputs(const SphericalSignal& x, const BlockAdjacency& adj, const AttentionParams& p) {
  p.validate();
  require(x.level == adj.level && x.values.rows() == adj.node_count(), ErrorKind::Data,
          "attention: signal does not match adjacency level");
  require(x.values.cols() == p.update.features(), ErrorKind::Data,
          "attention: signal has " + std::to_string(x.values.cols()) + " channels, parameters expect " +
              std::to_string(p.update.features()));
  for (Index r = 0; r < adj.M->rows; ++r)
    require(adj.M->row_degree(r) > 0, ErrorKind::Data, "attention: empty update row " + std::to_string(r));
  for (Index r = 0; r < adj.N->rows; ++r)
    require(adj.N->row_degree(r) > 0, ErrorKind::Data, "attention: empty predict row " + std::to_string(r));
}

}  // namespace

AttentionScores attention_scores(const SphericalSignal& x, const BlockAdjacency& adj, const AttentionParams& p) {
  check_inputs(x, adj, p);
  const Index ne = adj.even_count();
  const Matrix xe = x.values.topRows(ne);
  const Matrix xo = x.values.bottomRows(adj.odd_count());

  const auto& u = p.role(LiftRole::Update);
  const auto& q = p.role(LiftRole::Predict);
  const Matrix xe_u = xe * u.W0;
  const Matrix xo_u = xo * u.W0;
  const Matrix xo_p = xo * q.W0;
  const Matrix xe_p = xe * q.W0;
  AttentionScores s;
  s.update = masked_sum_scores(*adj.M, xe_u * u.w1, xo_u * u.w2, p.negative_slope);
  s.predict = masked_sum_scores(*adj.N, xo_p * q.w1, xe_p * q.w2, p.negative_slope);
  return s;
}

LiftingOperators compute_operators(const SphericalSignal& x, const BlockAdjacency& adj, const AttentionParams& p) {
  const auto scores = attention_scores(x, adj, p);
  LiftingOperators ops;
  ops.level = adj.level;
  ops.update = CsrMatrix(adj.M, 0.0);
  ops.predict = CsrMatrix(adj.N, 0.0);
  csr_row_softmax(*adj.M, scores.update, ops.update.values);
  csr_row_softmax(*adj.N, scores.predict, ops.predict.values);
  for (auto& v : ops.predict.values) v *= 0.5;
  return ops;
}

RecordedOperators record_operators(ad::Tape& tape, ad::Var x, const BlockAdjacency& adj,
                                   const RecordedAttentionRole& update, const RecordedAttentionRole& predict,
                                   double negative_slope) {
  const Index ne = adj.even_count();
  const Index no = adj.odd_count();
  require(tape.value(x).rows() == ne + no, ErrorKind::Data, "record_operators: feature rows do not match level");
  const ad::Var xe = tape.slice_rows(x, 0, ne);
  const ad::Var xo = tape.slice_rows(x, ne, no);

  auto scores = [&](const PatternPtr& mask, ad::Var row_side, ad::Var col_side, const RecordedAttentionRole& r) {
    const ad::Var left = tape.matmul(tape.matmul(row_side, r.W0), r.w1);
    const ad::Var right = tape.matmul(tape.matmul(col_side, r.W0), r.w2);
    auto rows = std::make_shared<const std::vector<std::int32_t>>(mask->entry_rows());
    auto cols = std::make_shared<const std::vector<std::int32_t>>(mask->col_idx);
    const ad::Var summed = tape.add(tape.gather_rows(left, rows), tape.gather_rows(right, cols));
    return tape.leaky_relu(summed, negative_slope);
  };
  RecordedOperators out;
  out.update = tape.row_softmax(adj.M, scores(adj.M, xe, xo, update));
  out.predict = tape.scale(tape.row_softmax(adj.N, scores(adj.N, xo, xe, predict)), 0.5);
  return out;
}

}  // namespace spherelift
