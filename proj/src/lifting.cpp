#include "spherelift/lifting.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace spherelift {
namespace {

void check_shapes(const LiftingOperators& ops) {
  require(ops.level >= 1, ErrorKind::Data, "lifting operators need level >= 1");
  require(ops.update.pattern && ops.predict.pattern, ErrorKind::Data, "lifting operators are empty");
  require(ops.update.rows() == ops.predict.cols() && ops.update.cols() == ops.predict.rows(), ErrorKind::Data,
          "update and predict operator shapes disagree");
}

}  // namespace

LiftingOperators handcrafted_operators(const BlockAdjacency& adj) {
  LiftingOperators ops;
  ops.level = adj.level;
  ops.update = CsrMatrix(adj.M, 0.0);
  ops.predict = CsrMatrix(adj.N, 0.0);
  for (Index r = 0; r < adj.M->rows; ++r) {
    const auto k = adj.M->row_degree(r);
    require(k > 0, ErrorKind::Data, "even node " + std::to_string(r) + " has no odd neighbours");
    for (auto e = adj.M->row_ptr[r]; e < adj.M->row_ptr[r + 1]; ++e) ops.update.values[e] = 1.0 / static_cast<double>(k);
  }
  for (Index r = 0; r < adj.N->rows; ++r) {
    const auto k = adj.N->row_degree(r);
    require(k > 0, ErrorKind::Data, "odd node " + std::to_string(r) + " has no even neighbours");
    for (auto e = adj.N->row_ptr[r]; e < adj.N->row_ptr[r + 1]; ++e)
      ops.predict.values[e] = 0.5 / static_cast<double>(k);
  }
  return ops;
}

std::string check_operators(const LiftingOperators& ops, const BlockAdjacency& adj, double tol) {
  std::ostringstream why;
  if (!ops.update.pattern || !ops.predict.pattern) return "operators are empty";
  if (ops.level != adj.level) return "operator level does not match adjacency level";
  auto check = [&](const CsrMatrix& op, const CsrPattern& mask, double target, const char* name) -> bool {
    if (op.rows() != mask.rows || op.cols() != mask.cols) {
      why << name << " shape mismatch";
      return false;
    }
    for (Index r = 0; r < op.rows(); ++r) {
      for (auto e = op.pattern->row_ptr[r]; e < op.pattern->row_ptr[r + 1]; ++e) {
        const double v = op.values[e];
        if (!std::isfinite(v) || v < 0.0) {
          why << name << " entry (" << r << ", " << op.pattern->col_idx[e] << ") = " << v << " is negative or not finite";
          return false;
        }
        if (!mask.contains(r, op.pattern->col_idx[e])) {
          why << name << " entry (" << r << ", " << op.pattern->col_idx[e] << ") lies outside the mask";
          return false;
        }
      }
      const double s = op.row_sum(r);
      if (!(std::abs(s - target) <= tol)) {
        why << name << " row " << r << " sums to " << s << ", expected " << target;
        return false;
      }
    }
    return true;
  };
  if (!check(ops.update, *adj.M, 1.0, "update")) return why.str();
  if (!check(ops.predict, *adj.N, 0.5, "predict")) return why.str();
  return {};
}

SubbandPair lift_forward(const SphericalSignal& x, const LiftingOperators& ops) {
  check_shapes(ops);
  require(x.level == ops.level, ErrorKind::Data,
          "signal level " + std::to_string(x.level) + " does not match operator level " + std::to_string(ops.level));
  const Index ne = ops.update.rows();
  const Index no = ops.update.cols();
  require(x.values.rows() == ne + no, ErrorKind::Data, "signal row count does not match operators");

  const Index f = x.values.cols();
  SubbandPair out{x.values.topRows(ne), x.values.bottomRows(no)};
  csr_multiply_accumulate(*ops.update.pattern, ops.update.values, out.D.data(), f, 1.0, out.C.data());
  csr_multiply_accumulate(*ops.predict.pattern, ops.predict.values, out.C.data(), f, -1.0, out.D.data());
  return out;
}

SphericalSignal lift_backward(const SubbandPair& sub, const LiftingOperators& ops) {
  check_shapes(ops);
  const Index ne = ops.update.rows();
  const Index no = ops.update.cols();
  require(sub.C.rows() == ne && sub.D.rows() == no && sub.C.cols() == sub.D.cols(), ErrorKind::Data,
          "sub-band shapes do not match operators");
  const Index f = sub.C.cols();
  SphericalSignal x;
  x.level = ops.level;
  x.values.resize(ne + no, f);
  x.values.topRows(ne) = sub.C;
  x.values.bottomRows(no) = sub.D;
  double* even = x.values.data();
  double* odd = even + ne * f;
  csr_multiply_accumulate(*ops.predict.pattern, ops.predict.values, even, f, 1.0, odd);
  csr_multiply_accumulate(*ops.update.pattern, ops.update.values, odd, f, -1.0, even);
  return x;
}

std::pair<SphericalSignal, Matrix> lift_pool(const SphericalSignal& x, const LiftingOperators& ops) {
  auto sub = lift_forward(x, ops);
  return {SphericalSignal{x.level - 1, std::move(sub.C)}, std::move(sub.D)};
}

SphericalSignal lift_unpool(const SphericalSignal& c, const LiftingOperators& ops) {
  require(c.level == ops.level - 1, ErrorKind::Data, "coarse signal level does not match operators");
  SubbandPair sub{c.values, Matrix::Zero(ops.update.cols(), c.values.cols())};
  return lift_backward(sub, ops);
}

SphericalSignal baseline_pool(const SphericalSignal& x, const BlockAdjacency& adj, BaselinePool kind) {
  require(adj.level >= 1 && x.level == adj.level, ErrorKind::Data, "baseline pooling level mismatch");
  const Index ne = adj.even_count();
  require(x.values.rows() == adj.node_count(), ErrorKind::Data, "signal row count does not match adjacency");
  SphericalSignal out{adj.level - 1, x.values.topRows(ne)};
  if (kind == BaselinePool::Downsample) return out;

  const auto& m = *adj.M;
  for (Index r = 0; r < ne; ++r) {
    for (auto e = m.row_ptr[r]; e < m.row_ptr[r + 1]; ++e) {
      const auto odd_row = x.values.row(ne + m.col_idx[e]);
      if (kind == BaselinePool::Mean)
        out.values.row(r) += odd_row;
      else
        out.values.row(r) = out.values.row(r).cwiseMax(odd_row);
    }
    if (kind == BaselinePool::Mean) out.values.row(r) /= static_cast<double>(1 + m.row_degree(r));
  }
  return out;
}

SphericalSignal baseline_unpool(const SphericalSignal& c, const BlockAdjacency& adj) {
  require(c.level == adj.level - 1 && c.values.rows() == adj.even_count(), ErrorKind::Data,
          "zero-pad unpooling shape mismatch");
  SphericalSignal out{adj.level, Matrix::Zero(adj.node_count(), c.values.cols())};
  out.values.topRows(adj.even_count()) = c.values;
  return out;
}

}  // namespace spherelift
