#include "spherelift/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace spherelift::ad {

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::at(Var v) const {
  require(v.id >= 0 && static_cast<std::size_t>(v.id) < nodes_.size(), ErrorKind::Internal,
          "variable does not belong to this tape");
  return nodes_[v.id];
}

Matrix& Tape::adjoint_of(int id) {
  auto& n = nodes_[id];
  if (n.adjoint.size() == 0 && n.value.size() != 0) n.adjoint = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.adjoint;
}

Var Tape::input(Matrix value, bool requires_grad) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  n.needs_grad = requires_grad;
  return push(std::move(n));
}

const Matrix& Tape::value(Var v) const { return at(v).value; }

Matrix Tape::grad(Var v) const {
  const auto& n = at(v);
  if (n.adjoint.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.adjoint;
}

bool Tape::requires_grad(Var v) const { return at(v).needs_grad; }

namespace {

void same_shape(const Matrix& a, const Matrix& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::Data, std::string(op) + ": shape mismatch");
}

}  // namespace

Var Tape::matmul(Var a, Var b) {
  const auto& x = at(a).value;
  const auto& y = at(b).value;
  require(x.cols() == y.rows(), ErrorKind::Data, "matmul: inner dimensions differ");
  Node n;
  n.op = Op::MatMul;
  n.a = a.id;
  n.b = b.id;
  n.value = x * y;
  n.needs_grad = at(a).needs_grad || at(b).needs_grad;
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  same_shape(at(a).value, at(b).value, "add");
  Node n;
  n.op = Op::Add;
  n.a = a.id;
  n.b = b.id;
  n.value = at(a).value + at(b).value;
  n.needs_grad = at(a).needs_grad || at(b).needs_grad;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  same_shape(at(a).value, at(b).value, "sub");
  Node n;
  n.op = Op::Sub;
  n.a = a.id;
  n.b = b.id;
  n.value = at(a).value - at(b).value;
  n.needs_grad = at(a).needs_grad || at(b).needs_grad;
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  same_shape(at(a).value, at(b).value, "mul");
  Node n;
  n.op = Op::Mul;
  n.a = a.id;
  n.b = b.id;
  n.value = at(a).value.cwiseProduct(at(b).value);
  n.needs_grad = at(a).needs_grad || at(b).needs_grad;
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  Node n;
  n.op = Op::Scale;
  n.a = a.id;
  n.scalar = s;
  n.value = at(a).value * s;
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

Var Tape::add_row(Var a, Var row) {
  const auto& x = at(a).value;
  const auto& r = at(row).value;
  require(r.rows() == 1 && r.cols() == x.cols(), ErrorKind::Data, "add_row: row shape mismatch");
  Node n;
  n.op = Op::AddRow;
  n.a = a.id;
  n.b = row.id;
  n.value = x.rowwise() + r.row(0);
  n.needs_grad = at(a).needs_grad || at(row).needs_grad;
  return push(std::move(n));
}

Var Tape::leaky_relu(Var a, double negative_slope) {
  Node n;
  n.op = Op::LeakyRelu;
  n.a = a.id;
  n.scalar = negative_slope;
  n.value = at(a).value.unaryExpr([negative_slope](double v) { return v >= 0.0 ? v : negative_slope * v; });
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  Node n;
  n.op = Op::Relu;
  n.a = a.id;
  n.value = at(a).value.cwiseMax(0.0);
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

Var Tape::spmm(PatternPtr pattern, Var values, Var x) {
  const auto& v = at(values).value;
  require(v.rows() == pattern->nnz() && v.cols() == 1, ErrorKind::Data, "spmm: value column does not match pattern");
  Node n;
  n.op = Op::Spmm;
  n.a = values.id;
  n.b = x.id;
  csr_multiply(*pattern, {v.data(), static_cast<std::size_t>(v.size())}, at(x).value, n.value);
  n.pattern = std::move(pattern);
  n.needs_grad = at(values).needs_grad || at(x).needs_grad;
  return push(std::move(n));
}

Var Tape::row_softmax(PatternPtr pattern, Var scores) {
  const auto& s = at(scores).value;
  require(s.rows() == pattern->nnz() && s.cols() == 1, ErrorKind::Data,
          "row_softmax: score column does not match pattern");
  Node n;
  n.op = Op::RowSoftmax;
  n.a = scores.id;
  n.value.resize(s.rows(), 1);
  csr_row_softmax(*pattern, {s.data(), static_cast<std::size_t>(s.size())},
                  {n.value.data(), static_cast<std::size_t>(n.value.size())});
  n.pattern = std::move(pattern);
  n.needs_grad = at(scores).needs_grad;
  return push(std::move(n));
}

Var Tape::segment_max(PatternPtr pattern, Var x) {
  const auto& xv = at(x).value;
  require(xv.rows() == pattern->cols, ErrorKind::Data, "segment_max: shape mismatch");
  Node n;
  n.op = Op::SegmentMax;
  n.a = x.id;
  const Index f = xv.cols();
  n.value = Matrix::Zero(pattern->rows, f);
  n.argmax.assign(static_cast<std::size_t>(pattern->rows * f), -1);
  for (Index r = 0; r < pattern->rows; ++r) {
    require(pattern->row_degree(r) > 0, ErrorKind::Data, "segment_max: empty row");
    for (Index c = 0; c < f; ++c) {
      std::int32_t best = pattern->col_idx[pattern->row_ptr[r]];
      for (auto e = pattern->row_ptr[r] + 1; e < pattern->row_ptr[r + 1]; ++e)
        if (xv(pattern->col_idx[e], c) > xv(best, c)) best = pattern->col_idx[e];
      n.value(r, c) = xv(best, c);
      n.argmax[r * f + c] = best;
    }
  }
  n.pattern = std::move(pattern);
  n.needs_grad = at(x).needs_grad;
  return push(std::move(n));
}

Var Tape::gather_rows(Var a, IndexMap rows) {
  const auto& x = at(a).value;
  Node n;
  n.op = Op::Gather;
  n.a = a.id;
  n.value.resize(static_cast<Index>(rows->size()), x.cols());
  for (std::size_t i = 0; i < rows->size(); ++i) {
    const auto r = (*rows)[i];
    require(r >= 0 && r < x.rows(), ErrorKind::Data, "gather_rows: index out of range");
    n.value.row(static_cast<Index>(i)) = x.row(r);
  }
  n.index = std::move(rows);
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

Var Tape::scatter_rows(Var a, IndexMap rows, Index out_rows) {
  const auto& x = at(a).value;
  require(static_cast<Index>(rows->size()) == x.rows(), ErrorKind::Data, "scatter_rows: index map size mismatch");
  Node n;
  n.op = Op::Scatter;
  n.a = a.id;
  n.value = Matrix::Zero(out_rows, x.cols());
  for (std::size_t i = 0; i < rows->size(); ++i) {
    const auto r = (*rows)[i];
    require(r >= 0 && r < out_rows, ErrorKind::Data, "scatter_rows: index out of range");
    n.value.row(r) += x.row(static_cast<Index>(i));
  }
  n.index = std::move(rows);
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

Var Tape::slice_rows(Var a, Index begin, Index count) {
  const auto& x = at(a).value;
  require(begin >= 0 && count >= 0 && begin + count <= x.rows(), ErrorKind::Data, "slice_rows: range out of bounds");
  Node n;
  n.op = Op::Slice;
  n.a = a.id;
  n.extra = begin;
  n.value = x.middleRows(begin, count);
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

Var Tape::concat_rows(Var top, Var bottom) {
  const auto& t = at(top).value;
  const auto& b = at(bottom).value;
  require(t.cols() == b.cols(), ErrorKind::Data, "concat_rows: column mismatch");
  Node n;
  n.op = Op::Concat;
  n.a = top.id;
  n.b = bottom.id;
  n.value.resize(t.rows() + b.rows(), t.cols());
  n.value.topRows(t.rows()) = t;
  n.value.bottomRows(b.rows()) = b;
  n.needs_grad = at(top).needs_grad || at(bottom).needs_grad;
  return push(std::move(n));
}

Var Tape::mean_rows(Var a) {
  const auto& x = at(a).value;
  require(x.rows() > 0, ErrorKind::Data, "mean_rows: empty input");
  Node n;
  n.op = Op::MeanRows;
  n.a = a.id;
  n.value = x.colwise().sum() / static_cast<double>(x.rows());
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::Sum;
  n.a = a.id;
  n.value = Matrix::Constant(1, 1, at(a).value.sum());
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  const auto& x = at(a).value;
  require(x.size() > 0, ErrorKind::Data, "mean: empty input");
  Node n;
  n.op = Op::Mean;
  n.a = a.id;
  n.value = Matrix::Constant(1, 1, x.sum() / static_cast<double>(x.size()));
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

Var Tape::sum_squares(Var a) {
  Node n;
  n.op = Op::SumSquares;
  n.a = a.id;
  n.value = Matrix::Constant(1, 1, at(a).value.squaredNorm());
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

Var Tape::norm(Var a) {
  Node n;
  n.op = Op::Norm;
  n.a = a.id;
  n.value = Matrix::Constant(1, 1, at(a).value.norm());
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

Var Tape::softmax_cross_entropy(Var logits, int label) {
  const auto& z = at(logits).value;
  require(z.rows() == 1 && label >= 0 && label < z.cols(), ErrorKind::Data,
          "softmax_cross_entropy: bad logits shape or label");
  Node n;
  n.op = Op::SoftmaxCE;
  n.a = logits.id;
  n.extra = label;
  const double mx = z.maxCoeff();
  const double lse = mx + std::log((z.array() - mx).exp().sum());
  n.value = Matrix::Constant(1, 1, lse - z(0, label));
  n.needs_grad = at(logits).needs_grad;
  return push(std::move(n));
}

void Tape::backward(Var out, double seed) {
  const auto& o = at(out).value;
  require(o.rows() == 1 && o.cols() == 1, ErrorKind::Data, "backward needs a scalar output");
  for (auto& n : nodes_) n.adjoint.resize(0, 0);
  adjoint_of(out.id)(0, 0) = seed;
  for (int i = out.id; i >= 0; --i) {
    const auto& n = nodes_[i];
    if (!n.needs_grad || n.adjoint.size() == 0 || n.op == Op::Leaf) continue;
    propagate(n);
  }
}

void Tape::propagate(const Node& n) {
  const Matrix& g = n.adjoint;
  auto wants = [&](int id) { return id >= 0 && nodes_[id].needs_grad; };
  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::MatMul:
      if (wants(n.a)) adjoint_of(n.a).noalias() += g * nodes_[n.b].value.transpose();
      if (wants(n.b)) adjoint_of(n.b).noalias() += nodes_[n.a].value.transpose() * g;
      break;
    case Op::Add:
      if (wants(n.a)) adjoint_of(n.a) += g;
      if (wants(n.b)) adjoint_of(n.b) += g;
      break;
    case Op::Sub:
      if (wants(n.a)) adjoint_of(n.a) += g;
      if (wants(n.b)) adjoint_of(n.b) -= g;
      break;
    case Op::Mul:
      if (wants(n.a)) adjoint_of(n.a) += g.cwiseProduct(nodes_[n.b].value);
      if (wants(n.b)) adjoint_of(n.b) += g.cwiseProduct(nodes_[n.a].value);
      break;
    case Op::Scale:
      if (wants(n.a)) adjoint_of(n.a) += g * n.scalar;
      break;
    case Op::AddRow:
      if (wants(n.a)) adjoint_of(n.a) += g;
      if (wants(n.b)) adjoint_of(n.b) += g.colwise().sum();
      break;
    case Op::LeakyRelu: {
      const auto& x = nodes_[n.a].value;
      const double slope = n.scalar;
      adjoint_of(n.a) += g.binaryExpr(x, [slope](double gi, double xi) { return xi >= 0.0 ? gi : slope * gi; });
      break;
    }
    case Op::Relu: {
      const auto& x = nodes_[n.a].value;
      adjoint_of(n.a) += g.binaryExpr(x, [](double gi, double xi) { return xi > 0.0 ? gi : 0.0; });
      break;
    }
    case Op::Spmm: {
      const auto& vals = nodes_[n.a].value;
      const auto& x = nodes_[n.b].value;
      if (wants(n.a)) {
        auto& gv = adjoint_of(n.a);
        csr_value_gradient_add(*n.pattern, g, x, {gv.data(), static_cast<std::size_t>(gv.size())});
      }
      if (wants(n.b))
        csr_multiply_transposed_add(*n.pattern, {vals.data(), static_cast<std::size_t>(vals.size())}, g,
                                    adjoint_of(n.b));
      break;
    }
    case Op::RowSoftmax: {
      // dL/ds_e = p_e * (g_e - sum_row p * g)
      const auto& p = n.value;
      auto& gs = adjoint_of(n.a);
      for (Index r = 0; r < n.pattern->rows; ++r) {
        double dot = 0.0;
        for (auto e = n.pattern->row_ptr[r]; e < n.pattern->row_ptr[r + 1]; ++e) dot += p(e, 0) * g(e, 0);
        for (auto e = n.pattern->row_ptr[r]; e < n.pattern->row_ptr[r + 1]; ++e)
          gs(e, 0) += p(e, 0) * (g(e, 0) - dot);
      }
      break;
    }
    case Op::SegmentMax: {
      auto& gx = adjoint_of(n.a);
      const Index f = g.cols();
      for (Index r = 0; r < g.rows(); ++r)
        for (Index c = 0; c < f; ++c) gx(n.argmax[r * f + c], c) += g(r, c);
      break;
    }
    case Op::Gather: {
      auto& gx = adjoint_of(n.a);
      for (std::size_t i = 0; i < n.index->size(); ++i) gx.row((*n.index)[i]) += g.row(static_cast<Index>(i));
      break;
    }
    case Op::Scatter: {
      auto& gx = adjoint_of(n.a);
      for (std::size_t i = 0; i < n.index->size(); ++i) gx.row(static_cast<Index>(i)) += g.row((*n.index)[i]);
      break;
    }
    case Op::Slice:
      adjoint_of(n.a).middleRows(n.extra, g.rows()) += g;
      break;
    case Op::Concat: {
      const Index top = nodes_[n.a].value.rows();
      if (wants(n.a)) adjoint_of(n.a) += g.topRows(top);
      if (wants(n.b)) adjoint_of(n.b) += g.bottomRows(g.rows() - top);
      break;
    }
    case Op::MeanRows: {
      auto& gx = adjoint_of(n.a);
      gx.rowwise() += g.row(0) / static_cast<double>(gx.rows());
      break;
    }
    case Op::Sum:
      adjoint_of(n.a).array() += g(0, 0);
      break;
    case Op::Mean: {
      auto& gx = adjoint_of(n.a);
      gx.array() += g(0, 0) / static_cast<double>(gx.size());
      break;
    }
    case Op::SumSquares:
      adjoint_of(n.a) += 2.0 * g(0, 0) * nodes_[n.a].value;
      break;
    case Op::Norm: {
      const double nv = n.value(0, 0);
      if (nv > 0.0) adjoint_of(n.a) += (g(0, 0) / nv) * nodes_[n.a].value;
      break;
    }
    case Op::SoftmaxCE: {
      const auto& z = nodes_[n.a].value;
      const double mx = z.maxCoeff();
      Matrix p = (z.array() - mx).exp();
      p /= p.sum();
      p(0, n.extra) -= 1.0;
      adjoint_of(n.a) += g(0, 0) * p;
      break;
    }
  }
}

GradientCheckResult gradient_check(const std::vector<Matrix>& params, const LossBuilder& build, double step,
                                   double floor) {
  GradientCheckResult result;
  std::vector<Matrix> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(tape.input(p, true));
    const Var loss = build(tape, vars);
    tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }
  auto eval = [&](const std::vector<Matrix>& ps) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : ps) vars.push_back(tape.input(p, false));
    return tape.value(build(tape, vars))(0, 0);
  };
  std::vector<Matrix> work = params;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Index i = 0; i < params[k].size(); ++i) {
      const double orig = params[k].data()[i];
      work[k].data()[i] = orig + step;
      const double up = eval(work);
      work[k].data()[i] = orig - step;
      const double down = eval(work);
      work[k].data()[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[k].data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > result.max_relative_error || (k == 0 && i == 0)) {
        result.max_relative_error = std::max(rel, result.max_relative_error);
        result.worst_param = k;
        result.worst_entry = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace spherelift::ad
