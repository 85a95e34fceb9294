#pragma once

// Define-by-run reverse-mode differentiation over the small set of matrix
// primitives the lifting networks need. Every primitive evaluates eagerly and
// appends a node; backward() walks the nodes in reverse.
//
// Masks and mesh structure enter only as patterns / index maps and never
// receive gradients. Sparse products keep their value gradients on the mask
// support.

#include "spherelift/sparse.hpp"
#include "spherelift/types.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace spherelift::ad {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

using IndexMap = std::shared_ptr<const std::vector<std::int32_t>>;

class Tape {
 public:
  /// Leaf node. Only leaves created with requires_grad receive gradients.
  Var input(Matrix value, bool requires_grad = false);
  Var constant(Matrix value) { return input(std::move(value), false); }

  const Matrix& value(Var v) const;
  /// Adjoint after backward(); a zero matrix of the value's shape if the node
  /// was not reached.
  Matrix grad(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(out)/d(out) = seed and propagates. `out` must be 1x1.
  void backward(Var out, double seed = 1.0);

  // Dense algebra.
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  /// a + 1 * row, where row is 1 x cols(a).
  Var add_row(Var a, Var row);

  // Activations.
  Var leaky_relu(Var a, double negative_slope);
  Var relu(Var a);

  // Sparse primitives. `values` is an nnz x 1 column holding the entries of the
  // pattern in storage order.
  Var spmm(PatternPtr pattern, Var values, Var x);
  Var row_softmax(PatternPtr pattern, Var scores);
  /// out(r, c) = max over the pattern's row r of x(col, c).
  Var segment_max(PatternPtr pattern, Var x);

  // Index maps.
  Var gather_rows(Var a, IndexMap rows);
  Var scatter_rows(Var a, IndexMap rows, Index out_rows);
  Var slice_rows(Var a, Index begin, Index count);
  Var concat_rows(Var top, Var bottom);

  // Reductions.
  Var mean_rows(Var a);  // 1 x cols column means
  Var sum(Var a);
  Var mean(Var a);
  Var sum_squares(Var a);
  /// Frobenius norm; the gradient at zero is taken as zero.
  Var norm(Var a);
  /// -log softmax(logits)[label] for a 1 x K row of logits.
  Var softmax_cross_entropy(Var logits, int label);

 private:
  enum class Op {
    Leaf, MatMul, Add, Sub, Mul, Scale, AddRow, LeakyRelu, Relu, Spmm, RowSoftmax, SegmentMax,
    Gather, Scatter, Slice, Concat, MeanRows, Sum, Mean, SumSquares, Norm, SoftmaxCE,
  };

  struct Node {
    Op op = Op::Leaf;
    int a = -1;
    int b = -1;
    int c = -1;
    double scalar = 0.0;
    Index extra = 0;
    PatternPtr pattern;
    IndexMap index;
    std::vector<std::int32_t> argmax;
    Matrix value;
    Matrix adjoint;
    bool needs_grad = false;
  };

  Var push(Node node);
  const Node& at(Var v) const;
  Matrix& adjoint_of(int id);
  void propagate(const Node& n);

  std::vector<Node> nodes_;
};

/// Central finite-difference check of a scalar function of several parameter
/// matrices. `build` records the loss on a fresh tape given leaf variables.
struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  Index worst_entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Relative error is |a - n| / max(|a|, |n|, floor). Central differences of an
/// O(1) loss carry roundoff near 1e-16 / step = 1e-10, so the default floor
/// keeps that noise two orders below a 1e-4 tolerance.
GradientCheckResult gradient_check(const std::vector<Matrix>& params, const LossBuilder& build, double step = 1e-6,
                                   double floor = 1e-5);

}  // namespace spherelift::ad
