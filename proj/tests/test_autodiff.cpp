#include "doctest.h"
#include "oracles.hpp"

#include "spherelift/autodiff.hpp"
#include "spherelift/lifting.hpp"

#include <random>

using namespace spherelift;
using ad::Tape;
using ad::Var;

namespace {

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

// Gradient of a scalar tape program with respect to one input, both ways.
template <typename Program>
void check_against_fd(const Matrix& x0, Program&& program, double tol = 1e-6) {
  Tape tape;
  const Var x = tape.input(x0, true);
  const Var out = program(tape, x);
  tape.backward(out);
  const Matrix analytic = tape.grad(x);
  const Matrix numeric = oracle::finite_difference(
      [&](const Matrix& xv) {
        Tape t;
        return t.value(program(t, t.constant(xv)))(0, 0);
      },
      x0);
  CHECK(oracle::max_relative_error(analytic, numeric) <= tol);
}

}  // namespace

TEST_CASE("recorded products equal eager evaluation") {
  std::mt19937_64 rng(1);
  const Matrix a = random_matrix(4, 3, rng), x = random_matrix(3, 2, rng);
  Tape tape;
  const Var y = tape.matmul(tape.constant(a), tape.constant(x));
  CHECK(tape.value(y) == Matrix(a * x));
}

TEST_CASE("gradient of the squared norm") {
  std::mt19937_64 rng(2);
  const Matrix x0 = random_matrix(5, 2, rng);
  Tape tape;
  const Var x = tape.input(x0, true);
  tape.backward(tape.sum_squares(x));
  CHECK((tape.grad(x) - 2.0 * x0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("row softmax gradient matches the closed-form Jacobian") {
  auto pattern = std::make_shared<CsrPattern>(CsrPattern::from_pairs(1, 3, {{0, 0}, {0, 1}, {0, 2}}));
  Matrix s(3, 1), w(3, 1);
  s << 0.3, -1.2, 2.0;
  w << 1.5, -0.5, 2.5;
  Tape tape;
  const Var sv = tape.input(s, true);
  const Var p = tape.row_softmax(pattern, sv);
  tape.backward(tape.sum(tape.mul(p, tape.constant(w))));
  const Matrix& pv = tape.value(p);
  const double pw = pv.cwiseProduct(w).sum();
  for (int k = 0; k < 3; ++k) CHECK(tape.grad(sv)(k, 0) == doctest::Approx(pv(k, 0) * (w(k, 0) - pw)).epsilon(1e-14));
}

TEST_CASE("every primitive passes a finite-difference check") {
  std::mt19937_64 rng(3);
  const Matrix a = random_matrix(4, 3, rng);
  const Matrix b = random_matrix(3, 2, rng);
  const Matrix w = random_matrix(4, 3, rng);
  auto pattern = std::make_shared<CsrPattern>(
      CsrPattern::from_pairs(3, 4, {{0, 0}, {0, 2}, {1, 1}, {1, 2}, {1, 3}, {2, 0}, {2, 3}}));
  const Matrix vals = random_matrix(7, 1, rng);
  auto idx = std::make_shared<const std::vector<std::int32_t>>(std::vector<std::int32_t>{2, 0, 2, 3});

  auto weighted = [&](Tape& t, Var v) {
    Matrix wv = Matrix::Ones(t.value(v).rows(), t.value(v).cols());
    for (Index i = 0; i < wv.size(); ++i) wv.data()[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
    return t.sum(t.mul(v, t.constant(wv)));
  };

  SUBCASE("matmul") {
    check_against_fd(a, [&](Tape& t, Var x) { return weighted(t, t.matmul(x, t.constant(b))); });
    check_against_fd(b, [&](Tape& t, Var x) { return weighted(t, t.matmul(t.constant(a), x)); });
  }
  SUBCASE("add sub mul scale") {
    check_against_fd(a, [&](Tape& t, Var x) { return weighted(t, t.add(x, t.constant(w))); });
    check_against_fd(a, [&](Tape& t, Var x) { return weighted(t, t.sub(t.constant(w), x)); });
    check_against_fd(a, [&](Tape& t, Var x) { return weighted(t, t.mul(x, x)); });
    check_against_fd(a, [&](Tape& t, Var x) { return weighted(t, t.scale(x, -2.5)); });
  }
  SUBCASE("add_row") {
    check_against_fd(Matrix(a.row(0)), [&](Tape& t, Var r) { return weighted(t, t.add_row(t.constant(w), r)); });
  }
  SUBCASE("activations") {
    check_against_fd(a, [&](Tape& t, Var x) { return weighted(t, t.leaky_relu(x, 0.2)); });
    check_against_fd(a, [&](Tape& t, Var x) { return weighted(t, t.relu(x)); });
  }
  SUBCASE("sparse product, both arguments") {
    check_against_fd(vals, [&](Tape& t, Var v) { return weighted(t, t.spmm(pattern, v, t.constant(w))); });
    check_against_fd(w, [&](Tape& t, Var x) { return weighted(t, t.spmm(pattern, t.constant(vals), x)); });
  }
  SUBCASE("row softmax and segment max") {
    check_against_fd(vals, [&](Tape& t, Var v) { return weighted(t, t.row_softmax(pattern, v)); });
    check_against_fd(w, [&](Tape& t, Var x) { return weighted(t, t.segment_max(pattern, x)); });
  }
  SUBCASE("index maps") {
    check_against_fd(a, [&](Tape& t, Var x) { return weighted(t, t.gather_rows(x, idx)); });
    check_against_fd(a, [&](Tape& t, Var x) { return weighted(t, t.scatter_rows(x, idx, 5)); });
    check_against_fd(a, [&](Tape& t, Var x) { return weighted(t, t.slice_rows(x, 1, 2)); });
    check_against_fd(a, [&](Tape& t, Var x) { return weighted(t, t.concat_rows(x, t.constant(w))); });
  }
  SUBCASE("reductions") {
    check_against_fd(a, [&](Tape& t, Var x) { return weighted(t, t.mean_rows(x)); });
    check_against_fd(a, [&](Tape& t, Var x) { return t.mean(x); });
    check_against_fd(a, [&](Tape& t, Var x) { return t.sum_squares(x); });
    check_against_fd(a, [&](Tape& t, Var x) { return t.norm(x); });
    check_against_fd(Matrix(a.row(1)), [&](Tape& t, Var x) { return t.softmax_cross_entropy(x, 2); });
  }
}

TEST_CASE("norm has zero gradient at zero") {
  Tape tape;
  const Var x = tape.input(Matrix::Zero(3, 2), true);
  tape.backward(tape.norm(x));
  CHECK(tape.grad(x).isZero(0));
}

TEST_CASE("backward rejects non-scalar outputs") {
  Tape tape;
  const Var x = tape.input(Matrix::Ones(2, 2), true);
  CHECK_THROWS_AS(tape.backward(x), Error);
}

TEST_CASE("recorded lifting matches the eager transform bitwise") {
  const auto h = build_hierarchy(2);
  const auto adj = split_adjacency(h, 2);
  const auto ops = handcrafted_operators(adj);
  std::mt19937_64 rng(4);
  SphericalSignal x{2, random_matrix(h.node_count(2), 3, rng)};
  const auto sub = lift_forward(x, ops);

  Tape tape;
  const Var xv = tape.constant(x.values);
  const Var u = tape.constant(Eigen::Map<const Matrix>(ops.update.values.data(), adj.M->nnz(), 1));
  const Var p = tape.constant(Eigen::Map<const Matrix>(ops.predict.values.data(), adj.N->nnz(), 1));
  const Var xe = tape.slice_rows(xv, 0, adj.even_count());
  const Var xo = tape.slice_rows(xv, adj.even_count(), adj.odd_count());
  const Var c = tape.add(xe, tape.spmm(adj.M, u, xo));
  const Var d = tape.sub(xo, tape.spmm(adj.N, p, c));
  CHECK(tape.value(c) == sub.C);
  CHECK(tape.value(d) == sub.D);
}

TEST_CASE("identical inputs give bitwise identical gradients") {
  std::mt19937_64 rng(5);
  const Matrix a = random_matrix(6, 4, rng);
  const Matrix b = random_matrix(4, 3, rng);
  auto run = [&] {
    Tape t;
    const Var x = t.input(a, true);
    const Var y = t.leaky_relu(t.matmul(x, t.constant(b)), 0.2);
    t.backward(t.norm(y));
    return t.grad(x);
  };
  CHECK(run() == run());
}

TEST_CASE("library gradient_check agrees on a small program") {
  std::mt19937_64 rng(6);
  const auto result = ad::gradient_check({random_matrix(3, 3, rng), random_matrix(3, 1, rng)},
                                         [](Tape& t, const std::vector<Var>& v) {
                                           return t.norm(t.leaky_relu(t.matmul(v[0], v[1]), 0.2));
                                         });
  CHECK(result.max_relative_error <= 1e-6);
}

TEST_CASE("gradient_check catches a gradient that is off by 0.1%") {
  std::mt19937_64 rng(7);
  // The analytic pass (leaves requiring gradients) sees a slightly scaled program.
  const auto result = ad::gradient_check({random_matrix(3, 3, rng), random_matrix(3, 1, rng)},
                                         [](Tape& t, const std::vector<Var>& v) {
                                           const Var y = t.sum_squares(t.matmul(v[0], v[1]));
                                           return t.requires_grad(v[0]) ? t.scale(y, 1.001) : y;
                                         });
  CHECK(result.max_relative_error > 5e-4);
  CHECK(result.max_relative_error < 2e-3);
}
