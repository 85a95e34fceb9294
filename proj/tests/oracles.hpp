#pragma once

// Test-only reference implementations. They deliberately avoid the library's
// sparse kernels and index conventions so they can check them.

#include "spherelift/icosphere.hpp"
#include "spherelift/types.hpp"

#include <array>
#include <cmath>
#include <map>
#include <set>
#include <tuple>
#include <vector>

namespace oracle {

using spherelift::Index;
using spherelift::Matrix;

/// Subdivides the icosahedron by geometry alone, deduplicating points by
/// rounded coordinates. Returns the number of distinct vertices per level.
inline std::vector<std::size_t> brute_force_vertex_counts(int max_level) {
  using P = std::array<double, 3>;
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<P> base = {{-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi},  {0, 1, phi},
                         {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1},  {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
  auto unit = [](P p) {
    const double n = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    return P{p[0] / n, p[1] / n, p[2] / n};
  };
  for (auto& p : base) p = unit(p);
  auto d2 = [](const P& a, const P& b) {
    return (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]);
  };
  double edge2 = 1e9;
  for (int i = 0; i < 12; ++i)
    for (int j = i + 1; j < 12; ++j) edge2 = std::min(edge2, d2(base[i], base[j]));
  std::vector<std::array<P, 3>> tris;
  for (int i = 0; i < 12; ++i)
    for (int j = i + 1; j < 12; ++j)
      for (int k = j + 1; k < 12; ++k)
        if (std::abs(d2(base[i], base[j]) - edge2) < 1e-9 && std::abs(d2(base[j], base[k]) - edge2) < 1e-9 &&
            std::abs(d2(base[i], base[k]) - edge2) < 1e-9)
          tris.push_back({base[i], base[j], base[k]});
  auto key = [](const P& p) {
    return std::make_tuple(std::llround(p[0] * 1e9), std::llround(p[1] * 1e9), std::llround(p[2] * 1e9));
  };
  std::vector<std::size_t> counts;
  for (int l = 0; l <= max_level; ++l) {
    std::set<std::tuple<long long, long long, long long>> seen;
    for (const auto& t : tris)
      for (const auto& p : t) seen.insert(key(p));
    counts.push_back(seen.size());
    std::vector<std::array<P, 3>> next;
    for (const auto& [a, b, c] : tris) {
      auto mid = [&](const P& x, const P& y) { return unit({x[0] + y[0], x[1] + y[1], x[2] + y[2]}); };
      const P ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
      next.push_back({a, ab, ca});
      next.push_back({b, bc, ab});
      next.push_back({c, ca, bc});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }
  return counts;
}

/// Neighbour lists from the raw edge list of a level.
inline std::vector<std::vector<int>> neighbours(const spherelift::IcosphereHierarchy& h, int level) {
  std::vector<std::vector<int>> nb(h.coords[level].size());
  for (const auto& [a, b] : h.edges[level]) {
    nb[a].push_back(b);
    nb[b].push_back(a);
  }
  return nb;
}

struct DenseOperators {
  Matrix U;  // even x odd
  Matrix P;  // odd x even
};

/// Uniform operators built from neighbour lists only.
inline DenseOperators dense_handcrafted(const spherelift::IcosphereHierarchy& h, int level) {
  const auto nb = neighbours(h, level);
  const Index ne = static_cast<Index>(h.coords[level - 1].size());
  const Index no = static_cast<Index>(h.coords[level].size()) - ne;
  DenseOperators d{Matrix::Zero(ne, no), Matrix::Zero(no, ne)};
  for (Index i = 0; i < ne; ++i) {
    int k = 0;
    for (int j : nb[i]) k += j >= ne;
    for (int j : nb[i])
      if (j >= ne) d.U(i, j - ne) = 1.0 / k;
  }
  for (Index j = 0; j < no; ++j) {
    int k = 0;
    for (int i : nb[ne + j]) k += i < ne;
    for (int i : nb[ne + j])
      if (i < ne) d.P(j, i) = 0.5 / k;
  }
  return d;
}

/// Triple-loop matrix product.
inline Matrix naive_product(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index k = 0; k < a.cols(); ++k)
      for (Index j = 0; j < b.cols(); ++j) out(i, j) += a(i, k) * b(k, j);
  return out;
}

/// Update-first analysis in dense form.
inline std::pair<Matrix, Matrix> dense_forward(const Matrix& x, const DenseOperators& ops) {
  const Index ne = ops.U.rows();
  const Matrix xe = x.topRows(ne);
  const Matrix xo = x.bottomRows(ops.U.cols());
  Matrix c = xe + naive_product(ops.U, xo);
  Matrix d = xo - naive_product(ops.P, c);
  return {c, d};
}

/// Classical predict-first 1D lifting on a periodic signal: d_j = x_o[j] -
/// (x_e[j] + x_e[j+1]) / 2, c_i = x_e[i] + (d_{i-1} + d_i) / 4.
inline std::pair<std::vector<double>, std::vector<double>> predict_first_1d(const std::vector<double>& x) {
  const std::size_t half = x.size() / 2;
  std::vector<double> c(half), d(half);
  for (std::size_t j = 0; j < half; ++j) d[j] = x[2 * j + 1] - 0.5 * (x[2 * j] + x[(2 * j + 2) % x.size()]);
  for (std::size_t i = 0; i < half; ++i) c[i] = x[2 * i] + 0.25 * (d[(i + half - 1) % half] + d[i]);
  return {c, d};
}

/// Hop distances from `source` on a level graph (breadth-first search).
inline std::vector<int> hop_distances(const spherelift::IcosphereHierarchy& h, int level, int source) {
  const auto nb = neighbours(h, level);
  std::vector<int> dist(nb.size(), -1);
  std::vector<int> frontier{source};
  dist[source] = 0;
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    const int u = frontier[head];
    for (int v : nb[u])
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        frontier.push_back(v);
      }
  }
  return dist;
}

/// Central finite differences of f at x along every coordinate.
template <typename F>
Matrix finite_difference(F&& f, Matrix x, double step = 1e-6) {
  Matrix g(x.rows(), x.cols());
  for (Index i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + step;
    const double up = f(x);
    x.data()[i] = orig - step;
    const double down = f(x);
    x.data()[i] = orig;
    g.data()[i] = (up - down) / (2 * step);
  }
  return g;
}

inline double max_relative_error(const Matrix& a, const Matrix& b, double floor = 1e-6) {
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i], y = b.data()[i];
    worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor}));
  }
  return worst;
}

}  // namespace oracle
