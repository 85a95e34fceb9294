#pragma once

#include "spherelift/sparse.hpp"
#include "spherelift/types.hpp"

#include <array>
#include <string>
#include <vector>

namespace spherelift {

using Vec3 = std::array<double, 3>;
/// Undirected edge stored with first < second.
using Edge = std::pair<std::int32_t, std::int32_t>;

inline constexpr int kMaxMeshLevel = 8;

/// Number of nodes of a level-l icosahedral subdivision: 10 * 4^l + 2.
constexpr Index icosphere_node_count(int level) { return 10 * (Index{1} << (2 * level)) + 2; }

/// Nodes added at level l (the odd partition); zero at level 0.
constexpr Index icosphere_odd_count(int level) {
  return level == 0 ? 0 : icosphere_node_count(level) - icosphere_node_count(level - 1);
}

/// Icosahedral subdivision hierarchy of the unit sphere.
///
/// Node indexing: at level l, indices [0, |S_{l-1}|) are the level-(l-1) nodes
/// (even partition) and the remaining indices are edge midpoints (odd partition),
/// ordered by (min parent, max parent).
struct IcosphereHierarchy {
  int max_level = 0;
  std::vector<std::vector<Vec3>> coords;
  /// Sorted lexicographically.
  std::vector<std::vector<Edge>> edges;
  /// parent_edge[l][k] is the level-(l-1) edge whose midpoint is odd node
  /// |S_{l-1}| + k. Empty at level 0.
  std::vector<std::vector<Edge>> parent_edge;

  Index node_count(int level) const { return static_cast<Index>(coords.at(level).size()); }
  Index even_count(int level) const { return level == 0 ? 0 : node_count(level - 1); }
  Index odd_count(int level) const { return node_count(level) - even_count(level); }
};

/// Deterministic construction from the golden-ratio icosahedron.
IcosphereHierarchy build_hierarchy(int max_level);

/// Symmetric 0/1 adjacency of a level as a pattern (no self loops).
CsrPattern level_adjacency(const IcosphereHierarchy& h, int level);

/// The four blocks of a level adjacency under the even/odd split:
///   A = [E M; N O],  E: even x even, M: even x odd, N: odd x even, O: odd x odd.
struct BlockAdjacency {
  int level = 0;
  PatternPtr E, M, N, O;

  Index even_count() const { return M->rows; }
  Index odd_count() const { return M->cols; }
  Index node_count() const { return even_count() + odd_count(); }
};

BlockAdjacency split_adjacency(const IcosphereHierarchy& h, int level);

struct CheckResult {
  std::string name;
  bool passed = true;
  /// First offending index (node, edge, or level depending on the check); -1 if none.
  Index first_index = -1;
  std::string detail;
};

struct ValidationReport {
  std::vector<CheckResult> checks;

  bool ok() const;
  const CheckResult* find(const std::string& name) const;
};

ValidationReport validate_hierarchy(const IcosphereHierarchy& h);

double geodesic_distance(const Vec3& a, const Vec3& b);

void save_mesh(const IcosphereHierarchy& h, const std::string& path);
IcosphereHierarchy load_mesh(const std::string& path);

}  // namespace spherelift
