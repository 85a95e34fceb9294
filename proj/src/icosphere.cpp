#include "spherelift/icosphere.hpp"

#include "spherelift/binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace spherelift {
namespace {

using Face = std::array<std::int32_t, 3>;

Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

Edge make_edge(std::int32_t a, std::int32_t b) { return a < b ? Edge{a, b} : Edge{b, a}; }

std::int32_t edge_rank(const std::vector<Edge>& sorted_edges, Edge e) {
  auto it = std::lower_bound(sorted_edges.begin(), sorted_edges.end(), e);
  require(it != sorted_edges.end() && *it == e, ErrorKind::Internal, "face edge missing from edge list");
  return static_cast<std::int32_t>(it - sorted_edges.begin());
}

void base_icosahedron(std::vector<Vec3>& coords, std::vector<Edge>& edges, std::vector<Face>& faces) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const std::vector<Vec3> raw = {
      {-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi},  {0, 1, phi},
      {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1},  {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1},
  };
  coords.clear();
  for (const auto& v : raw) coords.push_back(normalized(v));

  // Unnormalized edge length is exactly 2; every other pair is farther apart.
  auto dist2 = [&](int i, int j) {
    double s = 0;
    for (int k = 0; k < 3; ++k) s += (raw[i][k] - raw[j][k]) * (raw[i][k] - raw[j][k]);
    return s;
  };
  edges.clear();
  for (int i = 0; i < 12; ++i)
    for (int j = i + 1; j < 12; ++j)
      if (std::abs(dist2(i, j) - 4.0) < 1e-9) edges.emplace_back(i, j);
  faces.clear();
  for (int i = 0; i < 12; ++i)
    for (int j = i + 1; j < 12; ++j)
      for (int k = j + 1; k < 12; ++k)
        if (std::abs(dist2(i, j) - 4.0) < 1e-9 && std::abs(dist2(j, k) - 4.0) < 1e-9 &&
            std::abs(dist2(i, k) - 4.0) < 1e-9)
          faces.push_back({i, j, k});
}

}  // namespace

IcosphereHierarchy build_hierarchy(int max_level) {
  require(max_level >= 0 && max_level <= kMaxMeshLevel, ErrorKind::Config,
          "max_level must be in [0, " + std::to_string(kMaxMeshLevel) + "], got " + std::to_string(max_level));
  IcosphereHierarchy h;
  h.max_level = max_level;
  h.coords.resize(max_level + 1);
  h.edges.resize(max_level + 1);
  h.parent_edge.resize(max_level + 1);

  std::vector<Face> faces;
  base_icosahedron(h.coords[0], h.edges[0], faces);

  for (int l = 1; l <= max_level; ++l) {
    const auto& prev_coords = h.coords[l - 1];
    const auto& prev_edges = h.edges[l - 1];
    const auto n_even = static_cast<std::int32_t>(prev_coords.size());

    auto& coords = h.coords[l];
    coords = prev_coords;
    coords.reserve(prev_coords.size() + prev_edges.size());
    for (const auto& [a, b] : prev_edges) {
      const auto& p = prev_coords[a];
      const auto& q = prev_coords[b];
      coords.push_back(normalized({p[0] + q[0], p[1] + q[1], p[2] + q[2]}));
    }
    h.parent_edge[l] = prev_edges;

    std::vector<Edge> edges;
    edges.reserve(4 * prev_edges.size());
    for (std::size_t k = 0; k < prev_edges.size(); ++k) {
      const auto mid = n_even + static_cast<std::int32_t>(k);
      edges.push_back(make_edge(prev_edges[k].first, mid));
      edges.push_back(make_edge(prev_edges[k].second, mid));
    }
    std::vector<Face> next_faces;
    next_faces.reserve(4 * faces.size());
    for (const auto& [a, b, c] : faces) {
      const auto ab = n_even + edge_rank(prev_edges, make_edge(a, b));
      const auto bc = n_even + edge_rank(prev_edges, make_edge(b, c));
      const auto ca = n_even + edge_rank(prev_edges, make_edge(c, a));
      edges.push_back(make_edge(ab, bc));
      edges.push_back(make_edge(bc, ca));
      edges.push_back(make_edge(ca, ab));
      next_faces.push_back({a, ab, ca});
      next_faces.push_back({b, bc, ab});
      next_faces.push_back({c, ca, bc});
      next_faces.push_back({ab, bc, ca});
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    h.edges[l] = std::move(edges);
    faces = std::move(next_faces);
  }
  return h;
}

CsrPattern level_adjacency(const IcosphereHierarchy& h, int level) {
  require(level >= 0 && level <= h.max_level, ErrorKind::Config, "invalid level " + std::to_string(level));
  const Index n = h.node_count(level);
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
  pairs.reserve(2 * h.edges[level].size());
  for (const auto& [a, b] : h.edges[level]) {
    require(a >= 0 && b >= 0 && a < n && b < n, ErrorKind::Data, "edge index out of range");
    pairs.emplace_back(a, b);
    pairs.emplace_back(b, a);
  }
  return CsrPattern::from_pairs(n, n, std::move(pairs));
}

BlockAdjacency split_adjacency(const IcosphereHierarchy& h, int level) {
  require(level >= 1 && level <= h.max_level, ErrorKind::Config,
          "split_adjacency needs 1 <= level <= " + std::to_string(h.max_level) + ", got " +
              std::to_string(level));
  const Index ne = h.even_count(level);
  const Index no = h.odd_count(level);
  using Pairs = std::vector<std::pair<std::int32_t, std::int32_t>>;
  Pairs e, m, n, o;
  for (const auto& [a, b] : h.edges[level]) {
    const bool ea = a < ne;
    const bool eb = b < ne;
    const auto ai = static_cast<std::int32_t>(ea ? a : a - ne);
    const auto bi = static_cast<std::int32_t>(eb ? b : b - ne);
    if (ea && eb) {
      e.emplace_back(ai, bi);
      e.emplace_back(bi, ai);
    } else if (!ea && !eb) {
      o.emplace_back(ai, bi);
      o.emplace_back(bi, ai);
    } else if (ea) {
      m.emplace_back(ai, bi);
      n.emplace_back(bi, ai);
    } else {
      m.emplace_back(bi, ai);
      n.emplace_back(ai, bi);
    }
  }
  BlockAdjacency blocks;
  blocks.level = level;
  blocks.E = std::make_shared<CsrPattern>(CsrPattern::from_pairs(ne, ne, std::move(e)));
  blocks.M = std::make_shared<CsrPattern>(CsrPattern::from_pairs(ne, no, std::move(m)));
  blocks.N = std::make_shared<CsrPattern>(CsrPattern::from_pairs(no, ne, std::move(n)));
  blocks.O = std::make_shared<CsrPattern>(CsrPattern::from_pairs(no, no, std::move(o)));
  return blocks;
}

double geodesic_distance(const Vec3& a, const Vec3& b) {
  // atan2 form stays accurate for nearly coincident points.
  const Vec3 cross = {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
  const double s = std::sqrt(cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]);
  const double c = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  return std::atan2(s, c);
}

bool ValidationReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

const CheckResult* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

ValidationReport validate_hierarchy(const IcosphereHierarchy& h) {
  ValidationReport report;
  report.checks.reserve(16);  // references below must stay valid
  auto add = [&](std::string name) -> CheckResult& {
    report.checks.push_back({std::move(name), true, -1, ""});
    return report.checks.back();
  };
  auto flag = [](CheckResult& c, Index idx, const std::string& detail) {
    if (!c.passed) return;
    c.passed = false;
    c.first_index = idx;
    c.detail = detail;
  };

  auto& levels = add("level_arrays");
  const auto nlev = static_cast<std::size_t>(h.max_level) + 1;
  if (h.max_level < 0 || h.coords.size() != nlev || h.edges.size() != nlev || h.parent_edge.size() != nlev) {
    flag(levels, 0, "per-level arrays do not match max_level");
    return report;
  }

  auto& counts = add("node_count");
  auto& norms = add("unit_norm");
  auto& prefix = add("even_prefix");
  auto& edge_count = add("edge_count");
  auto& edge_valid = add("edge_validity");
  auto& degree = add("degree");
  auto& parents = add("parent_edges");
  auto& blocks = add("block_structure");
  auto& symmetry = add("midpoint_symmetry");

  for (int l = 0; l <= h.max_level; ++l) {
    const Index n = h.node_count(l);
    const std::string at = " at level " + std::to_string(l);
    if (n != icosphere_node_count(l)) flag(counts, l, "expected " + std::to_string(icosphere_node_count(l)) + " nodes" + at);

    for (Index i = 0; i < n; ++i) {
      const auto& p = h.coords[l][i];
      const double norm = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
      if (!(std::abs(norm - 1.0) <= 1e-12)) {
        std::ostringstream os;
        os << "node " << i << at << " has norm " << norm;
        flag(norms, i, os.str());
      }
    }
    if (l > 0) {
      const Index ne = std::min(h.node_count(l - 1), n);
      for (Index i = 0; i < ne; ++i)
        if (h.coords[l][i] != h.coords[l - 1][i]) flag(prefix, i, "even node differs from coarser level" + at);
    }

    const auto& edges = h.edges[l];
    const auto expected_edges = 30 * (Index{1} << (2 * l));
    if (static_cast<Index>(edges.size()) != expected_edges)
      flag(edge_count, static_cast<Index>(edges.size()), "expected " + std::to_string(expected_edges) + " edges" + at);

    bool edges_ok = true;
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const auto [a, b] = edges[k];
      if (a < 0 || b >= n || a >= b || (k > 0 && !(edges[k - 1] < edges[k]))) {
        flag(edge_valid, static_cast<Index>(k), "edge " + std::to_string(k) + " malformed or unsorted" + at);
        edges_ok = false;
      }
    }
    if (!edges_ok) continue;

    std::vector<int> deg(n, 0);
    for (const auto& [a, b] : edges) {
      ++deg[a];
      ++deg[b];
    }
    for (Index i = 0; i < n; ++i) {
      const int want = i < 12 ? 5 : 6;
      if (deg[i] != want) {
        flag(degree, i, "node " + std::to_string(i) + at + " has degree " + std::to_string(deg[i]) + ", expected " + std::to_string(want));
      }
    }

    if (l == 0) continue;
    const Index ne = h.node_count(l - 1);
    const auto& pe = h.parent_edge[l];
    if (static_cast<Index>(pe.size()) != n - ne || pe != h.edges[l - 1]) {
      flag(parents, l, "parent edges do not enumerate the coarser edges in order" + at);
      continue;
    }
    for (std::size_t k = 0; k < pe.size(); ++k) {
      const auto odd = static_cast<std::int32_t>(ne + static_cast<Index>(k));
      const auto [a, b] = pe[k];
      if (!std::binary_search(edges.begin(), edges.end(), Edge{a, odd}) ||
          !std::binary_search(edges.begin(), edges.end(), Edge{b, odd}))
        flag(parents, odd, "odd node " + std::to_string(odd) + " not linked to its parents" + at);
      const double da = geodesic_distance(h.coords[l][odd], h.coords[l][a]);
      const double db = geodesic_distance(h.coords[l][odd], h.coords[l][b]);
      if (!(std::abs(da - db) <= 1e-9)) flag(symmetry, odd, "odd node " + std::to_string(odd) + " is not equidistant from its parents" + at);
    }

    const auto split = split_adjacency(h, l);
    if (split.E->nnz() != 0) flag(blocks, l, "even-even block is not empty" + at);
    for (Index r = 0; r < split.N->rows; ++r)
      if (split.N->row_degree(r) != 2) flag(blocks, ne + r, "odd node " + std::to_string(ne + r) + " does not have 2 even neighbours" + at);
    for (Index r = 0; r < split.M->rows; ++r) {
      const auto d = split.M->row_degree(r);
      if (d != 5 && d != 6) flag(blocks, r, "even node " + std::to_string(r) + " has " + std::to_string(d) + " odd neighbours" + at);
    }
    if (split.M->nnz() != 2 * split.odd_count()) flag(blocks, l, "nnz(M) != 2 * odd count" + at);
  }
  return report;
}

namespace {
constexpr char kMeshMagic[9] = "SPLMESH1";
}

void save_mesh(const IcosphereHierarchy& h, const std::string& path) {
  nlohmann::json header;
  header["format"] = "spherelift-mesh";
  header["version"] = 1;
  header["max_level"] = h.max_level;
  header["levels"] = nlohmann::json::array();
  for (int l = 0; l <= h.max_level; ++l)
    header["levels"].push_back({{"level", l}, {"nodes", h.coords[l].size()}, {"edges", h.edges[l].size()}});

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Data, "cannot write mesh file " + path);
  io::write_header(out, kMeshMagic, header);
  for (int l = 0; l <= h.max_level; ++l) {
    std::vector<double> xyz;
    xyz.reserve(3 * h.coords[l].size());
    for (const auto& p : h.coords[l]) xyz.insert(xyz.end(), p.begin(), p.end());
    io::write_f64(out, xyz);
    std::vector<std::uint32_t> idx;
    idx.reserve(2 * h.edges[l].size());
    for (const auto& [a, b] : h.edges[l]) {
      idx.push_back(static_cast<std::uint32_t>(a));
      idx.push_back(static_cast<std::uint32_t>(b));
    }
    io::write_u32(out, idx);
  }
  if (!out) fail(ErrorKind::Data, "failed writing mesh file " + path);
}

IcosphereHierarchy load_mesh(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Data, "cannot open mesh file " + path);
  const auto header = io::read_header(in, kMeshMagic, "mesh file " + path);
  IcosphereHierarchy h;
  try {
    if (header.at("format") != "spherelift-mesh" || header.at("version") != 1)
      fail(ErrorKind::Data, "unsupported mesh format in " + path);
    h.max_level = header.at("max_level").get<int>();
    require(h.max_level >= 0 && h.max_level <= kMaxMeshLevel, ErrorKind::Data, "mesh max_level out of range");
    const auto& levels = header.at("levels");
    require(levels.size() == static_cast<std::size_t>(h.max_level) + 1, ErrorKind::Data, "mesh level table size mismatch");
    h.coords.resize(h.max_level + 1);
    h.edges.resize(h.max_level + 1);
    h.parent_edge.resize(h.max_level + 1);
    for (int l = 0; l <= h.max_level; ++l) {
      const auto nodes = levels[l].at("nodes").get<std::size_t>();
      const auto nedges = levels[l].at("edges").get<std::size_t>();
      require(nodes <= static_cast<std::size_t>(icosphere_node_count(kMaxMeshLevel)) && nedges <= 4 * nodes,
              ErrorKind::Data, "mesh level sizes out of range");
      std::vector<double> xyz(3 * nodes);
      io::read_f64(in, xyz, "mesh file " + path);
      h.coords[l].resize(nodes);
      for (std::size_t i = 0; i < nodes; ++i) h.coords[l][i] = {xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]};
      std::vector<std::uint32_t> idx(2 * nedges);
      io::read_u32(in, idx, "mesh file " + path);
      h.edges[l].resize(nedges);
      for (std::size_t k = 0; k < nedges; ++k)
        h.edges[l][k] = {static_cast<std::int32_t>(idx[2 * k]), static_cast<std::int32_t>(idx[2 * k + 1])};
      if (l > 0) h.parent_edge[l] = h.edges[l - 1];
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Data, "malformed mesh header in " + path + ": " + e.what());
  }
  return h;
}

}  // namespace spherelift
