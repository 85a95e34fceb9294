#include "spherelift/properties.hpp"

#include "spherelift/attention.hpp"
#include "spherelift/lifting.hpp"
#include "spherelift/model.hpp"

#include <cmath>
#include <memory>
#include <queue>
#include <random>
#include <sstream>

namespace spherelift {

bool PropertyReport::ok() const { return first_failure() == nullptr; }

const PropertyResult* PropertyReport::first_failure() const {
  for (const auto& r : results)
    if (!r.passed) return &r;
  return nullptr;
}

nlohmann::json PropertyReport::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json j = {{"property", r.name}, {"level", r.level}, {"passed", r.passed}, {"value", r.value},
                        {"bound", r.bound}};
    if (!r.counterexample.empty()) j["counterexample"] = r.counterexample;
    out.push_back(std::move(j));
  }
  return out;
}

namespace {

struct NamedOperators {
  std::string name;
  LiftingOperators ops;
};

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

std::vector<NamedOperators> operator_sets(const IcosphereHierarchy& h, const BlockAdjacency& adj,
                                          const PropertyOptions& opts, std::mt19937_64& rng) {
  std::vector<NamedOperators> sets;
  sets.push_back({"handcrafted", handcrafted_operators(adj)});
  for (int t = 0; t < opts.attention_trials; ++t) {
    AttentionParams p;
    for (auto* role : {&p.update, &p.predict}) {
      role->W0 = random_matrix(opts.channels, opts.attention_hidden, rng);
      role->w1 = random_matrix(opts.attention_hidden, 1, rng);
      role->w2 = random_matrix(opts.attention_hidden, 1, rng);
    }
    const SphericalSignal features{adj.level, random_matrix(h.node_count(adj.level), opts.channels, rng)};
    sets.push_back({"attention#" + std::to_string(t), compute_operators(features, adj, p)});
  }
  if (opts.perturbed_row_sum) {
    for (auto& s : sets) {
      const double target = *opts.perturbed_row_sum;
      const double current = s.ops.predict.row_sum(0);
      const auto& rp = s.ops.predict.pattern->row_ptr;
      for (auto e = rp[0]; e < rp[1]; ++e) s.ops.predict.values[e] *= target / current;
    }
  }
  return sets;
}

std::vector<int> hop_distances(const CsrPattern& adj, Index source) {
  std::vector<int> dist(static_cast<std::size_t>(adj.rows), -1);
  std::queue<Index> queue;
  dist[source] = 0;
  queue.push(source);
  while (!queue.empty()) {
    const Index u = queue.front();
    queue.pop();
    for (auto v : adj.row(u))
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push(v);
      }
  }
  return dist;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Keeps the worst value seen and describes where it happened.
struct Worst {
  double value = 0.0;
  std::string where;
  void offer(double v, const std::string& w) {
    if (v > value || where.empty()) value = v, where = w;
  }
};

PropertyResult finish(std::string name, int level, const Worst& worst, double bound, const std::string& what) {
  PropertyResult r{std::move(name), level, worst.value <= bound, worst.value, bound, {}};
  if (!r.passed) r.counterexample = what + " " + fmt(worst.value) + " at " + worst.where;
  return r;
}

void check_level(const IcosphereHierarchy& h, int level, const PropertyOptions& opts, PropertyReport& report) {
  std::mt19937_64 rng(opts.seed * 1000003ULL + static_cast<std::uint64_t>(level));
  const auto adj = split_adjacency(h, level);
  const auto sets = operator_sets(h, adj, opts, rng);
  const Index n = h.node_count(level);
  const Index ne = adj.even_count();

  {
    PropertyResult r{"row_sums", level, true, 0.0, 1e-9, {}};
    for (const auto& s : sets) {
      const auto problem = check_operators(s.ops, adj, 1e-9);
      double dev = 0.0;
      for (Index i = 0; i < s.ops.update.pattern->rows; ++i) dev = std::max(dev, std::abs(s.ops.update.row_sum(i) - 1.0));
      for (Index j = 0; j < s.ops.predict.pattern->rows; ++j) dev = std::max(dev, std::abs(s.ops.predict.row_sum(j) - 0.5));
      r.value = std::max(r.value, dev);
      if (!problem.empty() && r.passed) {
        r.passed = false;
        r.counterexample = s.name + ": " + problem;
      }
    }
    report.results.push_back(r);
  }

  {
    Worst worst;
    for (const auto& s : sets) {
      const SphericalSignal x{level, random_matrix(n, opts.channels, rng)};
      const auto sub = lift_forward(x, s.ops);
      const auto back = lift_backward(sub, s.ops);
      Index row = 0, col = 0;
      const double err = (back.values - x.values).cwiseAbs().maxCoeff(&row, &col) / x.values.cwiseAbs().maxCoeff();
      worst.offer(err, s.name + " node " + std::to_string(row) + " channel " + std::to_string(col));
    }
    report.results.push_back(finish("invertibility", level, worst, 1e-10, "relative error"));
  }

  {
    Worst worst;
    for (const auto& s : sets) {
      for (double c : {1.0, -2.5}) {
        const auto sub = lift_forward({level, Matrix::Constant(n, opts.channels, c)}, s.ops);
        Index row = 0, col = 0;
        const double dmax = sub.D.cwiseAbs().maxCoeff(&row, &col) / std::abs(c);
        worst.offer(dmax, s.name + " odd node " + std::to_string(ne + row) + " for constant " + fmt(c));
      }
    }
    report.results.push_back(finish("vanishing_moment", level, worst, 1e-9, "|D|inf"));
  }

  {
    Worst worst;
    for (const auto& s : sets) {
      const SphericalSignal c{level - 1, random_matrix(ne, opts.channels, rng)};
      const auto sub = lift_forward(lift_unpool(c, s.ops), s.ops);
      const double scale = c.values.cwiseAbs().maxCoeff();
      const double err = std::max((sub.C - c.values).cwiseAbs().maxCoeff(), sub.D.cwiseAbs().maxCoeff()) / scale;
      worst.offer(err, s.name);
    }
    report.results.push_back(finish("idempotence", level, worst, 1e-10, "relative error"));
  }

  {
    const auto graph = level_adjacency(h, level);
    std::vector<Index> sources;
    if (n <= opts.impulses) {
      for (Index i = 0; i < n; ++i) sources.push_back(i);
    } else {
      std::uniform_int_distribution<Index> pick(0, n - 1);
      for (int k = 0; k < opts.impulses; ++k) sources.push_back(pick(rng));
    }
    Worst worst;
    for (const auto& s : sets) {
      for (const Index src : sources) {
        SphericalSignal x{level, Matrix::Zero(n, 1)};
        x.values(src, 0) = 1.0;
        const auto sub = lift_forward(x, s.ops);
        const auto dist = hop_distances(graph, src);
        for (Index i = 0; i < n; ++i) {
          const double v = i < ne ? sub.C(i, 0) : sub.D(i - ne, 0);
          if (v != 0.0)
            worst.offer(dist[i], s.name + " impulse " + std::to_string(src) + " reaches node " + std::to_string(i));
        }
      }
    }
    report.results.push_back(finish("locality", level, worst, 2.0, "hop distance"));
  }
}

void check_gradient(const PropertyOptions& opts, PropertyReport& report) {
  auto mesh = std::make_shared<const IcosphereHierarchy>(build_hierarchy(1));
  std::mt19937_64 rng(opts.seed + 77);
  Worst worst;
  for (auto task : {Task::Reconstruction, Task::Classification}) {
    NetworkConfig cfg;
    cfg.max_level = 1;
    cfg.min_level = 0;
    cfg.in_channels = 2;
    cfg.channels = {2, 2};
    cfg.task = task;
    cfg.num_classes = 3;
    cfg.attention_hidden = 2;
    cfg.lambda = 0.1;
    cfg.gamma = 0.01;
    cfg.seed = opts.seed;
    const Network net(mesh, cfg);
    auto params = net.init_params();
    std::uniform_real_distribution<double> ud(-0.5, 0.5);
    for (std::size_t i = 0; i < params.size(); ++i)
      for (Index k = 0; k < params.value(i).size(); ++k) params.value(i).data()[k] = ud(rng);
    Matrix x(mesh->node_count(1), 2);
    for (Index k = 0; k < x.size(); ++k) x.data()[k] = ud(rng) + 0.5;
    const auto res = loss_gradient_check(net, params, x, &x, 1);
    worst.offer(res.max_relative_error, to_string(task) + " loss, parameter " + params.name(res.worst_param) +
                                            " entry " + std::to_string(res.worst_entry));
  }
  report.results.push_back(finish("gradient", 0, worst, 1e-4, "relative error"));
}

}  // namespace

PropertyReport run_properties(const IcosphereHierarchy& h, const PropertyOptions& opts) {
  require(h.max_level >= 1, ErrorKind::Config, "property checks need a mesh with max_level >= 1");
  require(opts.channels >= 1 && opts.attention_trials >= 0 && opts.attention_hidden >= 1 && opts.impulses >= 1,
          ErrorKind::Config, "invalid property options");
  if (opts.perturbed_row_sum)
    require(std::isfinite(*opts.perturbed_row_sum), ErrorKind::Config, "perturbed row sum must be finite");
  int lo = 1, hi = std::min(h.max_level, 4);
  if (opts.level) {
    require(*opts.level >= 1 && *opts.level <= h.max_level, ErrorKind::Config,
            "check level must lie in [1, " + std::to_string(h.max_level) + "]");
    lo = hi = *opts.level;
  }
  PropertyReport report;
  for (int l = lo; l <= hi; ++l) check_level(h, l, opts, report);
  if (opts.gradient) check_gradient(opts, report);
  return report;
}

}  // namespace spherelift
