#pragma once

#include "spherelift/icosphere.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace spherelift {

struct PropertyOptions {
  /// Check a single level; by default levels 1 .. min(max_level, 4).
  std::optional<int> level;
  std::uint64_t seed = 0;
  int channels = 4;
  /// Random attention parameterizations checked per level, besides the handcrafted operators.
  int attention_trials = 10;
  int attention_hidden = 4;
  /// Impulse sources for the locality check (all nodes when the level has fewer).
  int impulses = 50;
  /// Rescales predict row 0 of every tested operator set to this row sum.
  std::optional<double> perturbed_row_sum;
  bool gradient = true;
};

struct PropertyResult {
  std::string name;
  int level = 0;  // 0 for level-independent checks
  bool passed = true;
  /// Worst observed value (error, norm or hop count) and its bound.
  double value = 0.0;
  double bound = 0.0;
  std::string counterexample;
};

struct PropertyReport {
  std::vector<PropertyResult> results;

  bool ok() const;
  const PropertyResult* first_failure() const;
  nlohmann::json to_json() const;
};

/// Invertibility, vanishing moment, idempotence of unpool-then-pool, two-hop
/// locality, operator row sums, and a finite-difference gradient check of the
/// full training loss on a level-1 network.
PropertyReport run_properties(const IcosphereHierarchy& h, const PropertyOptions& opts);

}  // namespace spherelift
