#pragma once

#include "spherelift/checkpoint.hpp"
#include "spherelift/model.hpp"
#include "spherelift/signals.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace spherelift {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 20;
  int batch_size = 16;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  /// Only "f64" is implemented.
  std::string precision = "f64";
  int threads = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Dataset averages. `metric` is the MSE for reconstruction and the accuracy
/// for classification.
struct Evaluation {
  double task = 0.0;
  double detail = 0.0;
  double mean = 0.0;
  double total = 0.0;
  double metric = 0.0;
  std::size_t count = 0;
};

struct EpochMetrics {
  int epoch = 0;
  Evaluation train;
  Evaluation validation;
  double seconds = 0.0;
};

struct MetricsReport {
  Task task = Task::Reconstruction;
  std::vector<EpochMetrics> epochs;  // epoch 0 is the initialization
  int best_epoch = 0;

  const EpochMetrics& best() const { return epochs.at(static_cast<std::size_t>(best_epoch)); }
};

std::string metric_name(Task task);

/// Metrics CSV: one row per epoch. Timing is left out so that reruns compare
/// byte for byte.
std::string metrics_csv(const MetricsReport& report);
nlohmann::json metrics_summary(const MetricsReport& report);

/// Called after every epoch with a line-ready JSON event.
using TrainObserver = std::function<void(const nlohmann::json& event)>;

struct TrainResult {
  ParameterSet params;  // best on validation task loss
  MetricsReport report;
};

/// Adam on the per-sample total loss averaged over each batch. Per-sample
/// gradients are summed in sample order, so results do not depend on the
/// thread count. Throws Data with the epoch number on a non-finite loss.
TrainResult train(const TrainConfig& cfg, const Network& net, const Dataset& data, const TrainObserver& observer = {});
TrainResult train(const TrainConfig& cfg, const Network& net, ParameterSet init, const Dataset& data,
                  const TrainObserver& observer = {});

/// Averages over `data`. Reconstruction targets are the inputs.
Evaluation evaluate(const Network& net, const ParameterSet& params, const Dataset& data, int threads = 1);

/// Mean total loss and its gradient over the given samples.
struct BatchGradient {
  double loss = 0.0;
  std::vector<Matrix> grads;
};
BatchGradient batch_gradient(const Network& net, const ParameterSet& params, const Dataset& data,
                             const std::vector<std::size_t>& samples, int threads = 1);

struct ComparisonRow {
  PoolKind kind = PoolKind::LiftAdaptive;
  std::uint64_t seed = 0;
  int best_epoch = 0;
  Evaluation test;
  double train_seconds = 0.0;
};

/// Trains one model per (seed, kind) with the same backbone and data and
/// evaluates each on `test`.
std::vector<ComparisonRow> compare_poolings(const NetworkConfig& base, const std::vector<PoolKind>& kinds,
                                            const std::vector<std::uint64_t>& seeds, const TrainConfig& cfg,
                                            std::shared_ptr<const IcosphereHierarchy> mesh, const Dataset& train_data,
                                            const Dataset& test_data, const TrainObserver& observer = {});

/// Per-run rows without timing.
std::string comparison_csv(const std::vector<ComparisonRow>& rows, Task task);
/// Median test metric per kind, in first-seen order.
std::vector<std::pair<PoolKind, double>> median_metric(const std::vector<ComparisonRow>& rows);

}  // namespace spherelift
