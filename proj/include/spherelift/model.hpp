#pragma once

#include "spherelift/attention.hpp"
#include "spherelift/autodiff.hpp"
#include "spherelift/icosphere.hpp"
#include "spherelift/lifting.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace spherelift {

enum class PoolKind { LiftAdaptive, LiftHandcrafted, Downsample, Mean, Max };
enum class Task { Reconstruction, Classification };
enum class Activation { Relu, Linear };

std::string to_string(PoolKind k);
PoolKind parse_pool_kind(const std::string& s);
std::string to_string(Task t);
Task parse_task(const std::string& s);

inline bool is_lifting(PoolKind k) { return k == PoolKind::LiftAdaptive || k == PoolKind::LiftHandcrafted; }

struct NetworkConfig {
  int max_level = 3;
  int min_level = 1;
  int in_channels = 1;
  /// Feature width per level, from max_level down to min_level.
  std::vector<int> channels{8, 16, 32};
  /// One kind per pooling step, from max_level down; a single entry applies to all.
  std::vector<PoolKind> pooling{PoolKind::LiftAdaptive};
  Task task = Task::Reconstruction;
  int num_classes = 10;
  int attention_hidden = 4;
  bool share_roles = false;
  double negative_slope = 0.2;
  double lambda = 0.1;
  double gamma = 0.01;
  /// Weight of the task term; 0 trains the regularizers alone.
  double task_weight = 1.0;
  std::uint64_t seed = 0;
  Activation activation = Activation::Relu;

  void validate() const;
  int width(int level) const { return channels.at(static_cast<std::size_t>(max_level - level)); }
  PoolKind pool_kind(int level) const;
};

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);

/// Ordered named parameter matrices.
class ParameterSet {
 public:
  void add(std::string name, Matrix value);
  bool contains(const std::string& name) const { return lookup_.count(name) != 0; }
  const Matrix& at(const std::string& name) const;
  Matrix& at(const std::string& name);
  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const Matrix& value(std::size_t i) const { return values_[i]; }
  Matrix& value(std::size_t i) { return values_[i]; }
  Index scalar_count() const;

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::map<std::string, std::size_t> lookup_;
};

/// Parameters as tape leaves, addressable by name.
class BoundParameters {
 public:
  BoundParameters(ad::Tape& tape, const ParameterSet& params, bool requires_grad);
  /// Names from `params`, leaves already on a tape (same order).
  BoundParameters(const ParameterSet& params, std::vector<ad::Var> vars);
  ad::Var operator()(const std::string& name) const;
  const std::vector<ad::Var>& vars() const { return vars_; }

 private:
  const ParameterSet* params_;
  std::vector<ad::Var> vars_;
};

/// What one pooling step leaves behind for the loss and for the matching unpooling.
struct PoolRecord {
  int level = 0;
  PoolKind kind = PoolKind::Downsample;
  ad::Var update;   // lifting kinds only
  ad::Var predict;  // lifting kinds only
  ad::Var detail;   // lifting kinds only
  ad::Var input_mean;
  ad::Var approx_mean;
};

struct EncoderTrace {
  ad::Var code;
  std::vector<PoolRecord> pools;  // ordered from max_level down
};

struct LossTerms {
  ad::Var output;
  ad::Var task;
  ad::Var detail;
  ad::Var mean;
  ad::Var total;
};

/// Encoder-decoder / classifier over an icosphere hierarchy. Feature blocks are
/// one-hop graph convolutions: act(X Ws + A_hat X Wn + b), with A_hat the
/// row-normalized adjacency including self loops.
class Network {
 public:
  Network(std::shared_ptr<const IcosphereHierarchy> mesh, NetworkConfig cfg);

  const NetworkConfig& config() const { return cfg_; }
  const IcosphereHierarchy& mesh() const { return *mesh_; }
  const BlockAdjacency& blocks(int level) const;
  /// Row-normalized adjacency with self loops used by the feature blocks.
  const CsrMatrix& aggregation(int level) const;

  /// Seeded initialization: feature weights uniform in +-sqrt(3 / fan_in),
  /// biases zero, attention projections random and scoring vectors zero, so
  /// the initial adaptive operators equal the handcrafted ones.
  ParameterSet init_params() const;
  /// Feature blocks act as identity (needs equal widths), heads are identity.
  ParameterSet identity_params() const;

  EncoderTrace encode(ad::Tape& tape, ad::Var x, const BoundParameters& p) const;
  ad::Var decode(ad::Tape& tape, ad::Var code, const std::vector<PoolRecord>& cache, const BoundParameters& p) const;
  ad::Var classify(ad::Tape& tape, const EncoderTrace& trace, const BoundParameters& p) const;

  /// Full objective for one sample: task_weight * task + lambda * sum ||D|| + gamma * sum ||mean(X) - mean(C)||.
  LossTerms record_loss(ad::Tape& tape, const Matrix& input, const Matrix* target, int label,
                        const BoundParameters& p) const;

 private:
  ad::Var feature_block(ad::Tape& tape, ad::Var x, int level, const std::string& prefix, const BoundParameters& p) const;
  PoolRecord pool(ad::Tape& tape, ad::Var x, int level, ad::Var& pooled, const BoundParameters& p) const;
  ad::Var unpool(ad::Tape& tape, ad::Var c, const PoolRecord& rec) const;

  struct LevelData {
    BlockAdjacency blocks;
    CsrMatrix aggregation;
    Matrix handcrafted_update;
    Matrix handcrafted_predict;
    PatternPtr pool_pattern;  // even rows: self plus odd neighbours
    Matrix mean_weights;
  };

  std::shared_ptr<const IcosphereHierarchy> mesh_;
  NetworkConfig cfg_;
  std::vector<LevelData> levels_;
};

// Eager entry points.

struct CachedPool {
  int level = 0;
  PoolKind kind = PoolKind::Downsample;
  std::optional<LiftingOperators> ops;
};

struct EncoderResult {
  SphericalSignal code;
  std::vector<Matrix> details;
  std::vector<CachedPool> op_cache;
};

EncoderResult encoder_forward(const Network& net, const SphericalSignal& x, const ParameterSet& params);
SphericalSignal decoder_forward(const Network& net, const SphericalSignal& code, const std::vector<CachedPool>& op_cache,
                                const ParameterSet& params);

struct ClassifyResult {
  Vector logits;
  std::vector<Matrix> details;
};
ClassifyResult classify_forward(const Network& net, const SphericalSignal& x, const ParameterSet& params);

/// Per-level channel means (1 x f) of a pooling input X and its approximation C.
struct MeanPair {
  Matrix input_mean;
  Matrix approx_mean;
};

struct TaskTarget {
  const Matrix* signal = nullptr;  // reconstruction
  int label = -1;                  // classification
};

double total_loss(Task task, const Matrix& task_out, const TaskTarget& target, const std::vector<Matrix>& details,
                  const std::vector<MeanPair>& means, double lambda, double gamma);

/// Central-difference check of the full per-sample loss against reverse mode,
/// over every parameter entry.
ad::GradientCheckResult loss_gradient_check(const Network& net, const ParameterSet& params, const Matrix& input,
                                            const Matrix* target, int label, double step = 1e-6);

}  // namespace spherelift
