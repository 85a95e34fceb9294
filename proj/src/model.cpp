#include "spherelift/model.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

namespace spherelift {

std::string to_string(PoolKind k) {
  switch (k) {
    case PoolKind::LiftAdaptive: return "lift_adaptive";
    case PoolKind::LiftHandcrafted: return "lift_handcrafted";
    case PoolKind::Downsample: return "downsample";
    case PoolKind::Mean: return "mean";
    case PoolKind::Max: return "max";
  }
  return "unknown";
}

PoolKind parse_pool_kind(const std::string& s) {
  for (auto k : {PoolKind::LiftAdaptive, PoolKind::LiftHandcrafted, PoolKind::Downsample, PoolKind::Mean, PoolKind::Max})
    if (to_string(k) == s) return k;
  fail(ErrorKind::Config, "unknown pooling kind '" + s + "'");
}

std::string to_string(Task t) { return t == Task::Reconstruction ? "reconstruction" : "classification"; }

Task parse_task(const std::string& s) {
  if (s == "reconstruction" || s == "recon") return Task::Reconstruction;
  if (s == "classification" || s == "cls") return Task::Classification;
  fail(ErrorKind::Config, "unknown task '" + s + "'");
}

void NetworkConfig::validate() const {
  require(min_level >= 0 && min_level < max_level && max_level <= kMaxMeshLevel, ErrorKind::Config,
          "network levels must satisfy 0 <= min_level < max_level <= " + std::to_string(kMaxMeshLevel));
  require(channels.size() == static_cast<std::size_t>(max_level - min_level + 1), ErrorKind::Config,
          "channels must list one width per level from max_level to min_level");
  for (int c : channels) require(c >= 1, ErrorKind::Config, "channel widths must be positive");
  require(in_channels >= 1, ErrorKind::Config, "in_channels must be positive");
  require(pooling.size() == 1 || pooling.size() == static_cast<std::size_t>(max_level - min_level), ErrorKind::Config,
          "pooling must give one kind or one kind per pooling step");
  require(task != Task::Classification || num_classes >= 2, ErrorKind::Config, "classification needs >= 2 classes");
  require(attention_hidden >= 1, ErrorKind::Config, "attention_hidden must be positive");
  require(lambda >= 0 && gamma >= 0 && std::isfinite(lambda) && std::isfinite(gamma), ErrorKind::Config,
          "lambda and gamma must be finite and non-negative");
  require(task_weight >= 0 && std::isfinite(task_weight), ErrorKind::Config, "task_weight must be finite and non-negative");
  require(std::isfinite(negative_slope), ErrorKind::Config, "negative_slope must be finite");
}

PoolKind NetworkConfig::pool_kind(int level) const {
  if (pooling.size() == 1) return pooling.front();
  return pooling.at(static_cast<std::size_t>(max_level - level));
}

void to_json(nlohmann::json& j, const NetworkConfig& c) {
  std::vector<std::string> kinds;
  for (auto k : c.pooling) kinds.push_back(to_string(k));
  j = {{"max_level", c.max_level},
       {"min_level", c.min_level},
       {"in_channels", c.in_channels},
       {"channels", c.channels},
       {"pooling", kinds},
       {"task", to_string(c.task)},
       {"num_classes", c.num_classes},
       {"attention_hidden", c.attention_hidden},
       {"share_roles", c.share_roles},
       {"negative_slope", c.negative_slope},
       {"lambda", c.lambda},
       {"gamma", c.gamma},
       {"task_weight", c.task_weight},
       {"seed", c.seed},
       {"activation", c.activation == Activation::Relu ? "relu" : "linear"}};
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
  try {
    c.max_level = j.value("max_level", c.max_level);
    c.min_level = j.value("min_level", c.min_level);
    c.in_channels = j.value("in_channels", c.in_channels);
    if (j.contains("channels")) c.channels = j.at("channels").get<std::vector<int>>();
    if (j.contains("pooling")) {
      c.pooling.clear();
      if (j.at("pooling").is_string())
        c.pooling.push_back(parse_pool_kind(j.at("pooling").get<std::string>()));
      else
        for (const auto& k : j.at("pooling")) c.pooling.push_back(parse_pool_kind(k.get<std::string>()));
    }
    if (j.contains("task")) c.task = parse_task(j.at("task").get<std::string>());
    c.num_classes = j.value("num_classes", c.num_classes);
    c.attention_hidden = j.value("attention_hidden", c.attention_hidden);
    c.share_roles = j.value("share_roles", c.share_roles);
    c.negative_slope = j.value("negative_slope", c.negative_slope);
    c.lambda = j.value("lambda", c.lambda);
    c.gamma = j.value("gamma", c.gamma);
    c.task_weight = j.value("task_weight", c.task_weight);
    c.seed = j.value("seed", c.seed);
    if (j.contains("activation")) {
      const auto a = j.at("activation").get<std::string>();
      require(a == "relu" || a == "linear", ErrorKind::Config, "activation must be relu or linear");
      c.activation = a == "relu" ? Activation::Relu : Activation::Linear;
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed network config: ") + e.what());
  }
}

void ParameterSet::add(std::string name, Matrix value) {
  require(!contains(name), ErrorKind::Internal, "duplicate parameter " + name);
  lookup_[name] = values_.size();
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

const Matrix& ParameterSet::at(const std::string& name) const {
  auto it = lookup_.find(name);
  require(it != lookup_.end(), ErrorKind::Config, "missing parameter " + name);
  return values_[it->second];
}

Matrix& ParameterSet::at(const std::string& name) {
  auto it = lookup_.find(name);
  require(it != lookup_.end(), ErrorKind::Config, "missing parameter " + name);
  return values_[it->second];
}

Index ParameterSet::scalar_count() const {
  Index n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

BoundParameters::BoundParameters(ad::Tape& tape, const ParameterSet& params, bool requires_grad) : params_(&params) {
  vars_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) vars_.push_back(tape.input(params.value(i), requires_grad));
}

BoundParameters::BoundParameters(const ParameterSet& params, std::vector<ad::Var> vars)
    : params_(&params), vars_(std::move(vars)) {
  require(vars_.size() == params.size(), ErrorKind::Internal, "parameter binding size mismatch");
}

ad::Var BoundParameters::operator()(const std::string& name) const {
  for (std::size_t i = 0; i < params_->size(); ++i)
    if (params_->name(i) == name) return vars_[i];
  fail(ErrorKind::Config, "missing parameter " + name);
}

namespace {

std::string block_name(const char* stage, int level) { return std::string(stage) + std::to_string(level); }
std::string attention_name(int level, const char* role, const char* part) {
  return "att" + std::to_string(level) + "." + role + "." + part;
}

Matrix column(const std::vector<double>& v) {
  return Eigen::Map<const Matrix>(v.data(), static_cast<Index>(v.size()), 1);
}

}  // namespace

Network::Network(std::shared_ptr<const IcosphereHierarchy> mesh, NetworkConfig cfg)
    : mesh_(std::move(mesh)), cfg_(std::move(cfg)) {
  cfg_.validate();
  require(mesh_ && mesh_->max_level >= cfg_.max_level, ErrorKind::Config,
          "mesh does not reach the network's max_level " + std::to_string(cfg_.max_level));
  levels_.resize(cfg_.max_level + 1);
  for (int l = cfg_.min_level; l <= cfg_.max_level; ++l) {
    auto& ld = levels_[l];
    const auto adj = level_adjacency(*mesh_, l);
    std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
    for (Index r = 0; r < adj.rows; ++r) {
      pairs.emplace_back(static_cast<std::int32_t>(r), static_cast<std::int32_t>(r));
      for (auto c : adj.row(r)) pairs.emplace_back(static_cast<std::int32_t>(r), c);
    }
    auto agg = std::make_shared<CsrPattern>(CsrPattern::from_pairs(adj.rows, adj.cols, std::move(pairs)));
    ld.aggregation = CsrMatrix(agg, 0.0);
    for (Index r = 0; r < agg->rows; ++r)
      for (auto e = agg->row_ptr[r]; e < agg->row_ptr[r + 1]; ++e)
        ld.aggregation.values[e] = 1.0 / static_cast<double>(agg->row_degree(r));

    if (l == cfg_.min_level) continue;
    ld.blocks = split_adjacency(*mesh_, l);
    const auto ops = handcrafted_operators(ld.blocks);
    ld.handcrafted_update = column(ops.update.values);
    ld.handcrafted_predict = column(ops.predict.values);
    const Index ne = ld.blocks.even_count();
    std::vector<std::pair<std::int32_t, std::int32_t>> pool_pairs;
    for (Index r = 0; r < ne; ++r) {
      pool_pairs.emplace_back(static_cast<std::int32_t>(r), static_cast<std::int32_t>(r));
      for (auto c : ld.blocks.M->row(r))
        pool_pairs.emplace_back(static_cast<std::int32_t>(r), static_cast<std::int32_t>(ne + c));
    }
    auto pp = std::make_shared<CsrPattern>(CsrPattern::from_pairs(ne, ld.blocks.node_count(), std::move(pool_pairs)));
    ld.mean_weights.resize(pp->nnz(), 1);
    for (Index r = 0; r < ne; ++r)
      for (auto e = pp->row_ptr[r]; e < pp->row_ptr[r + 1]; ++e)
        ld.mean_weights(e, 0) = 1.0 / static_cast<double>(pp->row_degree(r));
    ld.pool_pattern = std::move(pp);
  }
}

const BlockAdjacency& Network::blocks(int level) const {
  require(level > cfg_.min_level && level <= cfg_.max_level, ErrorKind::Config, "no pooling at level " + std::to_string(level));
  return levels_[level].blocks;
}

const CsrMatrix& Network::aggregation(int level) const {
  require(level >= cfg_.min_level && level <= cfg_.max_level, ErrorKind::Config, "no features at level " + std::to_string(level));
  return levels_[level].aggregation;
}

ParameterSet Network::init_params() const {
  ParameterSet p;
  std::mt19937_64 rng(cfg_.seed);
  auto uniform = [&](Index rows, Index cols, double bound) {
    std::uniform_real_distribution<double> ud(-bound, bound);
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = ud(rng);
    return m;
  };
  auto block = [&](const std::string& name, int fan_in, int fan_out) {
    const double bound = std::sqrt(3.0 / fan_in);
    p.add(name + ".self", uniform(fan_in, fan_out, bound));
    p.add(name + ".nbr", uniform(fan_in, fan_out, bound));
    p.add(name + ".bias", Matrix::Zero(1, fan_out));
  };
  for (int l = cfg_.max_level; l >= cfg_.min_level; --l)
    block(block_name("enc", l), l == cfg_.max_level ? cfg_.in_channels : cfg_.width(l + 1), cfg_.width(l));
  if (cfg_.task == Task::Reconstruction) {
    for (int l = cfg_.min_level + 1; l <= cfg_.max_level; ++l)
      block(block_name("dec", l), l == cfg_.min_level + 1 ? cfg_.width(cfg_.min_level) : cfg_.width(l - 1), cfg_.width(l));
    const int f = cfg_.width(cfg_.max_level);
    p.add("head.W", uniform(f, cfg_.in_channels, std::sqrt(3.0 / f)));
    p.add("head.b", Matrix::Zero(1, cfg_.in_channels));
  } else {
    const int f = cfg_.width(cfg_.min_level);
    p.add("head.W", uniform(f, cfg_.num_classes, std::sqrt(3.0 / f)));
    p.add("head.b", Matrix::Zero(1, cfg_.num_classes));
  }

  // Attention draws from its own stream so that feature weights do not depend
  // on the pooling kind.
  std::mt19937_64 att_rng(cfg_.seed ^ 0x9e3779b97f4a7c15ULL);
  for (int l = cfg_.max_level; l > cfg_.min_level; --l) {
    if (cfg_.pool_kind(l) != PoolKind::LiftAdaptive) continue;
    const int f = cfg_.width(l);
    const double bound = std::sqrt(3.0 / f);
    auto role = [&](const char* r) {
      std::uniform_real_distribution<double> ud(-bound, bound);
      Matrix w0(f, cfg_.attention_hidden);
      for (Index i = 0; i < w0.size(); ++i) w0.data()[i] = ud(att_rng);
      p.add(attention_name(l, r, "W0"), w0);
      p.add(attention_name(l, r, "w1"), Matrix::Zero(cfg_.attention_hidden, 1));
      p.add(attention_name(l, r, "w2"), Matrix::Zero(cfg_.attention_hidden, 1));
    };
    role("update");
    if (!cfg_.share_roles) role("predict");
  }
  return p;
}

ParameterSet Network::identity_params() const {
  auto p = init_params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& name = p.name(i);
    auto& v = p.value(i);
    if (name.ends_with(".self") || name == "head.W")
      v = Matrix::Identity(v.rows(), v.cols());
    else if (name.ends_with(".nbr") || name.ends_with(".bias") || name == "head.b" || name.starts_with("att"))
      v.setZero();
  }
  return p;
}

ad::Var Network::feature_block(ad::Tape& tape, ad::Var x, int level, const std::string& prefix,
                               const BoundParameters& p) const {
  const auto& agg = levels_[level].aggregation;
  const ad::Var weights = tape.constant(column(agg.values));
  const ad::Var self = tape.matmul(x, p(prefix + ".self"));
  const ad::Var nbr = tape.matmul(tape.spmm(agg.pattern, weights, x), p(prefix + ".nbr"));
  const ad::Var y = tape.add_row(tape.add(self, nbr), p(prefix + ".bias"));
  return cfg_.activation == Activation::Relu ? tape.relu(y) : y;
}

PoolRecord Network::pool(ad::Tape& tape, ad::Var x, int level, ad::Var& pooled, const BoundParameters& p) const {
  const auto& ld = levels_[level];
  const Index ne = ld.blocks.even_count();
  const Index no = ld.blocks.odd_count();
  PoolRecord rec;
  rec.level = level;
  rec.kind = cfg_.pool_kind(level);
  switch (rec.kind) {
    case PoolKind::LiftAdaptive:
    case PoolKind::LiftHandcrafted: {
      if (rec.kind == PoolKind::LiftAdaptive) {
        auto role = [&](const char* r) {
          return RecordedAttentionRole{p(attention_name(level, r, "W0")), p(attention_name(level, r, "w1")),
                                       p(attention_name(level, r, "w2"))};
        };
        const auto u = role("update");
        const auto ops = record_operators(tape, x, ld.blocks, u, cfg_.share_roles ? u : role("predict"),
                                          cfg_.negative_slope);
        rec.update = ops.update;
        rec.predict = ops.predict;
      } else {
        rec.update = tape.constant(ld.handcrafted_update);
        rec.predict = tape.constant(ld.handcrafted_predict);
      }
      const ad::Var xe = tape.slice_rows(x, 0, ne);
      const ad::Var xo = tape.slice_rows(x, ne, no);
      const ad::Var c = tape.add(xe, tape.spmm(ld.blocks.M, rec.update, xo));
      rec.detail = tape.sub(xo, tape.spmm(ld.blocks.N, rec.predict, c));
      rec.input_mean = tape.mean_rows(x);
      rec.approx_mean = tape.mean_rows(c);
      pooled = c;
      break;
    }
    case PoolKind::Downsample:
      pooled = tape.slice_rows(x, 0, ne);
      break;
    case PoolKind::Mean:
      pooled = tape.spmm(ld.pool_pattern, tape.constant(ld.mean_weights), x);
      break;
    case PoolKind::Max:
      pooled = tape.segment_max(ld.pool_pattern, x);
      break;
  }
  return rec;
}

ad::Var Network::unpool(ad::Tape& tape, ad::Var c, const PoolRecord& rec) const {
  const auto& ld = levels_[rec.level];
  if (is_lifting(rec.kind)) {
    require(rec.update.valid() && rec.predict.valid(), ErrorKind::Data,
            "missing cached operators for level " + std::to_string(rec.level));
    const ad::Var xo = tape.spmm(ld.blocks.N, rec.predict, c);
    const ad::Var xe = tape.sub(c, tape.spmm(ld.blocks.M, rec.update, xo));
    return tape.concat_rows(xe, xo);
  }
  const Index f = tape.value(c).cols();
  return tape.concat_rows(c, tape.constant(Matrix::Zero(ld.blocks.odd_count(), f)));
}

EncoderTrace Network::encode(ad::Tape& tape, ad::Var x, const BoundParameters& p) const {
  const auto& xv = tape.value(x);
  require(xv.rows() == mesh_->node_count(cfg_.max_level) && xv.cols() == cfg_.in_channels, ErrorKind::Data,
          "input must be " + std::to_string(mesh_->node_count(cfg_.max_level)) + " x " +
              std::to_string(cfg_.in_channels));
  EncoderTrace trace;
  ad::Var h = x;
  for (int l = cfg_.max_level; l > cfg_.min_level; --l) {
    h = feature_block(tape, h, l, block_name("enc", l), p);
    ad::Var pooled;
    trace.pools.push_back(pool(tape, h, l, pooled, p));
    h = pooled;
  }
  trace.code = feature_block(tape, h, cfg_.min_level, block_name("enc", cfg_.min_level), p);
  return trace;
}

ad::Var Network::decode(ad::Tape& tape, ad::Var code, const std::vector<PoolRecord>& cache,
                        const BoundParameters& p) const {
  ad::Var h = code;
  for (int l = cfg_.min_level + 1; l <= cfg_.max_level; ++l) {
    const PoolRecord* rec = nullptr;
    for (const auto& r : cache)
      if (r.level == l) rec = &r;
    require(rec != nullptr, ErrorKind::Data, "operator cache has no entry for level " + std::to_string(l));
    h = unpool(tape, h, *rec);
    h = feature_block(tape, h, l, block_name("dec", l), p);
  }
  return tape.add_row(tape.matmul(h, p("head.W")), p("head.b"));
}

ad::Var Network::classify(ad::Tape& tape, const EncoderTrace& trace, const BoundParameters& p) const {
  const ad::Var pooled = tape.mean_rows(trace.code);
  return tape.add_row(tape.matmul(pooled, p("head.W")), p("head.b"));
}

LossTerms Network::record_loss(ad::Tape& tape, const Matrix& input, const Matrix* target, int label,
                               const BoundParameters& p) const {
  LossTerms t;
  const auto trace = encode(tape, tape.constant(input), p);
  if (cfg_.task == Task::Reconstruction) {
    require(target != nullptr, ErrorKind::Data, "reconstruction needs a target signal");
    t.output = decode(tape, trace.code, trace.pools, p);
    require(tape.value(t.output).rows() == target->rows() && tape.value(t.output).cols() == target->cols(),
            ErrorKind::Data, "target shape does not match network output");
    const ad::Var diff = tape.sub(t.output, tape.constant(*target));
    t.task = tape.scale(tape.sum_squares(diff), 1.0 / static_cast<double>(target->size()));
  } else {
    t.output = classify(tape, trace, p);
    t.task = tape.softmax_cross_entropy(t.output, label);
  }
  ad::Var detail, mean;
  for (const auto& rec : trace.pools) {
    if (!is_lifting(rec.kind)) continue;
    const ad::Var d = tape.norm(rec.detail);
    const ad::Var m = tape.norm(tape.sub(rec.input_mean, rec.approx_mean));
    detail = detail.valid() ? tape.add(detail, d) : d;
    mean = mean.valid() ? tape.add(mean, m) : m;
  }
  t.detail = detail.valid() ? detail : tape.constant(Matrix::Zero(1, 1));
  t.mean = mean.valid() ? mean : tape.constant(Matrix::Zero(1, 1));
  const ad::Var weighted_task = cfg_.task_weight == 1.0 ? t.task : tape.scale(t.task, cfg_.task_weight);
  t.total = tape.add(tape.add(weighted_task, tape.scale(t.detail, cfg_.lambda)), tape.scale(t.mean, cfg_.gamma));
  const double total = tape.value(t.total)(0, 0);
  require(std::isfinite(total), ErrorKind::Data, "non-finite loss");
  return t;
}

EncoderResult encoder_forward(const Network& net, const SphericalSignal& x, const ParameterSet& params) {
  require(x.level == net.config().max_level, ErrorKind::Data, "encoder input must live on max_level");
  ad::Tape tape;
  const BoundParameters p(tape, params, false);
  const auto trace = net.encode(tape, tape.constant(x.values), p);
  EncoderResult out;
  out.code = SphericalSignal{net.config().min_level, tape.value(trace.code)};
  for (const auto& rec : trace.pools) {
    CachedPool cp{rec.level, rec.kind, std::nullopt};
    if (is_lifting(rec.kind)) {
      out.details.push_back(tape.value(rec.detail));
      const auto& blocks = net.blocks(rec.level);
      const auto& u = tape.value(rec.update);
      const auto& pr = tape.value(rec.predict);
      cp.ops = LiftingOperators{rec.level, CsrMatrix(blocks.M, std::vector<double>(u.data(), u.data() + u.size())),
                                CsrMatrix(blocks.N, std::vector<double>(pr.data(), pr.data() + pr.size()))};
    }
    out.op_cache.push_back(std::move(cp));
  }
  return out;
}

SphericalSignal decoder_forward(const Network& net, const SphericalSignal& code, const std::vector<CachedPool>& op_cache,
                                const ParameterSet& params) {
  require(net.config().task == Task::Reconstruction, ErrorKind::Config, "decoder needs a reconstruction network");
  require(code.level == net.config().min_level, ErrorKind::Data, "decoder input must live on min_level");
  ad::Tape tape;
  const BoundParameters p(tape, params, false);
  std::vector<PoolRecord> cache;
  for (const auto& cp : op_cache) {
    PoolRecord rec;
    rec.level = cp.level;
    rec.kind = cp.kind;
    if (is_lifting(cp.kind)) {
      require(cp.ops.has_value(), ErrorKind::Data, "missing cached operators for level " + std::to_string(cp.level));
      rec.update = tape.constant(column(cp.ops->update.values));
      rec.predict = tape.constant(column(cp.ops->predict.values));
    }
    cache.push_back(rec);
  }
  const auto out = net.decode(tape, tape.constant(code.values), cache, p);
  return SphericalSignal{net.config().max_level, tape.value(out)};
}

ClassifyResult classify_forward(const Network& net, const SphericalSignal& x, const ParameterSet& params) {
  require(net.config().task == Task::Classification, ErrorKind::Config, "classify needs a classification network");
  ad::Tape tape;
  const BoundParameters p(tape, params, false);
  const auto trace = net.encode(tape, tape.constant(x.values), p);
  ClassifyResult out;
  out.logits = tape.value(net.classify(tape, trace, p)).row(0).transpose();
  for (const auto& rec : trace.pools)
    if (is_lifting(rec.kind)) out.details.push_back(tape.value(rec.detail));
  return out;
}

double total_loss(Task task, const Matrix& task_out, const TaskTarget& target, const std::vector<Matrix>& details,
                  const std::vector<MeanPair>& means, double lambda, double gamma) {
  double task_loss = 0.0;
  if (task == Task::Reconstruction) {
    require(target.signal && target.signal->rows() == task_out.rows() && target.signal->cols() == task_out.cols(),
            ErrorKind::Data, "reconstruction target shape mismatch");
    task_loss = (task_out - *target.signal).squaredNorm() / static_cast<double>(task_out.size());
  } else {
    require(task_out.rows() == 1 && target.label >= 0 && target.label < task_out.cols(), ErrorKind::Data,
            "classification target mismatch");
    const double mx = task_out.maxCoeff();
    task_loss = mx + std::log((task_out.array() - mx).exp().sum()) - task_out(0, target.label);
  }
  double detail = 0.0;
  for (const auto& d : details) detail += d.norm();
  double mean = 0.0;
  for (const auto& m : means) {
    require(m.input_mean.rows() == 1 && m.input_mean.cols() == m.approx_mean.cols() && m.approx_mean.rows() == 1,
            ErrorKind::Data, "mean pair shape mismatch");
    mean += (m.input_mean - m.approx_mean).norm();
  }
  const double total = task_loss + lambda * detail + gamma * mean;
  require(std::isfinite(total), ErrorKind::Data, "non-finite loss");
  return total;
}

ad::GradientCheckResult loss_gradient_check(const Network& net, const ParameterSet& params, const Matrix& input,
                                            const Matrix* target, int label, double step) {
  std::vector<Matrix> values;
  for (std::size_t i = 0; i < params.size(); ++i) values.push_back(params.value(i));
  return ad::gradient_check(
      values,
      [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
        return net.record_loss(tape, input, target, label, BoundParameters(params, vars)).total;
      },
      step);
}

}  // namespace spherelift
