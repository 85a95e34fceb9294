#include "spherelift/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <thread>

namespace spherelift {

void TrainConfig::validate() const {
  require(learning_rate > 0 && std::isfinite(learning_rate), ErrorKind::Config, "learning_rate must be > 0");
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, ErrorKind::Config, "betas must lie in [0, 1)");
  require(epsilon > 0, ErrorKind::Config, "epsilon must be > 0");
  require(epochs >= 0, ErrorKind::Config, "epochs must be >= 0");
  require(batch_size >= 1, ErrorKind::Config, "batch_size must be >= 1");
  require(validation_fraction >= 0 && validation_fraction < 1, ErrorKind::Config,
          "validation_fraction must lie in [0, 1)");
  require(precision == "f64", ErrorKind::Config, "precision '" + precision + "' is not supported (only f64)");
  require(threads >= 1 && threads <= 256, ErrorKind::Config, "threads must lie in [1, 256]");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate}, {"beta1", c.beta1},
       {"beta2", c.beta2},                 {"epsilon", c.epsilon},
       {"epochs", c.epochs},               {"batch_size", c.batch_size},
       {"validation_fraction", c.validation_fraction},
       {"seed", c.seed},                   {"precision", c.precision},
       {"threads", c.threads}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.seed = j.value("seed", c.seed);
    c.precision = j.value("precision", c.precision);
    c.threads = j.value("threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed train config: ") + e.what());
  }
}

std::string metric_name(Task task) { return task == Task::Reconstruction ? "mse" : "accuracy"; }

namespace {

// Runs fn(k) for k in [0, n) on up to `threads` workers, each over a contiguous range.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = n * w / workers; k < n * (w + 1) / workers; ++k) fn(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void check_dataset(const Network& net, const Dataset& data) {
  require(data.size() > 0, ErrorKind::Data, "dataset is empty");
  require(data.level == net.config().max_level, ErrorKind::Data,
          "dataset level " + std::to_string(data.level) + " does not match network max_level " +
              std::to_string(net.config().max_level));
  require(data.channels() == net.config().in_channels, ErrorKind::Data,
          "dataset has " + std::to_string(data.channels()) + " channels, network expects " +
              std::to_string(net.config().in_channels));
  require(!data.labelled() || data.labels.size() == data.size(), ErrorKind::Data,
          "dataset label count does not match sample count");
  require(net.config().task != Task::Classification || data.labelled(), ErrorKind::Data,
          "classification needs a labelled dataset");
}

int label_of(const Network& net, const Dataset& data, std::size_t i) {
  if (net.config().task != Task::Classification) return -1;
  const int label = data.labels[i];
  require(label >= 0 && label < net.config().num_classes, ErrorKind::Data,
          "label " + std::to_string(label) + " outside [0, num_classes)");
  return label;
}

struct SampleTerms {
  double task, detail, mean, total;
  bool correct;
};

Evaluation evaluate_subset(const Network& net, const ParameterSet& params, const Dataset& data,
                           const std::vector<std::size_t>& samples, int threads) {
  std::vector<SampleTerms> terms(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t k) {
    const auto i = samples[k];
    const int label = label_of(net, data, i);
    ad::Tape tape;
    const BoundParameters bound(tape, params, false);
    const auto t = net.record_loss(tape, data.inputs[i], &data.inputs[i], label, bound);
    bool correct = false;
    if (label >= 0) {
      const auto& logits = tape.value(t.output);
      Index arg = 0;
      logits.row(0).maxCoeff(&arg);
      correct = arg == label;
    }
    terms[k] = {tape.value(t.task)(0, 0), tape.value(t.detail)(0, 0), tape.value(t.mean)(0, 0),
                tape.value(t.total)(0, 0), correct};
  });
  Evaluation e;
  e.count = samples.size();
  if (samples.empty()) return e;
  double correct = 0.0;
  for (const auto& t : terms) {
    e.task += t.task;
    e.detail += t.detail;
    e.mean += t.mean;
    e.total += t.total;
    correct += t.correct ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(samples.size());
  e.task /= n;
  e.detail /= n;
  e.mean /= n;
  e.total /= n;
  e.metric = net.config().task == Task::Reconstruction ? e.task : correct / n;
  return e;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::json evaluation_json(const Evaluation& e, Task task) {
  return {{"task", e.task},   {"detail", e.detail}, {"mean", e.mean},
          {"total", e.total}, {metric_name(task), e.metric}, {"count", e.count}};
}

}  // namespace

Evaluation evaluate(const Network& net, const ParameterSet& params, const Dataset& data, int threads) {
  check_parameters(net, params);
  check_dataset(net, data);
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return evaluate_subset(net, params, data, all, threads);
}

BatchGradient batch_gradient(const Network& net, const ParameterSet& params, const Dataset& data,
                             const std::vector<std::size_t>& samples, int threads) {
  std::vector<std::vector<Matrix>> per_sample(samples.size());
  std::vector<double> losses(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t k) {
    const auto i = samples[k];
    ad::Tape tape;
    const BoundParameters bound(tape, params, true);
    const auto t = net.record_loss(tape, data.inputs[i], &data.inputs[i], label_of(net, data, i), bound);
    tape.backward(t.total);
    losses[k] = tape.value(t.total)(0, 0);
    for (const auto& v : bound.vars()) per_sample[k].push_back(tape.grad(v));
  });
  BatchGradient out;
  for (std::size_t p = 0; p < params.size(); ++p) out.grads.push_back(Matrix::Zero(params.value(p).rows(), params.value(p).cols()));
  for (std::size_t k = 0; k < samples.size(); ++k) {
    out.loss += losses[k];
    for (std::size_t p = 0; p < params.size(); ++p) out.grads[p] += per_sample[k][p];
  }
  const double scale = samples.empty() ? 0.0 : 1.0 / static_cast<double>(samples.size());
  out.loss *= scale;
  for (auto& g : out.grads) g *= scale;
  return out;
}

TrainResult train(const TrainConfig& cfg, const Network& net, const Dataset& data, const TrainObserver& observer) {
  return train(cfg, net, net.init_params(), data, observer);
}

TrainResult train(const TrainConfig& cfg, const Network& net, ParameterSet params, const Dataset& data,
                  const TrainObserver& observer) {
  cfg.validate();
  check_parameters(net, params);
  check_dataset(net, data);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = data.size() >= 10
                         ? static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(data.size())))
                         : std::size_t{0};
  const std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> fit(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(fit.begin(), fit.end());

  const Task task = net.config().task;
  TrainResult result;
  result.report.task = task;
  auto record_epoch = [&](int epoch, double seconds) {
    EpochMetrics m;
    m.epoch = epoch;
    m.seconds = seconds;
    try {
      m.train = evaluate_subset(net, params, data, fit, cfg.threads);
      m.validation = evaluate_subset(net, params, data, val, cfg.threads);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Data) throw;
      fail(ErrorKind::Data, "training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    result.report.epochs.push_back(m);
    const auto score = [&](const EpochMetrics& em) { return n_val > 0 ? em.validation.task : em.train.task; };
    if (epoch == 0 || score(m) < score(result.report.best())) {
      result.report.best_epoch = epoch;
      result.params = params;
    }
    if (observer) {
      nlohmann::json event = {{"event", "epoch"}, {"epoch", epoch}, {"train", evaluation_json(m.train, task)},
                              {"seconds", seconds}};
      if (n_val > 0) event["validation"] = evaluation_json(m.validation, task);
      observer(event);
    }
  };
  record_epoch(0, 0.0);

  std::vector<Matrix> m1, m2;
  for (std::size_t p = 0; p < params.size(); ++p) {
    m1.push_back(Matrix::Zero(params.value(p).rows(), params.value(p).cols()));
    m2.push_back(m1.back());
  }
  long step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    auto batch_order = fit;
    std::shuffle(batch_order.begin(), batch_order.end(), rng);
    for (std::size_t b = 0; b < batch_order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::vector<std::size_t> batch(
          batch_order.begin() + static_cast<std::ptrdiff_t>(b),
          batch_order.begin() + static_cast<std::ptrdiff_t>(std::min(batch_order.size(), b + static_cast<std::size_t>(cfg.batch_size))));
      BatchGradient g;
      try {
        g = batch_gradient(net, params, data, batch, cfg.threads);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Data) throw;
        fail(ErrorKind::Data, "training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t p = 0; p < params.size(); ++p) {
        m1[p] = cfg.beta1 * m1[p] + (1.0 - cfg.beta1) * g.grads[p];
        m2[p] = cfg.beta2 * m2[p] + (1.0 - cfg.beta2) * g.grads[p].cwiseAbs2();
        params.value(p).array() -=
            cfg.learning_rate * (m1[p].array() / c1) / ((m2[p].array() / c2).sqrt() + cfg.epsilon);
      }
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    record_epoch(epoch, seconds);
  }
  return result;
}

std::string metrics_csv(const MetricsReport& report) {
  const auto metric = metric_name(report.task);
  std::string out = "epoch,task,detail,mean,total,val_task,val_" + metric + "," + metric + "\n";
  for (const auto& e : report.epochs) {
    out += std::to_string(e.epoch) + "," + fmt(e.train.task) + "," + fmt(e.train.detail) + "," + fmt(e.train.mean) +
           "," + fmt(e.train.total) + "," + fmt(e.validation.task) + "," + fmt(e.validation.metric) + "," +
           fmt(e.train.metric) + "\n";
  }
  return out;
}

nlohmann::json metrics_summary(const MetricsReport& report) {
  nlohmann::json epochs = nlohmann::json::array();
  double seconds = 0.0;
  for (const auto& e : report.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"seconds", e.seconds}});
    seconds += e.seconds;
  }
  const auto& best = report.best();
  return {{"task", to_string(report.task)},
          {"metric", metric_name(report.task)},
          {"epochs", static_cast<int>(report.epochs.size()) - 1},
          {"best_epoch", report.best_epoch},
          {"best_train", evaluation_json(best.train, report.task)},
          {"best_validation", evaluation_json(best.validation, report.task)},
          {"final_train", evaluation_json(report.epochs.back().train, report.task)},
          {"epoch_seconds", epochs},
          {"train_seconds", seconds}};
}

std::vector<ComparisonRow> compare_poolings(const NetworkConfig& base, const std::vector<PoolKind>& kinds,
                                            const std::vector<std::uint64_t>& seeds, const TrainConfig& cfg,
                                            std::shared_ptr<const IcosphereHierarchy> mesh, const Dataset& train_data,
                                            const Dataset& test_data, const TrainObserver& observer) {
  require(!kinds.empty() && !seeds.empty(), ErrorKind::Config, "compare needs at least one kind and one seed");
  std::vector<ComparisonRow> rows;
  for (const auto seed : seeds) {
    for (const auto kind : kinds) {
      auto net_cfg = base;
      net_cfg.pooling = {kind};
      net_cfg.seed = seed;
      auto train_cfg = cfg;
      train_cfg.seed = seed;
      const Network net(mesh, net_cfg);
      const auto start = std::chrono::steady_clock::now();
      const auto trained = train(train_cfg, net, train_data, [&](const nlohmann::json& ev) {
        if (!observer) return;
        auto tagged = ev;
        tagged["kind"] = to_string(kind);
        tagged["seed"] = seed;
        observer(tagged);
      });
      ComparisonRow row;
      row.kind = kind;
      row.seed = seed;
      row.best_epoch = trained.report.best_epoch;
      row.test = evaluate(net, trained.params, test_data, cfg.threads);
      row.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (observer)
        observer({{"event", "compare_run"}, {"kind", to_string(kind)}, {"seed", seed},
                  {"test", evaluation_json(row.test, base.task)}, {"seconds", row.train_seconds}});
      rows.push_back(row);
    }
  }
  return rows;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows, Task task) {
  std::string out = "kind,seed,best_epoch,test_" + metric_name(task) + ",test_detail,test_mean,test_total\n";
  for (const auto& r : rows)
    out += to_string(r.kind) + "," + std::to_string(r.seed) + "," + std::to_string(r.best_epoch) + "," +
           fmt(r.test.metric) + "," + fmt(r.test.detail) + "," + fmt(r.test.mean) + "," + fmt(r.test.total) + "\n";
  return out;
}

std::vector<std::pair<PoolKind, double>> median_metric(const std::vector<ComparisonRow>& rows) {
  std::vector<std::pair<PoolKind, double>> out;
  std::vector<PoolKind> kinds;
  for (const auto& r : rows)
    if (std::find(kinds.begin(), kinds.end(), r.kind) == kinds.end()) kinds.push_back(r.kind);
  for (const auto k : kinds) {
    std::vector<double> v;
    for (const auto& r : rows)
      if (r.kind == k) v.push_back(r.test.metric);
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    out.emplace_back(k, n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]));
  }
  return out;
}

}  // namespace spherelift
