#include "doctest.h"

#include "spherelift/trainer.hpp"

#include <filesystem>
#include <random>

using namespace spherelift;

namespace {

std::shared_ptr<const IcosphereHierarchy> mesh(int level) {
  static std::vector<std::shared_ptr<const IcosphereHierarchy>> cache(kMaxMeshLevel + 1);
  if (!cache[level]) cache[level] = std::make_shared<const IcosphereHierarchy>(build_hierarchy(level));
  return cache[level];
}

NetworkConfig small_config(int max_level, int min_level, std::vector<int> channels, PoolKind kind) {
  NetworkConfig c;
  c.max_level = max_level;
  c.min_level = min_level;
  c.channels = std::move(channels);
  c.pooling = {kind};
  return c;
}

Dataset bandlimited(int level, int count, std::uint64_t seed, int band_limit = 4) {
  return synthetic_dataset({SyntheticKind::Bandlimited, level, 1, band_limit, 1.0, seed}, count, *mesh(level));
}

Dataset constant(int level, double value, int count = 1) {
  return synthetic_dataset({SyntheticKind::Constant, level, 1, 0, value, 0}, count, *mesh(level));
}

std::string temp_dir(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("spherelift_test_trainer_" + name)).string();
}

}  // namespace

TEST_CASE("unregularized fit of a constant image") {
  auto cfg = small_config(2, 1, {4, 4}, PoolKind::LiftAdaptive);
  cfg.lambda = 0.0;
  cfg.gamma = 0.0;
  const Network net(mesh(2), cfg);
  TrainConfig tc;
  tc.epochs = 200;
  tc.batch_size = 1;
  tc.learning_rate = 1e-2;
  const auto res = train(tc, net, constant(2, 0.6));
  CHECK(res.report.epochs.size() == 201);
  CHECK(res.report.best().train.task <= 1e-6);
}

TEST_CASE("the detail regularizer alone lowers detail energy") {
  auto cfg = small_config(2, 1, {4, 4}, PoolKind::LiftAdaptive);
  cfg.lambda = 1.0;
  cfg.gamma = 0.0;
  cfg.task_weight = 0.0;
  const Network net(mesh(2), cfg);
  TrainConfig tc;
  tc.epochs = 100;
  tc.batch_size = 8;
  const auto data = bandlimited(2, 8, 10);
  const auto res = train(tc, net, data);
  const double start = res.report.epochs.front().train.detail;
  // Epoch 0 runs the handcrafted operators.
  auto handcrafted_cfg = cfg;
  handcrafted_cfg.pooling = {PoolKind::LiftHandcrafted};
  const Network handcrafted(mesh(2), handcrafted_cfg);
  CHECK(evaluate(handcrafted, handcrafted.init_params(), data).detail == doctest::Approx(start).epsilon(1e-12));
  CHECK(res.report.epochs.back().train.detail < start);
}

TEST_CASE("the best checkpoint never has more detail than the handcrafted start") {
  auto cfg = small_config(2, 1, {4, 4}, PoolKind::LiftAdaptive);
  cfg.lambda = 0.5;
  const Network net(mesh(2), cfg);
  TrainConfig tc;
  tc.epochs = 15;
  tc.batch_size = 8;
  const auto data = bandlimited(2, 30, 20);
  const auto res = train(tc, net, data);
  CHECK(evaluate(net, res.params, data).detail <= evaluate(net, net.init_params(), data).detail);
}

TEST_CASE("doubling lambda does not raise converged detail energy") {
  const auto data = bandlimited(2, 30, 30);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    double detail[2];
    for (int i = 0; i < 2; ++i) {
      auto cfg = small_config(2, 1, {4, 4}, PoolKind::LiftAdaptive);
      cfg.lambda = i == 0 ? 0.25 : 0.5;
      cfg.seed = seed;
      const Network net(mesh(2), cfg);
      TrainConfig tc;
      tc.epochs = 120;
      tc.batch_size = 8;
      tc.seed = seed;
      detail[i] = train(tc, net, data).report.epochs.back().train.detail;
    }
    INFO("seed " << seed << ": " << detail[1] << " vs " << detail[0]);
    CHECK(detail[1] <= detail[0]);
  }
}

TEST_CASE("training is reproducible and independent of the thread count") {
  const Network net(mesh(2), small_config(2, 1, {3, 4}, PoolKind::LiftAdaptive));
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.seed = 5;
  const auto data = bandlimited(2, 20, 3);
  const auto a = train(tc, net, data);
  const auto b = train(tc, net, data);
  tc.threads = 3;
  const auto c = train(tc, net, data);
  CHECK(metrics_csv(a.report) == metrics_csv(b.report));
  CHECK(metrics_csv(a.report) == metrics_csv(c.report));
  CHECK(a.params == c.params);
  CHECK(metrics_csv(a.report).find("epoch,task,detail,mean,total,") == 0);
}

TEST_CASE("reported totals decompose into their terms") {
  const Network net(mesh(2), small_config(2, 0, {3, 4, 4}, PoolKind::LiftAdaptive));
  TrainConfig tc;
  tc.epochs = 2;
  const auto res = train(tc, net, bandlimited(2, 12, 1));
  const auto& c = net.config();
  for (const auto& e : res.report.epochs) {
    CHECK(std::isfinite(e.train.total));
    CHECK(std::abs(e.train.total - (e.train.task + c.lambda * e.train.detail + c.gamma * e.train.mean)) <= 1e-12);
  }
  for (std::size_t i = 0; i < res.report.epochs.size(); ++i) CHECK(res.report.epochs[i].epoch == static_cast<int>(i));
}

TEST_CASE("a small gradient step matches the first-order prediction") {
  const Network net(mesh(2), small_config(2, 1, {3, 4}, PoolKind::LiftAdaptive));
  auto params = net.init_params();
  const auto data = bandlimited(2, 4, 2);
  const std::vector<std::size_t> batch{0, 1, 2, 3};
  const auto g = batch_gradient(net, params, data, batch);
  const double step = 1e-5;
  double predicted = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    predicted -= step * g.grads[p].squaredNorm();
    params.value(p) -= step * g.grads[p];
  }
  const double actual = batch_gradient(net, params, data, batch).loss - g.loss;
  CHECK(predicted < 0.0);
  CHECK(std::abs(actual - predicted) <= 0.1 * std::abs(predicted));
}

TEST_CASE("evaluation of a perfect reconstruction") {
  auto cfg = small_config(2, 0, {1, 1, 1}, PoolKind::LiftHandcrafted);
  cfg.activation = Activation::Linear;
  const Network net(mesh(2), cfg);
  const auto e = evaluate(net, net.identity_params(), constant(2, 0.4, 3));
  CHECK(e.metric <= 1e-12);
  CHECK(e.count == 3);
}

TEST_CASE("zero prediction on uniform targets has MSE one third") {
  const Network net(mesh(3), small_config(3, 2, {2, 2}, PoolKind::Downsample));
  auto params = net.init_params();
  for (std::size_t i = 0; i < params.size(); ++i) params.value(i).setZero();
  const auto data = synthetic_dataset({SyntheticKind::Noise, 3, 1, 0, 1.0, 17}, 20, *mesh(3));
  CHECK(std::abs(evaluate(net, params, data).metric - 1.0 / 3.0) <= 0.01);
}

TEST_CASE("random classifier is at chance level") {
  auto cfg = small_config(1, 0, {4, 4}, PoolKind::LiftAdaptive);
  cfg.task = Task::Classification;
  cfg.num_classes = 10;
  const Network net(mesh(1), cfg);
  auto data = synthetic_dataset({SyntheticKind::Noise, 1, 1, 0, 1.0, 1}, 2000, *mesh(1));
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> label(0, 9);
  for (std::size_t i = 0; i < data.size(); ++i) data.labels.push_back(label(rng));
  const auto acc = evaluate(net, net.init_params(), data).metric;
  CHECK(std::abs(acc - 0.1) <= 0.03);
  data.labels.pop_back();
  CHECK_THROWS_AS(evaluate(net, net.init_params(), data), Error);
}

TEST_CASE("checkpoints restore identical metrics") {
  const Network net(mesh(2), small_config(2, 1, {3, 4}, PoolKind::LiftAdaptive));
  TrainConfig tc;
  tc.epochs = 2;
  const auto data = bandlimited(2, 10, 4);
  const auto res = train(tc, net, data);
  const auto dir = temp_dir("ckpt");
  std::filesystem::remove_all(dir);
  save_checkpoint({net.config(), res.params, {{"note", "x"}}}, dir);
  const auto back = load_checkpoint(dir);
  CHECK(back.params == res.params);
  CHECK(back.extra.at("note") == "x");
  CHECK(nlohmann::json(back.network) == nlohmann::json(net.config()));
  const Network restored(mesh(2), back.network);
  const auto a = evaluate(net, res.params, data);
  const auto b = evaluate(restored, back.params, data);
  CHECK(a.total == b.total);
  CHECK(a.metric == b.metric);

  const Network other(mesh(2), small_config(2, 1, {3, 5}, PoolKind::LiftAdaptive));
  CHECK_THROWS_AS(evaluate(other, back.params, data), Error);
  std::filesystem::resize_file(std::filesystem::path(dir) / "params.bin", 16);
  CHECK_THROWS_AS(load_checkpoint(dir), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("invalid train configs and data are rejected") {
  const Network net(mesh(2), small_config(2, 1, {3, 4}, PoolKind::LiftAdaptive));
  TrainConfig tc;
  tc.precision = "f32";
  CHECK_THROWS_AS(tc.validate(), Error);
  tc = {};
  tc.learning_rate = 0;
  CHECK_THROWS_AS(tc.validate(), Error);
  tc = {};
  tc.beta1 = 1.0;
  CHECK_THROWS_AS(tc.validate(), Error);
  CHECK_THROWS_AS(train(TrainConfig{}, net, bandlimited(1, 4, 0)), Error);
  CHECK_THROWS_AS(train(TrainConfig{}, net, Dataset{2, {}, {}}), Error);
}

TEST_CASE("divergence names the epoch") {
  const Network net(mesh(2), small_config(2, 1, {3, 4}, PoolKind::Downsample));
  TrainConfig tc;
  tc.epochs = 5;
  tc.learning_rate = 1e300;
  try {
    train(tc, net, bandlimited(2, 4, 0));
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("every pooling kind fits constant data") {
  auto base = small_config(2, 1, {4, 4}, PoolKind::LiftAdaptive);
  base.lambda = 0.0;
  base.gamma = 0.0;
  TrainConfig tc;
  tc.epochs = 150;
  tc.batch_size = 4;
  tc.learning_rate = 1e-2;
  const auto data = constant(2, 0.3, 4);
  const auto rows = compare_poolings(
      base, {PoolKind::LiftAdaptive, PoolKind::LiftHandcrafted, PoolKind::Downsample, PoolKind::Mean, PoolKind::Max},
      {0}, tc, mesh(2), data, data);
  REQUIRE(rows.size() == 5);
  for (const auto& r : rows) CHECK(r.test.metric <= 1e-4);
  const auto csv = comparison_csv(rows, Task::Reconstruction);
  CHECK(csv.find("kind,seed,best_epoch,test_mse") == 0);
  CHECK(median_metric(rows).size() == 5);
}

TEST_CASE("medians per kind") {
  std::vector<ComparisonRow> rows(4);
  rows[0].kind = rows[1].kind = PoolKind::Mean;
  rows[2].kind = rows[3].kind = PoolKind::Max;
  rows[0].test.metric = 1;
  rows[1].test.metric = 3;
  rows[2].test.metric = 5;
  rows[3].test.metric = 5;
  const auto m = median_metric(rows);
  CHECK(m[0].first == PoolKind::Mean);
  CHECK(m[0].second == 2.0);
  CHECK(m[1].second == 5.0);
}
