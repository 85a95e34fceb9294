#include "doctest.h"

#include "spherelift/spherelift.h"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("spherelift_test_capi_" + name)).string();
}

nlohmann::json take_json(char* s) {
  REQUIRE(s != nullptr);
  auto j = nlohmann::json::parse(s);
  sl_string_free(s);
  return j;
}

}  // namespace

TEST_CASE("mesh handles") {
  sl_mesh* mesh = nullptr;
  REQUIRE(sl_mesh_build(2, &mesh) == SL_OK);
  CHECK(sl_mesh_max_level(mesh) == 2);
  CHECK(sl_mesh_node_count(mesh, 2) == 162);
  CHECK(sl_mesh_node_count(mesh, 3) == -1);
  char* report = nullptr;
  CHECK(sl_mesh_validate(mesh, &report) == SL_OK);
  CHECK(take_json(report).at("passed") == true);

  const auto path = temp_path("mesh.bin");
  REQUIRE(sl_mesh_save(mesh, path.c_str()) == SL_OK);
  sl_mesh* loaded = nullptr;
  REQUIRE(sl_mesh_load(path.c_str(), &loaded) == SL_OK);
  CHECK(sl_mesh_node_count(loaded, 2) == 162);
  sl_mesh_free(loaded);
  sl_mesh_free(mesh);
  std::filesystem::remove(path);
}

TEST_CASE("status codes and error messages") {
  sl_mesh* mesh = nullptr;
  CHECK(sl_mesh_build(9, &mesh) == SL_ERR_CONFIG);
  CHECK(mesh == nullptr);
  CHECK(std::strstr(sl_last_error(), "max_level") != nullptr);
  CHECK(sl_mesh_load("/nonexistent/mesh.bin", &mesh) == SL_ERR_DATA);
  CHECK(sl_mesh_build(1, nullptr) == SL_ERR_USAGE);
  CHECK(sl_train("{not json", "/tmp/x", nullptr) == SL_ERR_CONFIG);
  REQUIRE(sl_mesh_build(1, &mesh) == SL_OK);
  CHECK(std::string(sl_last_error()).empty());
  sl_mesh_free(mesh);
  CHECK(std::string(sl_version()).size() > 0);
}

TEST_CASE("signals and the multi-level transform") {
  sl_mesh* mesh = nullptr;
  REQUIRE(sl_mesh_build(3, &mesh) == SL_OK);
  sl_signal* x = nullptr;
  REQUIRE(sl_generate(mesh, R"({"kind":"bandlimited","level":3,"channels":2,"band_limit":5,"seed":3})", &x) == SL_OK);
  CHECK(sl_signal_level(x) == 3);
  CHECK(sl_signal_nodes(x) == 642);
  CHECK(sl_signal_channels(x) == 2);

  sl_signal* fwd = nullptr;
  sl_signal* back = nullptr;
  REQUIRE(sl_transform(mesh, x, 3, 0, &fwd) == SL_OK);
  REQUIRE(sl_transform(mesh, fwd, 3, 1, &back) == SL_OK);
  double err = 0.0;
  for (int i = 0; i < 642 * 2; ++i) err = std::max(err, std::abs(sl_signal_values(back)[i] - sl_signal_values(x)[i]));
  CHECK(err <= 1e-10);
  CHECK(sl_transform(mesh, x, 4, 0, &fwd) == SL_ERR_CONFIG);

  // A constant signal keeps all its energy in the 12 coarsest coefficients.
  const std::vector<double> ones(642, 1.0);
  sl_signal* c = nullptr;
  sl_signal* cf = nullptr;
  REQUIRE(sl_signal_create(3, 642, 1, ones.data(), &c) == SL_OK);
  REQUIRE(sl_transform(mesh, c, 3, 0, &cf) == SL_OK);
  for (int i = 0; i < 12; ++i) CHECK(sl_signal_values(cf)[i] == doctest::Approx(8.0));
  for (int i = 12; i < 642; ++i) CHECK(std::abs(sl_signal_values(cf)[i]) <= 1e-12);

  const auto path = temp_path("sig.bin");
  REQUIRE(sl_signal_save(x, path.c_str()) == SL_OK);
  sl_signal* loaded = nullptr;
  REQUIRE(sl_signal_load(path.c_str(), &loaded) == SL_OK);
  CHECK(std::memcmp(sl_signal_values(loaded), sl_signal_values(x), 642 * 2 * sizeof(double)) == 0);

  CHECK(sl_signal_create(3, 10, 1, ones.data(), &loaded) == SL_ERR_DATA);
  for (auto* s : {x, fwd, back, c, cf, loaded}) sl_signal_free(s);
  sl_mesh_free(mesh);
  std::filesystem::remove(path);
}

TEST_CASE("check reports property failures") {
  sl_mesh* mesh = nullptr;
  REQUIRE(sl_mesh_build(2, &mesh) == SL_OK);
  char* report = nullptr;
  CHECK(sl_check(mesh, R"({"attention_trials":2})", &report) == SL_OK);
  CHECK(take_json(report).at("passed") == true);
  CHECK(sl_check(mesh, R"({"level":2,"perturb_row_sum":1.1,"gradient":false})", &report) == SL_ERR_PROPERTY);
  const auto j = take_json(report);
  CHECK(j.at("passed") == false);
  CHECK(std::string(sl_last_error()).find("row_sums") != std::string::npos);
  sl_mesh_free(mesh);
}

TEST_CASE("train, evaluate and compare through the C API") {
  const auto dir = temp_path("train");
  const auto csv = temp_path("compare.csv");
  std::filesystem::remove_all(dir);
  const std::string cfg = R"({
    "network": {"max_level": 2, "min_level": 1, "channels": [3, 4]},
    "train": {"epochs": 2, "batch_size": 4},
    "synthetic": {"band_limit": 3, "train_count": 12, "test_count": 5, "seed": 2}})";
  char* summary = nullptr;
  REQUIRE(sl_train(cfg.c_str(), dir.c_str(), &summary) == SL_OK);
  const auto s = take_json(summary);
  CHECK(s.at("epochs") == 2);
  CHECK(s.at("test").at("count") == 5);
  CHECK(std::filesystem::exists(std::filesystem::path(dir) / "metrics.csv"));

  sl_mesh* mesh = nullptr;
  REQUIRE(sl_mesh_build(2, &mesh) == SL_OK);
  const auto data = temp_path("data");
  REQUIRE(sl_generate_dataset(mesh, R"({"kind":"bandlimited","level":2,"band_limit":3,"seed":7})", 4, data.c_str()) ==
          SL_OK);
  REQUIRE(sl_evaluate((std::filesystem::path(dir) / "checkpoint").c_str(), data.c_str(), &summary) == SL_OK);
  CHECK(take_json(summary).at("count") == 4);
  CHECK(sl_evaluate(dir.c_str(), data.c_str(), &summary) == SL_ERR_DATA);

  REQUIRE(sl_compare(cfg.c_str(), "downsample,lift_handcrafted", csv.c_str(), &summary) == SL_OK);
  CHECK(take_json(summary).at("medians").size() == 2);
  CHECK(sl_compare(cfg.c_str(), "avg", csv.c_str(), &summary) == SL_ERR_CONFIG);
  sl_mesh_free(mesh);
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(data);
  std::filesystem::remove(csv);
}

namespace {
std::vector<std::string> log_lines;
void collect(const char* line, void*) { log_lines.emplace_back(line); }
}  // namespace

TEST_CASE("training progress reaches the log callback") {
  sl_set_log(collect, nullptr);
  const auto dir = temp_path("log");
  REQUIRE(sl_train(R"({"network":{"max_level":1,"min_level":0,"channels":[2,2]},"train":{"epochs":1},
                       "synthetic":{"train_count":3}})",
                   dir.c_str(), nullptr) == SL_OK);
  sl_set_log(nullptr, nullptr);
  REQUIRE(log_lines.size() == 2);
  CHECK(nlohmann::json::parse(log_lines[1]).at("epoch") == 1);
  std::filesystem::remove_all(dir);
}
