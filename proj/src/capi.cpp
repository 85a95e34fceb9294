#include "spherelift/spherelift.h"

#include "spherelift/binary_io.hpp"
#include "spherelift/checkpoint.hpp"
#include "spherelift/lifting.hpp"
#include "spherelift/properties.hpp"
#include "spherelift/signals.hpp"
#include "spherelift/trainer.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstring>
#include <filesystem>
#include <mutex>
#include <new>

#ifndef SPHERELIFT_VERSION
#define SPHERELIFT_VERSION "0.0.0"
#endif

struct sl_mesh {
  std::shared_ptr<const spherelift::IcosphereHierarchy> h;
};

struct sl_signal {
  spherelift::SphericalSignal s;
};

using namespace spherelift;
using nlohmann::json;

namespace {

thread_local std::string last_error;

std::mutex log_mutex;
sl_log_fn log_fn = nullptr;
void* log_user = nullptr;

void emit(const json& event) {
  std::lock_guard<std::mutex> lock(log_mutex);
  if (log_fn) log_fn(event.dump().c_str(), log_user);
}

template <typename Fn>
sl_status guarded(Fn&& fn) {
  try {
    last_error.clear();
    return fn();
  } catch (const Error& e) {
    last_error = e.what();
    return static_cast<sl_status>(e.kind());
  } catch (const json::exception& e) {
    last_error = std::string("malformed JSON: ") + e.what();
    return SL_ERR_CONFIG;
  } catch (const std::filesystem::filesystem_error& e) {
    last_error = e.what();
    return SL_ERR_DATA;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return SL_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return SL_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return SL_ERR_INTERNAL;
  }
}

void require_arg(bool ok, const char* what) {
  if (!ok) fail(ErrorKind::Usage, std::string("missing argument: ") + what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void give(char** out, const json& j) {
  if (out) *out = dup_string(j.dump(2));
}

json parse_json(const char* text, const char* what) {
  require_arg(text != nullptr, what);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed ") + what + ": " + e.what());
  }
}

SyntheticKind parse_kind(const std::string& s) {
  if (s == "constant") return SyntheticKind::Constant;
  if (s == "bandlimited") return SyntheticKind::Bandlimited;
  if (s == "noise") return SyntheticKind::Noise;
  fail(ErrorKind::Config, "unknown synthetic kind '" + s + "'");
}

SyntheticSpec parse_spec(const json& j, int default_level, int default_channels) {
  SyntheticSpec spec;
  try {
    spec.kind = parse_kind(j.value("kind", std::string("bandlimited")));
    spec.level = j.value("level", default_level);
    spec.channels = j.value("channels", default_channels);
    spec.band_limit = j.value("band_limit", 0);
    spec.amplitude = j.value("amplitude", 1.0);
    spec.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed synthetic spec: ") + e.what());
  }
  return spec;
}

std::shared_ptr<const IcosphereHierarchy> mesh_for(const json& cfg, int level) {
  if (cfg.contains("mesh")) {
    auto h = std::make_shared<const IcosphereHierarchy>(load_mesh(cfg.at("mesh").get<std::string>()));
    require(h->max_level >= level, ErrorKind::Config, "mesh max_level is below the network's max_level");
    return h;
  }
  return std::make_shared<const IcosphereHierarchy>(build_hierarchy(level));
}

// Held-out test samples use seeds far from the training ones.
constexpr std::uint64_t kTestSeedOffset = 1000000;

struct Experiment {
  NetworkConfig network;
  TrainConfig train;
  std::shared_ptr<const IcosphereHierarchy> mesh;
  Dataset train_data;
  std::optional<Dataset> test_data;
};

Experiment load_experiment(const json& cfg) {
  Experiment ex;
  require(cfg.is_object(), ErrorKind::Config, "experiment config must be a JSON object");
  if (cfg.contains("network")) ex.network = cfg.at("network").get<NetworkConfig>();
  if (cfg.contains("train")) ex.train = cfg.at("train").get<TrainConfig>();
  ex.network.validate();
  ex.train.validate();
  ex.mesh = mesh_for(cfg, ex.network.max_level);
  if (cfg.contains("data")) {
    const auto& d = cfg.at("data");
    require(d.contains("train"), ErrorKind::Config, "data.train is required");
    ex.train_data = load_dataset(d.at("train").get<std::string>());
    if (d.contains("test")) ex.test_data = load_dataset(d.at("test").get<std::string>());
  } else if (cfg.contains("synthetic")) {
    const auto& s = cfg.at("synthetic");
    auto spec = parse_spec(s, ex.network.max_level, ex.network.in_channels);
    const int train_count = s.value("train_count", 100);
    const int test_count = s.value("test_count", 0);
    require(train_count >= 1 && test_count >= 0, ErrorKind::Config, "synthetic counts must be positive");
    ex.train_data = synthetic_dataset(spec, train_count, *ex.mesh);
    if (test_count > 0) {
      spec.seed += kTestSeedOffset;
      ex.test_data = synthetic_dataset(spec, test_count, *ex.mesh);
    }
  } else {
    fail(ErrorKind::Config, "experiment config needs \"data\" or \"synthetic\"");
  }
  return ex;
}

json evaluation_json(const Evaluation& e, Task task) {
  return {{"task", e.task}, {"detail", e.detail},       {"mean", e.mean},
          {"total", e.total},    {metric_name(task), e.metric}, {"count", e.count}};
}

std::vector<PoolKind> parse_kinds(const std::string& csv) {
  std::vector<PoolKind> kinds;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto end = std::min(csv.find(',', start), csv.size());
    const auto item = csv.substr(start, end - start);
    if (!item.empty()) kinds.push_back(parse_pool_kind(item));
    start = end + 1;
  }
  require(!kinds.empty(), ErrorKind::Config, "no pooling kinds given");
  return kinds;
}

}  // namespace

extern "C" {

const char* sl_version(void) { return SPHERELIFT_VERSION; }
const char* sl_last_error(void) { return last_error.c_str(); }
void sl_string_free(char* s) { std::free(s); }

void sl_set_log(sl_log_fn fn, void* user) {
  std::lock_guard<std::mutex> lock(log_mutex);
  log_fn = fn;
  log_user = user;
}

sl_status sl_mesh_build(int max_level, sl_mesh** out) {
  return guarded([&] {
    require_arg(out != nullptr, "out");
    auto h = std::make_shared<const IcosphereHierarchy>(build_hierarchy(max_level));
    *out = new sl_mesh{std::move(h)};
    return SL_OK;
  });
}

sl_status sl_mesh_load(const char* path, sl_mesh** out) {
  return guarded([&] {
    require_arg(path && out, "path/out");
    *out = new sl_mesh{std::make_shared<const IcosphereHierarchy>(load_mesh(path))};
    return SL_OK;
  });
}

sl_status sl_mesh_save(const sl_mesh* mesh, const char* path) {
  return guarded([&] {
    require_arg(mesh && path, "mesh/path");
    save_mesh(*mesh->h, path);
    return SL_OK;
  });
}

int sl_mesh_max_level(const sl_mesh* mesh) { return mesh ? mesh->h->max_level : -1; }

int64_t sl_mesh_node_count(const sl_mesh* mesh, int level) {
  if (!mesh || level < 0 || level > mesh->h->max_level) return -1;
  return mesh->h->node_count(level);
}

sl_status sl_mesh_validate(const sl_mesh* mesh, char** report_json) {
  return guarded([&] {
    require_arg(mesh != nullptr, "mesh");
    const auto report = validate_hierarchy(*mesh->h);
    json checks = json::array();
    for (const auto& c : report.checks) {
      json j = {{"check", c.name}, {"passed", c.passed}};
      if (!c.passed) j["first_index"] = c.first_index, j["detail"] = c.detail;
      checks.push_back(std::move(j));
    }
    give(report_json, {{"max_level", mesh->h->max_level}, {"passed", report.ok()}, {"checks", checks}});
    for (const auto& c : report.checks)
      if (!c.passed) fail(ErrorKind::Property, "mesh check " + c.name + " failed at index " +
                                                   std::to_string(c.first_index) + ": " + c.detail);
    return SL_OK;
  });
}

void sl_mesh_free(sl_mesh* mesh) { delete mesh; }

sl_status sl_signal_create(int level, int64_t nodes, int64_t channels, const double* values, sl_signal** out) {
  return guarded([&] {
    require_arg(values && out, "values/out");
    require(nodes >= 0 && channels >= 0, ErrorKind::Data, "negative signal shape");
    SphericalSignal s{level, Eigen::Map<const Matrix>(values, nodes, channels)};
    validate_signal(s);
    *out = new sl_signal{std::move(s)};
    return SL_OK;
  });
}

sl_status sl_signal_load(const char* path, sl_signal** out) {
  return guarded([&] {
    require_arg(path && out, "path/out");
    *out = new sl_signal{load_signal(path)};
    return SL_OK;
  });
}

sl_status sl_signal_save(const sl_signal* signal, const char* path) {
  return guarded([&] {
    require_arg(signal && path, "signal/path");
    save_signal(signal->s, path);
    return SL_OK;
  });
}

int sl_signal_level(const sl_signal* signal) { return signal ? signal->s.level : -1; }
int64_t sl_signal_nodes(const sl_signal* signal) { return signal ? signal->s.values.rows() : -1; }
int64_t sl_signal_channels(const sl_signal* signal) { return signal ? signal->s.values.cols() : -1; }
const double* sl_signal_values(const sl_signal* signal) { return signal ? signal->s.values.data() : nullptr; }
void sl_signal_free(sl_signal* signal) { delete signal; }

sl_status sl_generate(const sl_mesh* mesh, const char* spec_json, sl_signal** out) {
  return guarded([&] {
    require_arg(mesh && out, "mesh/out");
    const auto spec = parse_spec(parse_json(spec_json, "synthetic spec"), mesh->h->max_level, 1);
    *out = new sl_signal{generate(spec, *mesh->h)};
    return SL_OK;
  });
}

sl_status sl_generate_dataset(const sl_mesh* mesh, const char* spec_json, int count, const char* out_dir) {
  return guarded([&] {
    require_arg(mesh && out_dir, "mesh/out_dir");
    require(count >= 1, ErrorKind::Config, "count must be >= 1");
    const auto spec = parse_spec(parse_json(spec_json, "synthetic spec"), mesh->h->max_level, 1);
    save_dataset(synthetic_dataset(spec, count, *mesh->h), out_dir);
    return SL_OK;
  });
}

sl_status sl_transform(const sl_mesh* mesh, const sl_signal* in, int levels, int inverse, sl_signal** out) {
  return guarded([&] {
    require_arg(mesh && in && out, "mesh/in/out");
    const int top = in->s.level;
    require(top >= 1 && top <= mesh->h->max_level, ErrorKind::Data, "signal level is not on the mesh");
    require(levels >= 1 && levels <= top, ErrorKind::Config,
            "levels must lie in [1, " + std::to_string(top) + "] for a level-" + std::to_string(top) + " signal");
    validate_signal(in->s);
    Matrix values = in->s.values;
    if (!inverse) {
      for (int l = top; l > top - levels; --l) {
        const Index n = mesh->h->node_count(l);
        const auto ops = handcrafted_operators(split_adjacency(*mesh->h, l));
        const auto sub = lift_forward({l, values.topRows(n)}, ops);
        values.topRows(n) << sub.C, sub.D;
      }
    } else {
      for (int l = top - levels + 1; l <= top; ++l) {
        const Index n = mesh->h->node_count(l);
        const Index ne = mesh->h->node_count(l - 1);
        const auto ops = handcrafted_operators(split_adjacency(*mesh->h, l));
        const auto x = lift_backward({values.topRows(ne), values.middleRows(ne, n - ne)}, ops);
        values.topRows(n) = x.values;
      }
    }
    *out = new sl_signal{{top, std::move(values)}};
    return SL_OK;
  });
}

sl_status sl_project_idx(const char* images_path, const char* labels_path, int level, const char* out_dir,
                         char** summary_json) {
  return guarded([&] {
    require_arg(images_path && out_dir, "images/out_dir");
    const auto images = load_idx_images(images_path);
    Dataset data;
    data.level = level;
    if (labels_path) {
      data.labels = load_idx_labels(labels_path);
      require(static_cast<int>(data.labels.size()) == images.count, ErrorKind::Data,
              "label count does not match image count");
    }
    const auto h = build_hierarchy(level);
    for (int i = 0; i < images.count; ++i) data.inputs.push_back(project_image(images.image(i), h, level).values);
    save_dataset(data, out_dir);
    give(summary_json, {{"count", images.count}, {"level", level}, {"labelled", data.labelled()},
                        {"image_rows", images.rows}, {"image_cols", images.cols}});
    return SL_OK;
  });
}

sl_status sl_check(const sl_mesh* mesh, const char* options_json, char** report_json) {
  return guarded([&] {
    require_arg(mesh != nullptr, "mesh");
    const json o = options_json ? parse_json(options_json, "check options") : json::object();
    PropertyOptions opts;
    if (o.contains("level")) opts.level = o.at("level").get<int>();
    opts.seed = o.value("seed", opts.seed);
    opts.attention_trials = o.value("attention_trials", opts.attention_trials);
    opts.impulses = o.value("impulses", opts.impulses);
    opts.gradient = o.value("gradient", opts.gradient);
    if (o.contains("perturb_row_sum")) opts.perturbed_row_sum = o.at("perturb_row_sum").get<double>();

    const auto mesh_report = validate_hierarchy(*mesh->h);
    json mesh_checks = json::array();
    for (const auto& c : mesh_report.checks) {
      json j = {{"property", "mesh." + c.name}, {"level", -1}, {"passed", c.passed}};
      if (!c.passed) j["counterexample"] = "index " + std::to_string(c.first_index) + ": " + c.detail;
      mesh_checks.push_back(std::move(j));
    }
    // Operator properties only make sense on a sound mesh.
    PropertyReport props;
    if (mesh_report.ok()) props = run_properties(*mesh->h, opts);
    json all = mesh_checks;
    for (auto& r : props.to_json()) all.push_back(r);
    const bool ok = mesh_report.ok() && props.ok();
    give(report_json, {{"passed", ok}, {"results", all}});
    for (const auto& c : mesh_report.checks)
      if (!c.passed) fail(ErrorKind::Property, "mesh." + c.name + " failed at index " + std::to_string(c.first_index));
    if (const auto* f = props.first_failure())
      fail(ErrorKind::Property, f->name + " failed at level " + std::to_string(f->level) + ": " + f->counterexample);
    return SL_OK;
  });
}

sl_status sl_train(const char* config_json, const char* out_dir, char** summary_json) {
  return guarded([&] {
    require_arg(out_dir != nullptr, "out_dir");
    const auto cfg = parse_json(config_json, "experiment config");
    const auto ex = load_experiment(cfg);
    const Network net(ex.mesh, ex.network);
    const auto start = std::chrono::steady_clock::now();
    const auto result = train(ex.train, net, ex.train_data, emit);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    save_checkpoint({ex.network, result.params, {{"train", ex.train}, {"best_epoch", result.report.best_epoch}}},
                    (dir / "checkpoint").string());
    io::write_text((dir / "metrics.csv").string(), metrics_csv(result.report));
    auto summary = metrics_summary(result.report);
    if (ex.test_data) summary["test"] = evaluation_json(evaluate(net, result.params, *ex.test_data, ex.train.threads), ex.network.task);
    summary["wall_seconds"] = seconds;
    io::write_text((dir / "summary.json").string(), summary.dump(2) + "\n");
    give(summary_json, summary);
    return SL_OK;
  });
}

sl_status sl_evaluate(const char* checkpoint_dir, const char* data_dir, char** summary_json) {
  return guarded([&] {
    require_arg(checkpoint_dir && data_dir, "checkpoint/data");
    const auto ckpt = load_checkpoint(checkpoint_dir);
    const auto mesh = std::make_shared<const IcosphereHierarchy>(build_hierarchy(ckpt.network.max_level));
    const Network net(mesh, ckpt.network);
    const auto data = load_dataset(data_dir);
    const int threads = ckpt.extra.contains("train") ? ckpt.extra.at("train").value("threads", 1) : 1;
    give(summary_json, evaluation_json(evaluate(net, ckpt.params, data, threads), ckpt.network.task));
    return SL_OK;
  });
}

sl_status sl_compare(const char* config_json, const char* kinds_csv, const char* out_csv, char** summary_json) {
  return guarded([&] {
    require_arg(out_csv != nullptr, "out_csv");
    const auto cfg = parse_json(config_json, "experiment config");
    const auto ex = load_experiment(cfg);
    require(ex.test_data.has_value(), ErrorKind::Config, "compare needs test data (data.test or synthetic.test_count)");
    std::vector<PoolKind> kinds;
    if (kinds_csv)
      kinds = parse_kinds(kinds_csv);
    else if (cfg.contains("kinds"))
      for (const auto& k : cfg.at("kinds")) kinds.push_back(parse_pool_kind(k.get<std::string>()));
    else
      kinds = {PoolKind::LiftAdaptive, PoolKind::LiftHandcrafted, PoolKind::Downsample, PoolKind::Mean, PoolKind::Max};
    const auto seeds = cfg.value("seeds", std::vector<std::uint64_t>{ex.network.seed});
    const auto start = std::chrono::steady_clock::now();
    const auto rows = compare_poolings(ex.network, kinds, seeds, ex.train, ex.mesh, ex.train_data, *ex.test_data, emit);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    io::write_text(out_csv, comparison_csv(rows, ex.network.task));
    json medians = json::array();
    for (const auto& [kind, m] : median_metric(rows))
      medians.push_back({{"kind", to_string(kind)}, {"median_test_" + metric_name(ex.network.task), m}});
    json summary = {{"runs", rows.size()}, {"seeds", seeds}, {"medians", medians}, {"wall_seconds", seconds}};
    give(summary_json, summary);
    return SL_OK;
  });
}

}  // extern "C"
