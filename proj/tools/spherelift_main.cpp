// Command-line front end over the C API.

#include "spherelift/spherelift.h"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using nlohmann::json;

namespace {

bool quiet = false;

void log_line(const json& event) {
  if (!quiet) std::cerr << event.dump() << "\n";
}

void log_from_library(const char* line, void*) {
  if (!quiet) std::cerr << line << "\n";
}

struct CliError {
  int code;
  std::string message;
};

const char* kind_name(int code) {
  switch (code) {
    case SL_ERR_USAGE: return "usage";
    case SL_ERR_CONFIG: return "config";
    case SL_ERR_DATA: return "data";
    case SL_ERR_PROPERTY: return "property";
    default: return "internal";
  }
}

void check(sl_status status) {
  if (status != SL_OK) throw CliError{status, sl_last_error()};
}

// Takes ownership of a library string.
std::string take(char* s) {
  std::string out = s ? s : "";
  sl_string_free(s);
  return out;
}

std::string sha256_hex(const std::string& text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw CliError{SL_ERR_INTERNAL, "sha256 failed"};
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// A JSON argument is either inline (starts with '{') or a file path.
json load_json_arg(const std::string& arg, const char* what) {
  std::string text = arg;
  if (arg.find_first_not_of(" \t\n") == std::string::npos || arg[arg.find_first_not_of(" \t\n")] != '{') {
    std::ifstream in(arg);
    if (!in) throw CliError{SL_ERR_DATA, std::string("cannot read ") + what + " file " + arg};
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw CliError{SL_ERR_CONFIG, std::string("malformed ") + what + ": " + e.what()};
  }
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("SPHERELIFT_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != std::strlen(s)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw CliError{SL_ERR_CONFIG, std::string("SPHERELIFT_SEED is not an unsigned integer: ") + s};
  }
}

// Explicit flag first, then the environment, then whatever the config says.
std::optional<std::uint64_t> resolve_seed(const std::optional<std::uint64_t>& flag) { return flag ? flag : env_seed(); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw CliError{SL_ERR_DATA, "cannot write " + path};
  out << text;
}

struct Run {
  std::string command;
  json config = json::object();
  std::optional<std::uint64_t> seed;
  std::string manifest_path;  // empty: log the manifest only
};

struct Mesh {
  sl_mesh* ptr = nullptr;
  ~Mesh() { sl_mesh_free(ptr); }
};

struct Signal {
  sl_signal* ptr = nullptr;
  ~Signal() { sl_signal_free(ptr); }
};

void apply_experiment_overrides(json& cfg, const std::optional<std::uint64_t>& seed, const std::optional<int>& epochs,
                                const std::optional<double>& lr, const std::optional<int>& batch,
                                const std::optional<double>& lambda, const std::optional<double>& gamma,
                                const std::optional<int>& threads, const std::optional<std::string>& precision) {
  if (!cfg.is_object()) throw CliError{SL_ERR_CONFIG, "experiment config must be a JSON object"};
  auto& net = cfg["network"];
  auto& tr = cfg["train"];
  if (net.is_null()) net = json::object();
  if (tr.is_null()) tr = json::object();
  if (seed) {
    net["seed"] = *seed;
    tr["seed"] = *seed;
    if (cfg.contains("synthetic")) cfg["synthetic"]["seed"] = *seed;
  }
  if (epochs) tr["epochs"] = *epochs;
  if (lr) tr["learning_rate"] = *lr;
  if (batch) tr["batch_size"] = *batch;
  if (threads) tr["threads"] = *threads;
  if (precision) tr["precision"] = *precision;
  if (lambda) net["lambda"] = *lambda;
  if (gamma) net["gamma"] = *gamma;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive lifting wavelets on icosphere meshes", "spherelift"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sl_version()));
  app.add_flag("-q,--quiet", quiet, "Only log errors");
  std::optional<int> threads;
  app.add_option("--threads", threads, "Worker thread cap")->check(CLI::Range(1, 256));
  std::string manifest_override;
  app.add_option("--manifest", manifest_override, "Where to write the run manifest");

  Run run;
  std::function<void()> action;

  // mesh
  auto* mesh_cmd = app.add_subcommand("mesh", "Build an icosphere hierarchy");
  int max_level = 0;
  std::string mesh_out;
  mesh_cmd->add_option("--max-level", max_level, "Finest subdivision level")->required();
  mesh_cmd->add_option("--out", mesh_out, "Mesh file")->required();
  mesh_cmd->callback([&] {
    run = {"mesh", {{"max_level", max_level}, {"out", mesh_out}}, std::nullopt, mesh_out + ".manifest.json"};
    action = [&] {
      Mesh m;
      check(sl_mesh_build(max_level, &m.ptr));
      check(sl_mesh_save(m.ptr, mesh_out.c_str()));
      std::cout << json{{"mesh", mesh_out}, {"max_level", max_level},
                        {"nodes", sl_mesh_node_count(m.ptr, max_level)}}.dump() << "\n";
    };
  });

  // gen
  auto* gen_cmd = app.add_subcommand("gen", "Generate synthetic signals");
  std::string gen_spec, gen_mesh, gen_out;
  int gen_count = 1;
  std::optional<std::uint64_t> gen_seed;
  gen_cmd->add_option("--spec", gen_spec, "Synthetic spec (JSON text or file)")->required();
  gen_cmd->add_option("--mesh", gen_mesh, "Mesh file")->required();
  gen_cmd->add_option("--out", gen_out, "Dataset directory")->required();
  gen_cmd->add_option("--count", gen_count, "Number of samples")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen_seed, "Seed of the first sample");
  gen_cmd->callback([&] {
    auto spec = load_json_arg(gen_spec, "synthetic spec");
    const auto seed = resolve_seed(gen_seed);
    if (seed) spec["seed"] = *seed;
    run = {"gen", {{"spec", spec}, {"mesh", gen_mesh}, {"count", gen_count}}, spec.value("seed", std::uint64_t{0}),
           (std::filesystem::path(gen_out) / "manifest.json").string()};
    action = [&, spec] {
      Mesh m;
      check(sl_mesh_load(gen_mesh.c_str(), &m.ptr));
      check(sl_generate_dataset(m.ptr, spec.dump().c_str(), gen_count, gen_out.c_str()));
      std::cout << json{{"dataset", gen_out}, {"count", gen_count}}.dump() << "\n";
    };
  });

  // project
  auto* project_cmd = app.add_subcommand("project", "Project IDX images onto the sphere");
  std::string idx_images, idx_labels, project_out;
  int project_level = 0;
  project_cmd->add_option("--idx", idx_images, "IDX image file")->required();
  project_cmd->add_option("--labels", idx_labels, "IDX label file");
  project_cmd->add_option("--level", project_level, "Mesh level")->required();
  project_cmd->add_option("--out", project_out, "Dataset directory")->required();
  project_cmd->callback([&] {
    run = {"project", {{"idx", idx_images}, {"labels", idx_labels}, {"level", project_level}}, std::nullopt,
           (std::filesystem::path(project_out) / "manifest.json").string()};
    action = [&] {
      char* summary = nullptr;
      check(sl_project_idx(idx_images.c_str(), idx_labels.empty() ? nullptr : idx_labels.c_str(), project_level,
                           project_out.c_str(), &summary));
      std::cout << json::parse(take(summary)).dump() << "\n";
    };
  });

  // transform
  auto* transform_cmd = app.add_subcommand("transform", "Multi-level handcrafted lifting of a signal file");
  std::string tf_mesh, tf_in, tf_out, tf_direction = "forward";
  int tf_levels = 1;
  transform_cmd->add_option("--mesh", tf_mesh, "Mesh file")->required();
  transform_cmd->add_option("--in", tf_in, "Input signal file")->required();
  transform_cmd->add_option("--out", tf_out, "Output signal file")->required();
  transform_cmd->add_option("--direction", tf_direction, "forward or backward")
      ->check(CLI::IsMember({"forward", "backward"}));
  transform_cmd->add_option("--levels", tf_levels, "Number of lifting steps")->check(CLI::PositiveNumber);
  transform_cmd->callback([&] {
    run = {"transform", {{"mesh", tf_mesh}, {"in", tf_in}, {"direction", tf_direction}, {"levels", tf_levels}},
           std::nullopt, tf_out + ".manifest.json"};
    action = [&] {
      Mesh m;
      Signal in, out;
      check(sl_mesh_load(tf_mesh.c_str(), &m.ptr));
      check(sl_signal_load(tf_in.c_str(), &in.ptr));
      check(sl_transform(m.ptr, in.ptr, tf_levels, tf_direction == "backward", &out.ptr));
      check(sl_signal_save(out.ptr, tf_out.c_str()));
      std::cout << json{{"out", tf_out}, {"level", sl_signal_level(out.ptr)}, {"nodes", sl_signal_nodes(out.ptr)},
                        {"channels", sl_signal_channels(out.ptr)}}.dump() << "\n";
    };
  });

  // check
  auto* check_cmd = app.add_subcommand("check", "Run the mesh and lifting property battery");
  std::string ck_mesh;
  std::optional<int> ck_level, ck_trials, ck_impulses;
  std::optional<double> ck_perturb;
  std::optional<std::uint64_t> ck_seed;
  bool ck_no_gradient = false, ck_json = false;
  check_cmd->add_option("--mesh", ck_mesh, "Mesh file")->required();
  check_cmd->add_option("--level", ck_level, "Only this level");
  check_cmd->add_option("--seed", ck_seed, "Seed for random signals and operators");
  check_cmd->add_option("--trials", ck_trials, "Random attention parameterizations per level");
  check_cmd->add_option("--impulses", ck_impulses, "Impulse sources for the locality check");
  check_cmd->add_option("--perturb-row-sum", ck_perturb, "Rescale predict row 0 to this sum");
  check_cmd->add_flag("--no-gradient", ck_no_gradient, "Skip the gradient check");
  check_cmd->add_flag("--json", ck_json, "Print the report as JSON");
  check_cmd->callback([&] {
    json opts = json::object();
    if (ck_level) opts["level"] = *ck_level;
    if (const auto seed = resolve_seed(ck_seed)) opts["seed"] = *seed;
    if (ck_trials) opts["attention_trials"] = *ck_trials;
    if (ck_impulses) opts["impulses"] = *ck_impulses;
    if (ck_perturb) opts["perturb_row_sum"] = *ck_perturb;
    if (ck_no_gradient) opts["gradient"] = false;
    run = {"check", {{"mesh", ck_mesh}, {"options", opts}}, opts.value("seed", std::uint64_t{0}), ""};
    action = [&, opts] {
      Mesh m;
      check(sl_mesh_load(ck_mesh.c_str(), &m.ptr));
      char* report = nullptr;
      const sl_status status = sl_check(m.ptr, opts.dump().c_str(), &report);
      const std::string error = status == SL_OK ? "" : sl_last_error();
      const std::string text = take(report);
      if (!text.empty()) {
        const auto j = json::parse(text);
        if (ck_json) {
          std::cout << j.dump(2) << "\n";
        } else {
          for (const auto& r : j.at("results")) {
            char line[256];
            const int level = r.at("level").get<int>();
            std::snprintf(line, sizeof(line), "%-4s %-24s %-6s", r.at("passed").get<bool>() ? "PASS" : "FAIL",
                          r.at("property").get<std::string>().c_str(),
                          level > 0 ? ("L" + std::to_string(level)).c_str() : "-");
            std::cout << line;
            if (r.contains("value"))
              std::cout << " value " << r.at("value").get<double>() << " bound " << r.at("bound").get<double>();
            if (r.contains("counterexample")) std::cout << "  " << r.at("counterexample").get<std::string>();
            std::cout << "\n";
          }
        }
      }
      if (status != SL_OK) throw CliError{status, error};
    };
  });

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a network");
  std::string tr_task, tr_config, tr_out, tr_data, tr_test;
  std::optional<std::uint64_t> tr_seed;
  std::optional<int> tr_epochs, tr_batch;
  std::optional<double> tr_lr, tr_lambda, tr_gamma;
  std::optional<std::string> tr_precision;
  train_cmd->add_option("--task", tr_task, "recon or cls")->check(CLI::IsMember({"recon", "cls"}));
  train_cmd->add_option("--config", tr_config, "Experiment config (JSON text or file)")->required();
  train_cmd->add_option("--out", tr_out, "Output directory")->required();
  train_cmd->add_option("--data", tr_data, "Training dataset directory");
  train_cmd->add_option("--test-data", tr_test, "Test dataset directory");
  train_cmd->add_option("--seed", tr_seed, "Seed for initialization, shuffling and synthetic data");
  train_cmd->add_option("--epochs", tr_epochs, "Epochs");
  train_cmd->add_option("--batch-size", tr_batch, "Batch size");
  train_cmd->add_option("--lr", tr_lr, "Adam step size");
  train_cmd->add_option("--lambda", tr_lambda, "Detail regularizer weight");
  train_cmd->add_option("--gamma", tr_gamma, "Mean regularizer weight");
  train_cmd->add_option("--precision", tr_precision, "Floating-point precision (f64)");
  train_cmd->callback([&] {
    auto cfg = load_json_arg(tr_config, "experiment config");
    apply_experiment_overrides(cfg, resolve_seed(tr_seed), tr_epochs, tr_lr, tr_batch, tr_lambda, tr_gamma, threads,
                               tr_precision);
    if (!tr_task.empty()) cfg["network"]["task"] = tr_task == "recon" ? "reconstruction" : "classification";
    if (!tr_data.empty()) cfg["data"]["train"] = tr_data;
    if (!tr_test.empty()) cfg["data"]["test"] = tr_test;
    run = {"train", cfg, cfg["train"].value("seed", std::uint64_t{0}),
           (std::filesystem::path(tr_out) / "manifest.json").string()};
    action = [&, cfg] {
      char* summary = nullptr;
      check(sl_train(cfg.dump().c_str(), tr_out.c_str(), &summary));
      std::cout << json::parse(take(summary)).dump() << "\n";
    };
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string ev_ckpt, ev_data;
  eval_cmd->add_option("--ckpt", ev_ckpt, "Checkpoint directory")->required();
  eval_cmd->add_option("--data", ev_data, "Dataset directory")->required();
  eval_cmd->callback([&] {
    run = {"eval", {{"ckpt", ev_ckpt}, {"data", ev_data}}, std::nullopt, ""};
    action = [&] {
      char* summary = nullptr;
      check(sl_evaluate(ev_ckpt.c_str(), ev_data.c_str(), &summary));
      std::cout << json::parse(take(summary)).dump() << "\n";
    };
  });

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "Train one model per pooling kind and compare test metrics");
  std::string cmp_kinds, cmp_config, cmp_out, cmp_seeds;
  std::optional<int> cmp_epochs, cmp_batch;
  std::optional<double> cmp_lr, cmp_lambda, cmp_gamma;
  compare_cmd->add_option("--kinds", cmp_kinds, "Comma-separated pooling kinds");
  compare_cmd->add_option("--config", cmp_config, "Experiment config (JSON text or file)")->required();
  compare_cmd->add_option("--out", cmp_out, "Results CSV")->required();
  compare_cmd->add_option("--seeds", cmp_seeds, "Comma-separated seeds, one run per seed and kind");
  compare_cmd->add_option("--epochs", cmp_epochs, "Epochs");
  compare_cmd->add_option("--batch-size", cmp_batch, "Batch size");
  compare_cmd->add_option("--lr", cmp_lr, "Adam step size");
  compare_cmd->add_option("--lambda", cmp_lambda, "Detail regularizer weight");
  compare_cmd->add_option("--gamma", cmp_gamma, "Mean regularizer weight");
  compare_cmd->callback([&] {
    auto cfg = load_json_arg(cmp_config, "experiment config");
    apply_experiment_overrides(cfg, std::nullopt, cmp_epochs, cmp_lr, cmp_batch, cmp_lambda, cmp_gamma, threads,
                               std::nullopt);
    if (!cmp_seeds.empty()) {
      cfg["seeds"] = json::array();
      std::stringstream ss(cmp_seeds);
      std::string item;
      while (std::getline(ss, item, ','))
        try {
          cfg["seeds"].push_back(std::stoull(item));
        } catch (const std::exception&) {
          throw CliError{SL_ERR_USAGE, "bad seed '" + item + "'"};
        }
    } else if (!cfg.contains("seeds")) {
      if (const auto seed = env_seed()) cfg["seeds"] = {*seed};
    }
    if (!cmp_kinds.empty()) {
      cfg["kinds"] = json::array();
      std::stringstream ss(cmp_kinds);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) cfg["kinds"].push_back(item);
    }
    run = {"compare", cfg, std::nullopt, cmp_out + ".manifest.json"};
    if (cfg.contains("seeds") && !cfg["seeds"].empty()) run.seed = cfg["seeds"][0].get<std::uint64_t>();
    action = [&, cfg] {
      char* summary = nullptr;
      check(sl_compare(cfg.dump().c_str(), nullptr, cmp_out.c_str(), &summary));
      std::cout << json::parse(take(summary)).dump() << "\n";
    };
  });

  sl_set_log(log_from_library, nullptr);
  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = utc_now();
  int code = 0;
  try {
    for (int i = 1; i < argc; ++i) {
      const std::string a = argv[i];
      if (a == "--threads" || a == "--manifest") {
        ++i;
        continue;
      }
      if (a.empty() || a[0] == '-') continue;
      if (app.get_subcommand_no_throw(a) == nullptr) {
        std::cerr << app.help();
        throw CliError{SL_ERR_USAGE, "unknown subcommand '" + a + "'"};
      }
      break;
    }
    try {
      app.parse(argc, argv);
    } catch (const CLI::Success& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      std::cerr << app.help();
      throw CliError{SL_ERR_USAGE, e.what()};
    }
    log_line({{"event", "start"}, {"command", run.command}, {"version", sl_version()}});
    action();
  } catch (const CliError& e) {
    code = e.code;
    std::cerr << json{{"event", "error"}, {"code", e.code}, {"kind", kind_name(e.code)}, {"message", e.message}}.dump()
              << "\n";
  }
  if (run.command.empty()) return code;

  const json manifest = {
      {"command", run.command},
      {"argv", std::vector<std::string>(argv, argv + argc)},
      {"version", sl_version()},
      {"seed", run.seed ? json(*run.seed) : json(nullptr)},
      {"config", run.config},
      {"config_sha256", sha256_hex(run.config.dump())},
      {"started_at", started_at},
      {"finished_at", utc_now()},
      {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()},
      {"exit_code", code}};
  const std::string path = manifest_override.empty() ? run.manifest_path : manifest_override;
  try {
    if (!path.empty() && (code == 0 || !manifest_override.empty())) {
      const auto parent = std::filesystem::path(path).parent_path();
      if (!parent.empty()) std::filesystem::create_directories(parent);
      write_text(path, manifest.dump(2) + "\n");
    }
  } catch (const std::exception& e) {
    std::cerr << json{{"event", "error"}, {"code", SL_ERR_DATA}, {"kind", "data"}, {"message", e.what()}}.dump() << "\n";
    if (code == 0) code = SL_ERR_DATA;
  }
  log_line({{"event", "manifest"}, {"manifest", manifest}});
  return code;
}
