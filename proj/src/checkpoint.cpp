#include "spherelift/checkpoint.hpp"

#include "spherelift/binary_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace spherelift {

void save_checkpoint(const Checkpoint& ckpt, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = ckpt.extra;
  manifest["format"] = "spherelift-checkpoint";
  manifest["version"] = 1;
  manifest["network"] = ckpt.network;
  manifest["tensors"] = nlohmann::json::array();
  const auto bin_path = (std::filesystem::path(dir) / "params.bin").string();
  std::ofstream out(bin_path, std::ios::binary);
  if (!out) fail(ErrorKind::Data, "cannot write " + bin_path);
  Index offset = 0;
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    const auto& v = ckpt.params.value(i);
    manifest["tensors"].push_back({{"name", ckpt.params.name(i)}, {"rows", v.rows()}, {"cols", v.cols()}, {"offset", offset}});
    io::write_f64(out, {v.data(), static_cast<std::size_t>(v.size())});
    offset += v.size();
  }
  if (!out) fail(ErrorKind::Data, "failed writing " + bin_path);
  io::write_text((std::filesystem::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& dir) {
  const auto manifest_path = (std::filesystem::path(dir) / "manifest.json").string();
  const auto bin_path = (std::filesystem::path(dir) / "params.bin").string();
  require(std::filesystem::exists(manifest_path), ErrorKind::Data, "checkpoint manifest not found: " + manifest_path);
  Checkpoint ckpt;
  const auto bytes = io::read_file(bin_path);
  try {
    auto manifest = nlohmann::json::parse(io::read_text(manifest_path));
    require(manifest.at("format") == "spherelift-checkpoint" && manifest.at("version") == 1, ErrorKind::Data,
            "unsupported checkpoint format in " + manifest_path);
    try {
      ckpt.network = manifest.at("network").get<NetworkConfig>();
      ckpt.network.validate();
    } catch (const Error& e) {
      fail(ErrorKind::Data, std::string("checkpoint network config: ") + e.what());
    }
    for (const auto& t : manifest.at("tensors")) {
      const auto rows = t.at("rows").get<Index>();
      const auto cols = t.at("cols").get<Index>();
      const auto offset = t.at("offset").get<Index>();
      require(rows >= 0 && cols >= 0 && offset >= 0 &&
                  static_cast<std::size_t>(offset + rows * cols) * sizeof(double) <= bytes.size(),
              ErrorKind::Data, "checkpoint tensor " + t.at("name").get<std::string>() + " exceeds params.bin");
      Matrix m(rows, cols);
      std::istringstream is(std::string(bytes.data() + offset * sizeof(double), static_cast<std::size_t>(m.size()) * sizeof(double)));
      io::read_f64(is, {m.data(), static_cast<std::size_t>(m.size())}, bin_path);
      ckpt.params.add(t.at("name").get<std::string>(), std::move(m));
    }
    for (const char* key : {"format", "version", "network", "tensors"}) manifest.erase(key);
    ckpt.extra = std::move(manifest);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Data, "malformed checkpoint manifest " + manifest_path + ": " + e.what());
  }
  return ckpt;
}

void check_parameters(const Network& net, const ParameterSet& params) {
  const auto expected = net.init_params();
  require(expected.size() == params.size(), ErrorKind::Data,
          "checkpoint has " + std::to_string(params.size()) + " tensors, network expects " +
              std::to_string(expected.size()));
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& name = expected.name(i);
    require(params.contains(name), ErrorKind::Data, "checkpoint is missing tensor " + name);
    const auto& v = params.at(name);
    require(v.rows() == expected.value(i).rows() && v.cols() == expected.value(i).cols(), ErrorKind::Data,
            "checkpoint tensor " + name + " has the wrong shape");
    require(v.allFinite(), ErrorKind::Data, "checkpoint tensor " + name + " is not finite");
  }
}

}  // namespace spherelift
