#include "spherelift/signal.hpp"

#include "spherelift/binary_io.hpp"
#include "spherelift/icosphere.hpp"

#include <fstream>

namespace spherelift {

void validate_signal(const SphericalSignal& s) {
  require(s.level >= 0 && s.level <= kMaxMeshLevel, ErrorKind::Data, "signal level out of range");
  require(s.values.rows() == icosphere_node_count(s.level), ErrorKind::Data,
          "signal has " + std::to_string(s.values.rows()) + " rows but level " + std::to_string(s.level) +
              " has " + std::to_string(icosphere_node_count(s.level)) + " nodes");
  require(s.values.allFinite(), ErrorKind::Data, "signal contains non-finite values");
}

namespace {
constexpr char kSignalMagic[9] = "SPLSIG01";
}

void save_signal(const SphericalSignal& s, const std::string& path) {
  nlohmann::json header = {{"format", "spherelift-signal"}, {"version", 1}, {"level", s.level},
                           {"rows", s.values.rows()},       {"channels", s.values.cols()}};
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Data, "cannot write signal file " + path);
  io::write_header(out, kSignalMagic, header);
  io::write_f64(out, {s.values.data(), static_cast<std::size_t>(s.values.size())});
  if (!out) fail(ErrorKind::Data, "failed writing signal file " + path);
}

SphericalSignal load_signal(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Data, "cannot open signal file " + path);
  const auto header = io::read_header(in, kSignalMagic, "signal file " + path);
  SphericalSignal s;
  try {
    require(header.at("format") == "spherelift-signal" && header.at("version") == 1, ErrorKind::Data,
            "unsupported signal format in " + path);
    s.level = header.at("level").get<int>();
    const auto rows = header.at("rows").get<Index>();
    const auto cols = header.at("channels").get<Index>();
    require(rows >= 0 && cols >= 0 && rows <= icosphere_node_count(kMaxMeshLevel) && cols <= (1 << 16),
            ErrorKind::Data, "signal dimensions out of range in " + path);
    s.values.resize(rows, cols);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Data, "malformed signal header in " + path + ": " + e.what());
  }
  io::read_f64(in, {s.values.data(), static_cast<std::size_t>(s.values.size())}, "signal file " + path);
  validate_signal(s);
  return s;
}

}  // namespace spherelift
