#include "spherelift/signals.hpp"

#include "spherelift/binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

namespace spherelift {

void SyntheticSpec::validate(const IcosphereHierarchy& h) const {
  require(level >= 0 && level <= h.max_level, ErrorKind::Config,
          "synthetic level " + std::to_string(level) + " exceeds mesh max level " + std::to_string(h.max_level));
  require(channels >= 1, ErrorKind::Config, "synthetic channels must be >= 1");
  require(band_limit >= 0 && band_limit <= 64, ErrorKind::Config, "band_limit must be in [0, 64]");
  require(std::isfinite(amplitude), ErrorKind::Config, "amplitude must be finite");
}

double real_spherical_harmonic(int degree, int order, const Vec3& p) {
  require(degree >= 0 && std::abs(order) <= degree, ErrorKind::Config, "invalid spherical harmonic index");
  const double theta = std::acos(std::clamp(p[2], -1.0, 1.0));
  const double phi = std::atan2(p[1], p[0]);
  const unsigned m = static_cast<unsigned>(std::abs(order));
  // std::sph_legendre carries the Condon-Shortley phase; strip it.
  const double y = std::sph_legendre(static_cast<unsigned>(degree), m, theta) * ((m % 2) ? -1.0 : 1.0);
  if (order == 0) return y;
  if (order > 0) return std::sqrt(2.0) * y * std::cos(m * phi);
  return std::sqrt(2.0) * y * std::sin(m * phi);
}

namespace {

void rescale_columns(Matrix& v, double amplitude) {
  for (Index c = 0; c < v.cols(); ++c) {
    const double lo = v.col(c).minCoeff();
    const double hi = v.col(c).maxCoeff();
    if (hi - lo > 1e-12 * std::max(1.0, std::abs(hi)))
      v.col(c) = ((v.col(c).array() - lo) / (hi - lo) * amplitude).matrix();
    else
      v.col(c).setConstant(0.5 * amplitude);
  }
}

}  // namespace

SphericalSignal generate(const SyntheticSpec& spec, const IcosphereHierarchy& h) {
  spec.validate(h);
  const auto& coords = h.coords[spec.level];
  const Index n = static_cast<Index>(coords.size());
  SphericalSignal s{spec.level, Matrix::Zero(n, spec.channels)};
  std::mt19937_64 rng(spec.seed);
  switch (spec.kind) {
    case SyntheticKind::Constant:
      s.values.setConstant(spec.amplitude);
      break;
    case SyntheticKind::Noise: {
      std::uniform_real_distribution<double> ud(0.0, 1.0);
      for (Index i = 0; i < s.values.size(); ++i) s.values.data()[i] = ud(rng);
      rescale_columns(s.values, spec.amplitude);
      break;
    }
    case SyntheticKind::Bandlimited: {
      std::normal_distribution<double> nd;
      const int nharm = (spec.band_limit + 1) * (spec.band_limit + 1);
      Matrix basis(n, nharm);
      for (Index i = 0; i < n; ++i) {
        int k = 0;
        for (int l = 0; l <= spec.band_limit; ++l)
          for (int m = -l; m <= l; ++m) basis(i, k++) = real_spherical_harmonic(l, m, coords[i]);
      }
      Matrix coeffs(nharm, spec.channels);
      for (Index i = 0; i < coeffs.size(); ++i) coeffs.data()[i] = nd(rng);
      s.values = basis * coeffs;
      rescale_columns(s.values, spec.amplitude);
      break;
    }
  }
  return s;
}

Image Image::from_bytes(int rows, int cols, int channels, std::span<const std::uint8_t> bytes) {
  require(rows > 0 && cols > 0 && channels > 0, ErrorKind::Data, "image is empty");
  require(bytes.size() == static_cast<std::size_t>(rows) * cols * channels, ErrorKind::Data,
          "image byte count does not match its shape");
  Image img{rows, cols, channels, std::vector<double>(bytes.size())};
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0;
  return img;
}

bool in_projection_footprint(const Vec3& p) {
  if (p[2] <= 0.0) return false;
  const double u = p[0] / p[2];
  const double v = p[1] / p[2];
  return std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
}

SphericalSignal project_image(const Image& img, const IcosphereHierarchy& h, int level) {
  require(img.rows > 0 && img.cols > 0 && img.channels > 0 &&
              img.data.size() == static_cast<std::size_t>(img.rows) * img.cols * img.channels,
          ErrorKind::Data, "cannot project an empty or malformed image");
  require(level >= 0 && level <= h.max_level, ErrorKind::Config, "projection level exceeds mesh");
  const auto& coords = h.coords[level];
  SphericalSignal s{level, Matrix::Zero(static_cast<Index>(coords.size()), img.channels)};
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const auto& p = coords[i];
    if (!in_projection_footprint(p)) continue;
    const double u = p[0] / p[2];
    const double v = p[1] / p[2];
    const int col = std::clamp(static_cast<int>(std::floor((u + 1.0) / 2.0 * img.cols)), 0, img.cols - 1);
    const int row = std::clamp(static_cast<int>(std::floor((1.0 - v) / 2.0 * img.rows)), 0, img.rows - 1);
    for (int c = 0; c < img.channels; ++c) s.values(static_cast<Index>(i), c) = std::clamp(img.at(row, col, c), 0.0, 1.0);
  }
  return s;
}

namespace {

std::uint32_t read_be32(const std::vector<char>& bytes, std::size_t offset) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 3]));
}

void write_be32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  os.write(b, 4);
}

}  // namespace

Image IdxImages::image(int i) const {
  const std::size_t stride = static_cast<std::size_t>(rows) * cols;
  return Image::from_bytes(rows, cols, 1, std::span<const std::uint8_t>(pixels.data() + stride * i, stride));
}

IdxImages load_idx_images(const std::string& path) {
  const auto bytes = io::read_file(path);
  require(bytes.size() >= 4, ErrorKind::Data, "IDX file " + path + " is truncated");
  require(read_be32(bytes, 0) == 0x00000803, ErrorKind::Data, "IDX file " + path + " has bad magic for images");
  require(bytes.size() >= 16, ErrorKind::Data, "IDX file " + path + " is truncated");
  IdxImages out;
  const auto n = read_be32(bytes, 4), r = read_be32(bytes, 8), c = read_be32(bytes, 12);
  require(r > 0 && c > 0 && r < 65536 && c < 65536 && n < (1u << 28), ErrorKind::Data, "IDX dimensions out of range");
  const std::size_t payload = static_cast<std::size_t>(n) * r * c;
  require(bytes.size() >= 16 + payload, ErrorKind::Data, "IDX file " + path + " is truncated");
  out.count = static_cast<int>(n);
  out.rows = static_cast<int>(r);
  out.cols = static_cast<int>(c);
  out.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(payload));
  return out;
}

std::vector<int> load_idx_labels(const std::string& path) {
  const auto bytes = io::read_file(path);
  require(bytes.size() >= 4, ErrorKind::Data, "IDX file " + path + " is truncated");
  require(read_be32(bytes, 0) == 0x00000801, ErrorKind::Data, "IDX file " + path + " has bad magic for labels");
  require(bytes.size() >= 8, ErrorKind::Data, "IDX file " + path + " is truncated");
  const auto n = read_be32(bytes, 4);
  require(bytes.size() >= 8 + static_cast<std::size_t>(n), ErrorKind::Data, "IDX file " + path + " is truncated");
  std::vector<int> labels(n);
  for (std::uint32_t i = 0; i < n; ++i) labels[i] = static_cast<unsigned char>(bytes[8 + i]);
  return labels;
}

void write_idx_images(const IdxImages& images, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Data, "cannot write " + path);
  write_be32(out, 0x00000803);
  write_be32(out, static_cast<std::uint32_t>(images.count));
  write_be32(out, static_cast<std::uint32_t>(images.rows));
  write_be32(out, static_cast<std::uint32_t>(images.cols));
  out.write(reinterpret_cast<const char*>(images.pixels.data()), static_cast<std::streamsize>(images.pixels.size()));
}

void write_idx_labels(const std::vector<int>& labels, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Data, "cannot write " + path);
  write_be32(out, 0x00000801);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) out.put(static_cast<char>(l));
}

void save_dataset(const Dataset& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json index = {{"format", "spherelift-dataset"}, {"version", 1}, {"level", data.level},
                          {"count", data.size()}};
  index["files"] = nlohmann::json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%06zu.sig", i);
    save_signal(SphericalSignal{data.level, data.inputs[i]}, (std::filesystem::path(dir) / name).string());
    index["files"].push_back(name);
  }
  if (data.labelled()) index["labels"] = data.labels;
  io::write_text((std::filesystem::path(dir) / "index.json").string(), index.dump(2) + "\n");
}

Dataset load_dataset(const std::string& dir) {
  const auto index_path = (std::filesystem::path(dir) / "index.json").string();
  require(std::filesystem::exists(index_path), ErrorKind::Data, "dataset index not found: " + index_path);
  Dataset data;
  try {
    const auto index = nlohmann::json::parse(io::read_text(index_path));
    require(index.at("format") == "spherelift-dataset", ErrorKind::Data, "not a dataset index: " + index_path);
    data.level = index.at("level").get<int>();
    for (const auto& f : index.at("files")) {
      auto s = load_signal((std::filesystem::path(dir) / f.get<std::string>()).string());
      require(s.level == data.level, ErrorKind::Data, "dataset sample level mismatch");
      require(data.inputs.empty() || s.values.cols() == data.inputs.front().cols(), ErrorKind::Data,
              "dataset samples disagree on channel count");
      data.inputs.push_back(std::move(s.values));
    }
    if (index.contains("labels")) data.labels = index.at("labels").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Data, "malformed dataset index " + index_path + ": " + e.what());
  }
  require(!data.labelled() || data.labels.size() == data.inputs.size(), ErrorKind::Data,
          "dataset label count does not match sample count");
  return data;
}

Dataset synthetic_dataset(const SyntheticSpec& spec, int count, const IcosphereHierarchy& h) {
  require(count >= 0, ErrorKind::Config, "sample count must be non-negative");
  Dataset data;
  data.level = spec.level;
  for (int i = 0; i < count; ++i) {
    auto s = spec;
    s.seed = spec.seed + static_cast<std::uint64_t>(i);
    data.inputs.push_back(generate(s, h).values);
  }
  return data;
}

}  // namespace spherelift
