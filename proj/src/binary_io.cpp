#include "spherelift/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace spherelift::io {
namespace {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <typename T, typename Raw>
void write_values(std::ostream& os, std::span<const T> values) {
  std::vector<Raw> buf(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    Raw r;
    std::memcpy(&r, &values[i], sizeof(T));
    buf[i] = to_little(r);
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(Raw)));
}

template <typename T, typename Raw>
void read_values(std::istream& is, std::span<T> out, const std::string& what) {
  std::vector<Raw> buf(out.size());
  const auto bytes = static_cast<std::streamsize>(buf.size() * sizeof(Raw));
  is.read(reinterpret_cast<char*>(buf.data()), bytes);
  if (is.gcount() != bytes) fail(ErrorKind::Data, what + ": truncated payload");
  for (std::size_t i = 0; i < out.size(); ++i) {
    Raw r = to_little(buf[i]);
    std::memcpy(&out[i], &r, sizeof(T));
  }
}

}  // namespace

void write_header(std::ostream& os, const char (&magic)[9], const nlohmann::json& header) {
  const std::string text = header.dump();
  os.write(magic, 8);
  const std::uint64_t len = to_little(static_cast<std::uint64_t>(text.size()));
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
}

nlohmann::json read_header(std::istream& is, const char (&magic)[9], const std::string& what) {
  char got[8];
  is.read(got, 8);
  if (is.gcount() != 8) fail(ErrorKind::Data, what + ": truncated header");
  if (std::memcmp(got, magic, 8) != 0) fail(ErrorKind::Data, what + ": bad magic");
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (is.gcount() != sizeof(len)) fail(ErrorKind::Data, what + ": truncated header");
  len = to_little(len);
  if (len > (1u << 26)) fail(ErrorKind::Data, what + ": header too large");
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (static_cast<std::uint64_t>(is.gcount()) != len) fail(ErrorKind::Data, what + ": truncated header");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Data, what + ": malformed header: " + e.what());
  }
}

void write_f64(std::ostream& os, std::span<const double> values) {
  write_values<double, std::uint64_t>(os, values);
}
void write_u32(std::ostream& os, std::span<const std::uint32_t> values) {
  write_values<std::uint32_t, std::uint32_t>(os, values);
}
void read_f64(std::istream& is, std::span<double> out, const std::string& what) {
  read_values<double, std::uint64_t>(is, out, what);
}
void read_u32(std::istream& is, std::span<std::uint32_t> out, const std::string& what) {
  read_values<std::uint32_t, std::uint32_t>(is, out, what);
}

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Data, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Data, "cannot write " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

}  // namespace spherelift::io
