#pragma once

// Container layout shared by mesh, signal and parameter files:
//
//   bytes 0..7   ASCII magic (8 bytes, format specific)
//   bytes 8..15  u64 little-endian length H of the JSON header
//   next H bytes UTF-8 JSON header
//   remainder    little-endian binary payload described by the header

#include "spherelift/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace spherelift::io {

void write_header(std::ostream& os, const char (&magic)[9], const nlohmann::json& header);
nlohmann::json read_header(std::istream& is, const char (&magic)[9], const std::string& what);

void write_f64(std::ostream& os, std::span<const double> values);
void write_u32(std::ostream& os, std::span<const std::uint32_t> values);
void read_f64(std::istream& is, std::span<double> out, const std::string& what);
void read_u32(std::istream& is, std::span<std::uint32_t> out, const std::string& what);

std::vector<char> read_file(const std::string& path);
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace spherelift::io
