#pragma once

#include "spherelift/icosphere.hpp"
#include "spherelift/signal.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spherelift {

enum class SyntheticKind { Constant, Bandlimited, Noise };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::Bandlimited;
  int level = 0;
  int channels = 1;
  /// Highest spherical-harmonic degree for the bandlimited kind.
  int band_limit = 0;
  double amplitude = 1.0;
  std::uint64_t seed = 0;

  void validate(const IcosphereHierarchy& h) const;
};

/// Deterministic in (spec, seed). Bandlimited and noise signals are rescaled
/// per channel to [0, amplitude]; constants are `amplitude` everywhere.
SphericalSignal generate(const SyntheticSpec& spec, const IcosphereHierarchy& h);

/// Orthonormal real spherical harmonic Y_lm at a unit vector, without the
/// Condon-Shortley phase (so Y_11 is proportional to x, Y_1,-1 to y).
double real_spherical_harmonic(int degree, int order, const Vec3& p);

/// Row-major image with interleaved channels and values in [0, 1].
struct Image {
  int rows = 0;
  int cols = 0;
  int channels = 1;
  std::vector<double> data;

  double at(int r, int c, int ch) const { return data[(static_cast<std::size_t>(r) * cols + c) * channels + ch]; }
  static Image from_bytes(int rows, int cols, int channels, std::span<const std::uint8_t> bytes);
};

/// Gnomonic projection onto the tangent plane at (0, 0, 1). The image covers
/// the square |x/z| <= 1, |y/z| <= 1 (about a sixth of the sphere); nodes are
/// sampled from their nearest pixel and nodes outside the square get zero.
SphericalSignal project_image(const Image& img, const IcosphereHierarchy& h, int level);

/// True for nodes inside the projection footprint.
bool in_projection_footprint(const Vec3& p);

/// IDX files: big-endian magic 0x00000803 (u8 images, n x rows x cols) or
/// 0x00000801 (u8 labels, n).
struct IdxImages {
  int count = 0;
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> pixels;

  Image image(int i) const;
};

IdxImages load_idx_images(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path);
void write_idx_images(const IdxImages& images, const std::string& path);
void write_idx_labels(const std::vector<int>& labels, const std::string& path);

/// A set of same-level signals with optional class labels.
struct Dataset {
  int level = 0;
  std::vector<Matrix> inputs;
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }
  Index channels() const { return inputs.empty() ? 0 : inputs.front().cols(); }
  bool labelled() const { return !labels.empty(); }
};

// Dataset directory: index.json {"format":"spherelift-dataset","version":1,
// "level":L,"count":N,"files":[...],"labels":[...]} plus one signal file per sample.
void save_dataset(const Dataset& data, const std::string& dir);
Dataset load_dataset(const std::string& dir);

/// `count` bandlimited samples with seeds seed, seed+1, ...
Dataset synthetic_dataset(const SyntheticSpec& spec, int count, const IcosphereHierarchy& h);

}  // namespace spherelift
