#pragma once

#include "spherelift/types.hpp"

#include <string>

namespace spherelift {

/// Values on the nodes of one icosphere level (rows = nodes, cols = channels).
struct SphericalSignal {
  int level = 0;
  Matrix values;

  Index nodes() const { return values.rows(); }
  Index channels() const { return values.cols(); }
};

/// Approximation (even-sized, low-frequency) and detail (odd-sized, high-frequency)
/// coefficients of one lifting step.
struct SubbandPair {
  Matrix C;
  Matrix D;
};

/// Throws if the row count does not match the level or any entry is not finite.
void validate_signal(const SphericalSignal& s);

// Signal container: magic "SPLSIG01", JSON header
// {"format":"spherelift-signal","version":1,"level":L,"rows":R,"channels":F},
// then R*F little-endian float64 values, row-major.
void save_signal(const SphericalSignal& s, const std::string& path);
SphericalSignal load_signal(const std::string& path);

}  // namespace spherelift
