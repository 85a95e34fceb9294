#pragma once

#include "spherelift/model.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace spherelift {

/// A trained network: its config and parameters. `extra` carries free-form
/// run information (training config, metrics) written into the manifest.
struct Checkpoint {
  NetworkConfig network;
  ParameterSet params;
  nlohmann::json extra = nlohmann::json::object();
};

// Checkpoint directory: manifest.json {"format":"spherelift-checkpoint",
// "version":1,"network":{...},"tensors":[{"name","rows","cols","offset"}],...}
// plus params.bin holding every tensor as row-major little-endian f64, with
// offsets counted in scalars.
void save_checkpoint(const Checkpoint& ckpt, const std::string& dir);
Checkpoint load_checkpoint(const std::string& dir);

/// Throws Data unless `params` has exactly the tensors `net` expects.
void check_parameters(const Network& net, const ParameterSet& params);

}  // namespace spherelift
