#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pmseg/train.hpp"

namespace pmseg {

/// A saved run: the network shape, its class names and the full training
/// state, so training can resume bit-exactly.
struct Checkpoint {
  NetConfig net;
  std::vector<std::string> class_names;
  /// Training source of a specific classifier; empty for a generic one.
  std::string source;
  std::string loss;
  TrainState state;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// checkpoint.json plus params/<name>.f64 and adam/<name>.{m,v}.f64 in the
/// corpus raster format.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Network config and parameters only, fit for inference.
NetConfig net_config_from_json(const std::string& text);
std::string net_config_to_json(const NetConfig& net);

}  // namespace pmseg
