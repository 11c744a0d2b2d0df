#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bridgesentry/han.hpp"
#include "bridgesentry/metapath.hpp"

namespace bridgesentry::han {

// Training provenance stored alongside the parameters so a checkpoint can
// reproduce its own experiment.
struct TrainSettings {
  std::uint64_t seed = 42;
  int epochs = 200;
  double learning_rate = 0.01;
  double split_ratio = 0.8;
  double theta = 0.5;
  double weight_decay = 0.0;
  std::string ablation = "none";        // none | no_dme | no_ham
  std::string class_weights = "balanced";  // balanced | uniform
};

struct Checkpoint {
  HyperParams hp;
  std::vector<metapath::MetaPath> selected_paths;
  ModelParams params;
  TrainSettings train;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& json_text);
Checkpoint load_checkpoint(const std::string& path);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

}  // namespace bridgesentry::han
