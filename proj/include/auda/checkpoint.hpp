#pragma once

#include <optional>
#include <string>

#include "auda/model.hpp"

namespace auda {

// Adam moment buffers, keyed like the parameters they track.
struct OptimizerState {
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
  int64_t step = 0;
};

// Binary checkpoint: magic "AUDA", version, architecture descriptor, then
// per-parameter records (path, dtype, shape, raw data), with optional
// optimizer-state / config-text / epoch sections. Round-trips bit-exactly.
struct Checkpoint {
  DetectorParams params;
  std::optional<OptimizerState> optimizer;
  std::optional<std::string> config_text;
  std::optional<int> epoch;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace auda
