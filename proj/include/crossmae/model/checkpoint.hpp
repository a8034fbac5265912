#pragma once

#include <string>

#include "crossmae/masking/masking.hpp"
#include "crossmae/model/mae.hpp"

namespace crossmae::model {

// Versioned container for learned state: model configuration, masking
// configuration used during pretraining, named parameter tensors (raw
// little-endian float64, bit-exact round trip) and the optimizer rng cursor.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  ModelConfig config;
  masking::MaskingConfig mask_config;
  ParamStore params;
  std::uint64_t seed = 0;
  int trained_epochs = 0;
  std::string tool_version;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace crossmae::model
