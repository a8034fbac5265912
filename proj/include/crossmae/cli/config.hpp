#pragma once

#include <string>

#include <json.hpp>

#include "crossmae/masking/masking.hpp"
#include "crossmae/model/mae.hpp"
#include "crossmae/trainer/trainer.hpp"

namespace crossmae::appcfg {

inline constexpr const char* kToolVersion = "0.1.0";

struct PretrainSettings {
  trainer::TrainConfig train;
  masking::MaskingConfig mask;
  model::ModelConfig model;
};

// Built-in desk-scale defaults. The full-protocol values (100 epochs, batch
// 32, base lr 1e-4, 40-epoch warmup from 1e-6, min lr 0) live on
// trainer::TrainConfig itself.
PretrainSettings default_pretrain_settings();

// Layered resolution: defaults, then the config file, then CLI overrides.
// Accepted keys: top-level TrainConfig fields (epochs, batch_size, base_lr,
// warmup_epochs, warmup_start_lr, min_lr, weight_decay, seed,
// holdout_location_id, save_every, target_uav_mse), a "mask" object
// (alpha_sat, alpha_uav, total_visible, seed) and a "model" object
// (image_size, patch_size, enc_dim, enc_depth, enc_heads, dec_dim, dec_depth,
// dec_heads). Dotted keys ("mask.alpha_sat") are folded into the nested form
// first, so flag-style overrides compose with file configs.
PretrainSettings resolve_pretrain(const nlohmann::json& file_cfg,
                                  const nlohmann::json& cli_overrides);

nlohmann::json load_json_file(const std::string& path);

// Serialized settings for run manifests.
nlohmann::json settings_to_json(const PretrainSettings& s);

// FNV-1a content hash of a file, for artifact hashes in run manifests.
std::string file_hash(const std::string& path);

// Writes <out_dir>/run_manifest.json describing one CLI invocation.
void write_run_manifest(const std::string& out_dir, const std::string& subcommand,
                        const nlohmann::json& resolved_config,
                        const std::vector<std::string>& inputs,
                        const std::vector<std::string>& outputs);

// Exclusive lock on an output directory; throws InputError when another run
// holds it. Released on destruction.
class DirLock {
 public:
  explicit DirLock(const std::string& dir);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string path_;
};

}  // namespace crossmae::appcfg
