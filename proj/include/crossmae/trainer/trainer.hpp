#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crossmae/masking/masking.hpp"
#include "crossmae/model/checkpoint.hpp"
#include "crossmae/model/mae.hpp"

namespace crossmae::trainer {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double base_lr = 1e-4;
  int warmup_epochs = 40;
  double warmup_start_lr = 1e-6;
  double min_lr = 0.0;
  double weight_decay = 0.05;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.95;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> mask_seed;  // mask-stream seed; defaults to seed
  int holdout_location_id = -1;  // -1: train on everything
  int save_every = 0;            // epochs between checkpoints; 0 = end only
  double target_uav_mse = 0.0;   // stop early once epoch-mean masked-UAV MSE
                                 // drops below this; 0 disables

  void validate() const;
};

// Learning-rate schedule: linear warmup from warmup_start_lr to base_lr over
// [0, warmup_epochs], then cosine decay from base_lr to min_lr over
// [warmup_epochs, epochs]. epoch_fraction is continuous in [0, epochs].
double lr_at(double epoch_fraction, const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double loss_total = 0.0;
  double loss_sat = 0.0;
  double loss_uav = 0.0;
  double lr_first_step = 0.0;
  double wall_ms = 0.0;
  int samples = 0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<double> step_lrs;  // lr used at every optimizer step, in order
  std::string config_hash;
  std::vector<std::string> checkpoint_paths;
  bool stopped_early = false;
};

// One training sample: pre-patchified pair plus metadata used for splits.
struct TrainSample {
  model::SamplePatches patches;
  int location_id = 0;
};

struct TrainResult {
  model::Checkpoint checkpoint;
  TrainLog log;
};

// Optional per-epoch observer (progress printing in the CLI).
using EpochCallback = std::function<void(const EpochRecord&)>;

// Runs the optimization loop on the given samples (the caller applies the
// hold-out filter when loading; samples with location_id == holdout are
// rejected here as a guard). Deterministic for a fixed seed: sample order,
// per-sample mask plans and init are all derived from named rng streams.
// On a non-finite loss the last finished epoch's parameters are saved to
// out_dir (when non-empty) and a NumericError is thrown.
TrainResult train(const std::vector<TrainSample>& samples,
                  const model::ModelConfig& model_cfg,
                  const TrainConfig& train_cfg,
                  const masking::MaskingConfig& mask_cfg,
                  const std::string& out_dir = "",
                  const EpochCallback& on_epoch = nullptr);

// True for parameters that receive weight decay (2-D weight matrices only;
// biases, norm affines, mask tokens are excluded).
bool decays(const std::string& param_name);

}  // namespace crossmae::trainer
