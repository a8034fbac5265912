#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crossmae/datagen/datagen.hpp"
#include "crossmae/model/checkpoint.hpp"
#include "crossmae/trainer/trainer.hpp"

namespace crossmae::inference {

enum class GenerationMode { pseudo_uav, pseudo_sat, conditioned };

GenerationMode mode_from_name(const std::string& s);
std::string mode_name(GenerationMode m);

// Channel-wise tint followed by brightness and contrast. Contrast pivots
// about the per-image per-channel mean computed after tint and brightness.
struct TintSpec {
  double scale_r = 1.0, scale_g = 1.0, scale_b = 1.0;
  double brightness = 1.0;
  double contrast = 1.0;

  void validate() const;
  static TintSpec identity() { return {}; }
  static TintSpec morning() { return {1.05, 1.00, 0.95, 0.9, 0.95}; }
  static TintSpec afternoon() { return {1.00, 1.00, 0.98, 1.1, 1.05}; }
  static TintSpec evening() { return {1.10, 0.95, 0.90, 0.7, 0.9}; }
  static std::optional<TintSpec> preset(const std::string& name);  // nullopt: unknown
};

// out = clip(contrast * (b * (img .* scales) - mean) + mean, 0, 1)
img::Image apply_tint(const img::Image& image, const TintSpec& spec);

struct GenerationRequest {
  GenerationMode mode = GenerationMode::pseudo_uav;
  std::vector<int> conditioned_uav_patches;  // required for conditioned mode
  TintSpec tint = TintSpec::identity();      // applied to the UAV input image
};

struct GeneratedSample {
  img::Image predicted;           // 224 x 224 x 3, clipped to [0,1]
  std::optional<double> mse;      // full-image pixel MSE vs the real target
  int record_id = 0;
  int subplot_id = 0;
  int location_id = 0;
  int timepoint_id = 0;
};

// Runs the model with the mode's fixed mask plan. In pseudo_uav mode the UAV
// raster is never tokenized, so UAV pixel content cannot influence the
// output (and symmetrically for pseudo_sat).
GeneratedSample generate_one(const model::Checkpoint& ckpt, const datagen::PlotPair& pair,
                             const GenerationRequest& req);

std::vector<GeneratedSample> generate(const model::Checkpoint& ckpt,
                                      const std::vector<datagen::PlotPair>& pairs,
                                      const GenerationRequest& req);

// Field-level strip: for every (location, timepoint) group, plots laid out on
// the generator grid, three panels side by side (satellite / real UAV /
// predicted UAV). Cells use the middle subplot of each record.
img::Image build_mosaic(const std::vector<datagen::PlotPair>& pairs,
                        const std::vector<GeneratedSample>& preds, int location_id,
                        int timepoint_id, std::optional<std::pair<int, int>> grid,
                        int cell_px = 64);

// --- masking-ratio sweep ------------------------------------------------------

struct SweepPoint {
  double alpha_sat = 1.0;
  double alpha_uav = 1.0;
};

struct SweepRow {
  SweepPoint alphas;
  double expected_uav_token_pct = 0.0;  // 100 * alpha_uav / (alpha_sat + alpha_uav)
  double mean_mse = 0.0;
  std::vector<std::pair<int, double>> per_location_mse;  // sorted by location id
};

struct SweepSpec {
  std::vector<SweepPoint> grid;
  void validate() const;
};

// One pretraining run per alpha pair (cached by config hash under cache_dir
// when non-empty), then pseudo-UAV reconstruction MSE per location over the
// evaluation pairs.
std::vector<SweepRow> run_sweep(const SweepSpec& spec,
                                const std::vector<trainer::TrainSample>& train_samples,
                                const std::vector<datagen::PlotPair>& eval_pairs,
                                const model::ModelConfig& model_cfg,
                                const trainer::TrainConfig& train_cfg,
                                const masking::MaskingConfig& base_mask_cfg,
                                const std::string& cache_dir = "");

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

// Renders a mask plan as a patch grid: two panels (satellite, UAV); visible
// patches keep image content, masked patches are grayed.
img::Image render_mask_plan(const masking::MaskPlan& plan, const img::Image& sat,
                            const img::Image& uav, int patch_size);

}  // namespace crossmae::inference
