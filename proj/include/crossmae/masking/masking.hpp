#pragma once

#include <vector>

#include "crossmae/core/rng.hpp"

namespace crossmae::masking {

// Controls how the fixed visible-token budget is split across the two
// modalities. The concentration pair (alpha_sat, alpha_uav) biases the split:
// alpha_sat > alpha_uav keeps more satellite tokens visible, so the model is
// pushed to reconstruct UAV content from satellite context.
struct MaskingConfig {
  double alpha_sat = 0.9;
  double alpha_uav = 0.1;
  int total_visible = 66;       // T
  int tokens_per_modality = 196;  // P (14x14 patches on 224x224 at patch 16)

  void validate() const;
};

struct ModalityProportions {
  double lambda_sat = 0.0;
  double lambda_uav = 0.0;
};

struct MaskPlan {
  std::vector<int> visible_sat;  // sorted, unique, subset of [0, P)
  std::vector<int> visible_uav;
  ModalityProportions lambda_draw;

  int total_visible() const {
    return static_cast<int>(visible_sat.size() + visible_uav.size());
  }
};

struct TokenAllocation {
  int sat = 0;
  int uav = 0;
};

// lambda ~ Dir(alpha_sat, alpha_uav), realized as a Beta draw on lambda_sat
// (exact for two modalities).
ModalityProportions sample_proportions(const MaskingConfig& cfg, rng::Stream& rs);

// T_sat = floor(lambda_sat * T), T_uav = T - T_sat. For T > P the floor
// result is clamped into [T - P, P] so both counts stay within a modality's
// token budget while preserving the total.
TokenAllocation allocate_tokens(const ModalityProportions& lambda,
                                const MaskingConfig& cfg);

// Uniform-without-replacement T_m-subsets of [0, P), independently per
// modality; returned index lists are sorted ascending.
MaskPlan select_visible(const TokenAllocation& alloc, const MaskingConfig& cfg,
                        rng::Stream& rs);

// One-shot convenience: proportions -> allocation -> plan.
MaskPlan sample_plan(const MaskingConfig& cfg, rng::Stream& rs);

// Fixed plans used at inference time.
MaskPlan full_sat_plan(int tokens_per_modality);             // all sat, no uav
MaskPlan full_uav_plan(int tokens_per_modality);             // mirror
MaskPlan conditioned_plan(int tokens_per_modality,
                          const std::vector<int>& uav_visible);  // all sat + k uav

// Sorted complement of `visible` within [0, P).
std::vector<int> masked_indices(const std::vector<int>& visible, int tokens_per_modality);

}  // namespace crossmae::masking
