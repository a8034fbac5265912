#include "crossmae/masking/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crossmae/core/errors.hpp"

namespace crossmae::masking {

void MaskingConfig::validate() const {
  if (!(alpha_sat > 0.0) || !(alpha_uav > 0.0))
    throw ConfigError("masking: concentration parameters must be strictly positive");
  if (total_visible < 0) throw ConfigError("masking: total_visible must be >= 0");
  if (tokens_per_modality <= 0)
    throw ConfigError("masking: tokens_per_modality must be positive");
  if (total_visible > 2 * tokens_per_modality)
    throw ConfigError("masking: total_visible exceeds 2 * tokens_per_modality");
}

ModalityProportions sample_proportions(const MaskingConfig& cfg, rng::Stream& rs) {
  cfg.validate();
  const double lambda_sat = rs.beta(cfg.alpha_sat, cfg.alpha_uav);
  return {lambda_sat, 1.0 - lambda_sat};
}

TokenAllocation allocate_tokens(const ModalityProportions& lambda,
                                const MaskingConfig& cfg) {
  const int t = cfg.total_visible;
  const int p = cfg.tokens_per_modality;
  int sat = static_cast<int>(std::floor(lambda.lambda_sat * t));
  // Floor allocation is exact for T <= P; for larger budgets both counts must
  // still fit in a modality, so clamp into [T - P, P].
  sat = std::clamp(sat, std::max(0, t - p), std::min(t, p));
  return {sat, t - sat};
}

MaskPlan select_visible(const TokenAllocation& alloc, const MaskingConfig& cfg,
                        rng::Stream& rs) {
  const int p = cfg.tokens_per_modality;
  if (alloc.sat < 0 || alloc.uav < 0 || alloc.sat > p || alloc.uav > p)
    throw InternalError("select_visible: allocation out of range");

  auto subset = [&](int count) {
    // Partial Fisher-Yates over [0, P); first `count` entries are a uniform
    // without-replacement sample.
    std::vector<int> pool(p);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < count; ++i) {
      const int j = i + static_cast<int>(rs.below(static_cast<std::uint64_t>(p - i)));
      std::swap(pool[i], pool[j]);
    }
    std::vector<int> out(pool.begin(), pool.begin() + count);
    std::sort(out.begin(), out.end());
    return out;
  };

  MaskPlan plan;
  plan.visible_sat = subset(alloc.sat);
  plan.visible_uav = subset(alloc.uav);
  return plan;
}

MaskPlan sample_plan(const MaskingConfig& cfg, rng::Stream& rs) {
  const ModalityProportions lambda = sample_proportions(cfg, rs);
  MaskPlan plan = select_visible(allocate_tokens(lambda, cfg), cfg, rs);
  plan.lambda_draw = lambda;
  return plan;
}

MaskPlan full_sat_plan(int tokens_per_modality) {
  MaskPlan plan;
  plan.visible_sat.resize(tokens_per_modality);
  std::iota(plan.visible_sat.begin(), plan.visible_sat.end(), 0);
  plan.lambda_draw = {1.0, 0.0};
  return plan;
}

MaskPlan full_uav_plan(int tokens_per_modality) {
  MaskPlan plan;
  plan.visible_uav.resize(tokens_per_modality);
  std::iota(plan.visible_uav.begin(), plan.visible_uav.end(), 0);
  plan.lambda_draw = {0.0, 1.0};
  return plan;
}

MaskPlan conditioned_plan(int tokens_per_modality, const std::vector<int>& uav_visible) {
  MaskPlan plan = full_sat_plan(tokens_per_modality);
  plan.visible_uav = uav_visible;
  std::sort(plan.visible_uav.begin(), plan.visible_uav.end());
  plan.visible_uav.erase(
      std::unique(plan.visible_uav.begin(), plan.visible_uav.end()),
      plan.visible_uav.end());
  for (int i : plan.visible_uav)
    if (i < 0 || i >= tokens_per_modality)
      throw InputError("conditioned_plan: uav patch index out of range");
  return plan;
}

std::vector<int> masked_indices(const std::vector<int>& visible, int tokens_per_modality) {
  std::vector<int> out;
  out.reserve(tokens_per_modality - visible.size());
  size_t v = 0;
  for (int i = 0; i < tokens_per_modality; ++i) {
    if (v < visible.size() && visible[v] == i) {
      ++v;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

}  // namespace crossmae::masking
