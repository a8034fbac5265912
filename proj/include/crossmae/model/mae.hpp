#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "crossmae/masking/masking.hpp"
#include "crossmae/model/autodiff.hpp"
#include "crossmae/tokenizer/tokenizer.hpp"

namespace crossmae::model {

using Mat = Eigen::MatrixXd;
using tokenizer::Modality;

// Architecture hyperparameters. Desk-scale defaults; the full-size
// configuration (encoder 768/12/12) is reachable through the same fields.
struct ModelConfig {
  int image_size = 224;
  int patch_size = 16;
  int enc_dim = 128;
  int enc_depth = 4;
  int enc_heads = 4;
  int dec_dim = 256;
  int dec_depth = 2;
  int dec_heads = 4;
  // MLP hidden width is 4x the block width throughout.

  void validate() const;
  tokenizer::PatchGeometry geometry() const {
    return {image_size, patch_size, 3};
  }
  int tokens_per_modality() const { return geometry().tokens(); }
  int patch_dim() const { return geometry().patch_dim(); }

  bool operator==(const ModelConfig&) const = default;
};

// Named parameter tensors. Canonical names (per modality m in {sat, uav},
// block index i):
//   proj.m / proj.m.bias                          patch embedding
//   enc.block{i}.{ln1,ln2}.{gamma,beta}
//   enc.block{i}.attn.{wq,wk,wv,wo,bq,bk,bv,bo}
//   enc.block{i}.mlp.{w1,b1,w2,b2}
//   dec.m.embed.{w,b}                             latent -> decoder width
//   dec.m.mask_token
//   dec.m.block{i}.{lnq,lns,lnm}.{gamma,beta}
//   dec.m.block{i}.{cross,self}.{wq,wk,wv,wo,bq,bk,bv,bo}
//   dec.m.block{i}.mlp.{w1,b1,w2,b2}
//   dec.m.norm.{gamma,beta}
//   dec.m.head.{w,b}                              zero-initialized
struct ParamStore {
  std::map<std::string, Mat> tensors;

  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;
  bool has(const std::string& name) const { return tensors.count(name) > 0; }
  long long total_count() const;
};

using GradMap = std::map<std::string, Mat>;

// Seeded initialization: 0.02-scaled normals for weight matrices and mask
// tokens, zeros for biases, ones/zeros for norm gains/shifts. The output
// heads start at exactly zero, so an untrained model predicts 0 everywhere.
ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed);

// Closed-form parameter count; asserted against init_params in tests.
long long count_params(const ModelConfig& cfg);

// Per-sample loss summary. total is the unweighted mean of the per-modality
// masked MSEs over the modalities that actually have masked tokens.
struct LossReport {
  double total = 0.0;
  double sat = 0.0;
  double uav = 0.0;
  int masked_sat = 0;
  int masked_uav = 0;
};

struct ForwardResult {
  LossReport loss;
  Mat pred_sat;  // P x patch_dim, filled when want_predictions
  Mat pred_uav;
};

struct SamplePatches {
  Mat sat;  // P x patch_dim
  Mat uav;
};

struct ForwardOptions {
  bool want_loss = true;
  bool want_predictions = false;
  GradMap* grads = nullptr;  // accumulate d(total)/d(param) when non-null
};

// Full pipeline for one sample: embed -> gather visible -> encoder ->
// both decoders -> masked-MSE loss. The encoder input is the visible
// satellite tokens followed by the visible UAV tokens.
ForwardResult forward(const SamplePatches& patches, const masking::MaskPlan& plan,
                      const ParamStore& params, const ModelConfig& cfg,
                      const ForwardOptions& opts);

// Lower-level pieces, exposed for targeted tests.
ad::Var encode_tokens(ad::Tape& tape, ad::Var tokens, const ParamStore& params,
                      const ModelConfig& cfg, bool train);
ad::Var decode_modality(ad::Tape& tape, ad::Var latents, const masking::MaskPlan& plan,
                        Modality modality, const ParamStore& params,
                        const ModelConfig& cfg, bool train);

// Combines per-modality masked MSEs exactly as the training loss does.
LossReport combine_losses(double sat_mse, int masked_sat, double uav_mse,
                          int masked_uav);

}  // namespace crossmae::model
