#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "crossmae/core/errors.hpp"
#include "crossmae/trainer/trainer.hpp"

using namespace crossmae;

namespace {

model::ModelConfig tiny_model() {
  model::ModelConfig cfg;
  cfg.image_size = 16;
  cfg.patch_size = 4;
  cfg.enc_dim = 8;
  cfg.enc_depth = 1;
  cfg.enc_heads = 1;
  cfg.dec_dim = 8;
  cfg.dec_depth = 1;
  cfg.dec_heads = 1;
  return cfg;
}

masking::MaskingConfig tiny_mask(const model::ModelConfig& m) {
  masking::MaskingConfig cfg;
  cfg.tokens_per_modality = m.tokens_per_modality();
  cfg.total_visible = 6;
  return cfg;
}

std::vector<trainer::TrainSample> tiny_samples(const model::ModelConfig& cfg, int n,
                                               std::uint64_t seed, int location = 0) {
  std::vector<trainer::TrainSample> out;
  rng::Stream rs = rng::derive(seed, "samples");
  for (int k = 0; k < n; ++k) {
    trainer::TrainSample s;
    s.location_id = location;
    const int p = cfg.tokens_per_modality(), d = cfg.patch_dim();
    s.patches.sat.resize(p, d);
    s.patches.uav.resize(p, d);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < d; ++j) {
        s.patches.sat(i, j) = rs.uniform();
        s.patches.uav(i, j) = rs.uniform();
      }
    out.push_back(std::move(s));
  }
  return out;
}

// Low-rank, cross-modally linked content: per-sample level on the satellite
// side, a deterministic transform of it on the UAV side.
std::vector<trainer::TrainSample> smooth_samples(const model::ModelConfig& cfg, int n) {
  std::vector<trainer::TrainSample> out;
  for (int k = 0; k < n; ++k) {
    trainer::TrainSample s;
    const int p = cfg.tokens_per_modality(), d = cfg.patch_dim();
    const double level = 0.2 + 0.6 * k / std::max(1, n - 1);
    s.patches.sat = model::Mat::Constant(p, d, level);
    s.patches.uav = model::Mat::Constant(p, d, 1.0 - level);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("learning-rate schedule endpoints and midpoint") {
  trainer::TrainConfig cfg;  // 100 epochs, warmup 40, 1e-6 -> 1e-4 -> 0
  CHECK(std::abs(trainer::lr_at(0.0, cfg) - 1e-6) < 1e-12);
  CHECK(std::abs(trainer::lr_at(40.0, cfg) - 1e-4) < 1e-12);
  CHECK(std::abs(trainer::lr_at(100.0, cfg) - 0.0) < 1e-12);
  CHECK(std::abs(trainer::lr_at(70.0, cfg) - 5e-5) < 1e-12);
  // Linearity inside the warmup.
  CHECK(trainer::lr_at(20.0, cfg) ==
        doctest::Approx(1e-6 + (1e-4 - 1e-6) * 0.5).epsilon(1e-12));
  CHECK_THROWS_AS(trainer::lr_at(-0.001, cfg), InputError);
  CHECK_THROWS_AS(trainer::lr_at(100.001, cfg), InputError);
}

TEST_CASE("config validation") {
  trainer::TrainConfig cfg;
  cfg.warmup_epochs = 200;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.base_lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("weight decay applies to weight matrices only") {
  CHECK(trainer::decays("proj.sat"));
  CHECK(trainer::decays("enc.block0.attn.wq"));
  CHECK(trainer::decays("dec.uav.head.w"));
  CHECK_FALSE(trainer::decays("proj.sat.bias"));
  CHECK_FALSE(trainer::decays("enc.block0.attn.bq"));
  CHECK_FALSE(trainer::decays("enc.block0.ln1.gamma"));
  CHECK_FALSE(trainer::decays("enc.block0.ln1.beta"));
  CHECK_FALSE(trainer::decays("dec.sat.mask_token"));
  CHECK_FALSE(trainer::decays("dec.sat.embed.b"));
  CHECK_FALSE(trainer::decays("dec.sat.mlp.b1"));
}

TEST_CASE("logged per-step lr equals the schedule at step midpoints") {
  const model::ModelConfig mc = tiny_model();
  trainer::TrainConfig tc;
  tc.epochs = 3;
  tc.warmup_epochs = 2;
  tc.batch_size = 2;
  tc.base_lr = 1e-3;
  tc.seed = 5;
  const auto samples = tiny_samples(mc, 5, 6);  // 3 steps per epoch
  const auto result = trainer::train(samples, mc, tc, tiny_mask(mc));
  const int steps_per_epoch = 3;
  REQUIRE(result.log.step_lrs.size() == 9);
  for (size_t k = 0; k < result.log.step_lrs.size(); ++k) {
    const double expected =
        trainer::lr_at((static_cast<double>(k) + 0.5) / steps_per_epoch, tc);
    CHECK(std::abs(result.log.step_lrs[k] - expected) < 1e-12);
  }
  // Per-epoch record carries the first step's lr.
  CHECK(result.log.epochs[0].lr_first_step == result.log.step_lrs[0]);
}

TEST_CASE("same seed gives an identical loss trajectory") {
  const model::ModelConfig mc = tiny_model();
  trainer::TrainConfig tc;
  tc.epochs = 3;
  tc.warmup_epochs = 1;
  tc.batch_size = 4;
  tc.base_lr = 1e-3;
  tc.seed = 11;
  const auto samples = tiny_samples(mc, 6, 7);
  const auto r1 = trainer::train(samples, mc, tc, tiny_mask(mc));
  const auto r2 = trainer::train(samples, mc, tc, tiny_mask(mc));
  REQUIRE(r1.log.epochs.size() == r2.log.epochs.size());
  for (size_t e = 0; e < r1.log.epochs.size(); ++e) {
    CHECK(r1.log.epochs[e].loss_total == r2.log.epochs[e].loss_total);
    CHECK(r1.log.epochs[e].loss_uav == r2.log.epochs[e].loss_uav);
  }
}

TEST_CASE("training rejects empty and contaminated splits") {
  const model::ModelConfig mc = tiny_model();
  trainer::TrainConfig tc;
  tc.epochs = 1;
  CHECK_THROWS_AS(trainer::train({}, mc, tc, tiny_mask(mc)), ConfigError);

  tc.holdout_location_id = 1;
  const auto samples = tiny_samples(mc, 2, 8, /*location=*/1);
  CHECK_THROWS_AS(trainer::train(samples, mc, tc, tiny_mask(mc)), ConfigError);
}

TEST_CASE("training loss decreases on a small fixed set") {
  const model::ModelConfig mc = tiny_model();
  trainer::TrainConfig tc;
  tc.epochs = 60;
  tc.warmup_epochs = 5;
  tc.batch_size = 4;
  tc.base_lr = 3e-3;
  tc.weight_decay = 0.0;
  tc.seed = 13;
  const auto samples = tiny_samples(mc, 4, 9);
  const auto result = trainer::train(samples, mc, tc, tiny_mask(mc));
  double first = 0.0, last = 0.0;
  for (int e = 0; e < 10; ++e) {
    first += result.log.epochs[static_cast<size_t>(e)].loss_total;
    last += result.log.epochs[result.log.epochs.size() - 1 - static_cast<size_t>(e)].loss_total;
  }
  CHECK(last < first);
}

TEST_CASE("checkpoint round trip reproduces the forward loss bit-exactly") {
  namespace fs = std::filesystem;
  const model::ModelConfig mc = tiny_model();
  trainer::TrainConfig tc;
  tc.epochs = 2;
  tc.warmup_epochs = 1;
  tc.batch_size = 2;
  tc.base_lr = 1e-3;
  tc.seed = 17;
  const auto samples = tiny_samples(mc, 4, 10);
  const auto result = trainer::train(samples, mc, tc, tiny_mask(mc));

  const std::string path =
      (fs::temp_directory_path() / "crossmae_ckpt_roundtrip.ckpt").string();
  model::save_checkpoint(path, result.checkpoint);
  const model::Checkpoint back = model::load_checkpoint(path);
  CHECK(back.config == mc);
  CHECK(back.trained_epochs == 2);

  rng::Stream rs = rng::derive(99, "plan");
  const masking::MaskPlan plan = masking::sample_plan(tiny_mask(mc), rs);
  model::ForwardOptions fo;
  const double before =
      model::forward(samples[0].patches, plan, result.checkpoint.params, mc, fo).loss.total;
  const double after =
      model::forward(samples[0].patches, plan, back.params, mc, fo).loss.total;
  CHECK(before == after);  // bit-identical
  fs::remove(path);
}

TEST_CASE("non-finite loss aborts and saves the last good checkpoint") {
  namespace fs = std::filesystem;
  const model::ModelConfig mc = tiny_model();
  trainer::TrainConfig tc;
  tc.epochs = 50;
  tc.warmup_epochs = 0;
  tc.batch_size = 4;
  tc.base_lr = 1e200;  // overflow the squared-error terms within a step
  tc.weight_decay = 0.0;
  tc.seed = 19;
  const auto samples = tiny_samples(mc, 4, 11);
  const std::string out =
      (fs::temp_directory_path() / "crossmae_nan_guard").string();
  fs::remove_all(out);
  CHECK_THROWS_AS(trainer::train(samples, mc, tc, tiny_mask(mc), out), NumericError);
  CHECK(fs::exists(out + "/last_good.ckpt"));
  fs::remove_all(out);
}

TEST_CASE("early stop on target uav mse") {
  const model::ModelConfig mc = tiny_model();
  trainer::TrainConfig tc;
  tc.epochs = 500;
  tc.warmup_epochs = 2;
  tc.batch_size = 4;
  tc.base_lr = 5e-3;
  tc.weight_decay = 0.0;
  tc.seed = 23;
  tc.target_uav_mse = 0.05;
  const auto samples = smooth_samples(mc, 4);
  const auto result = trainer::train(samples, mc, tc, tiny_mask(mc));
  CHECK(result.log.stopped_early);
  CHECK(result.log.epochs.back().loss_uav < 0.05);
  CHECK(result.checkpoint.trained_epochs ==
        static_cast<int>(result.log.epochs.size()));
}
