#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "crossmae/core/csv.hpp"
#include "crossmae/core/errors.hpp"
#include "crossmae/inference/inference.hpp"

using namespace crossmae;
namespace fs = std::filesystem;

namespace {

model::ModelConfig small_model() {
  model::ModelConfig cfg;
  cfg.image_size = 224;
  cfg.patch_size = 56;  // 16 tokens per modality, keeps the forward cheap
  cfg.enc_dim = 16;
  cfg.enc_depth = 1;
  cfg.enc_heads = 2;
  cfg.dec_dim = 16;
  cfg.dec_depth = 1;
  cfg.dec_heads = 2;
  return cfg;
}

model::Checkpoint make_checkpoint(std::uint64_t seed, bool randomize_head) {
  model::Checkpoint ckpt;
  ckpt.config = small_model();
  ckpt.mask_config.tokens_per_modality = ckpt.config.tokens_per_modality();
  ckpt.params = model::init_params(ckpt.config, seed);
  if (randomize_head) {
    rng::Stream rs = rng::derive(seed, "head");
    for (const char* m : {"sat", "uav"}) {
      auto& w = ckpt.params.at(std::string("dec.") + m + ".head.w");
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = 0.02 * rs.normal();
    }
  }
  return ckpt;
}

datagen::PlotPair make_pair(std::uint64_t seed) {
  datagen::PlotPair pair;
  pair.sat_image = img::Image(224, 224, 3);
  pair.uav_image = img::Image(224, 224, 3);
  rng::Stream rs = rng::derive(seed, "pair");
  for (double& v : pair.sat_image.data) v = 0.25 + 0.5 * rs.uniform();
  for (double& v : pair.uav_image.data) v = 0.25 + 0.5 * rs.uniform();
  return pair;
}

}  // namespace

TEST_CASE("tint: identity spec is the identity to 1e-12") {
  const datagen::PlotPair pair = make_pair(1);
  const img::Image out = inference::apply_tint(pair.uav_image, inference::TintSpec::identity());
  double max_err = 0.0;
  for (size_t i = 0; i < out.size(); ++i)
    max_err = std::max(max_err, std::abs(out.data[i] - pair.uav_image.data[i]));
  CHECK(max_err < 1e-12);
}

TEST_CASE("tint: preset constants") {
  const auto m = inference::TintSpec::morning();
  CHECK(m.scale_r == 1.05);
  CHECK(m.scale_g == 1.00);
  CHECK(m.scale_b == 0.95);
  CHECK(m.brightness == 0.9);
  CHECK(m.contrast == 0.95);
  const auto a = inference::TintSpec::afternoon();
  CHECK(a.scale_r == 1.00);
  CHECK(a.scale_g == 1.00);
  CHECK(a.scale_b == 0.98);
  CHECK(a.brightness == 1.1);
  CHECK(a.contrast == 1.05);
  const auto e = inference::TintSpec::evening();
  CHECK(e.scale_r == 1.10);
  CHECK(e.scale_g == 0.95);
  CHECK(e.scale_b == 0.90);
  CHECK(e.brightness == 0.7);
  CHECK(e.contrast == 0.9);
  CHECK_FALSE(inference::TintSpec::preset("dusk").has_value());
}

TEST_CASE("tint: evening preset on constant gray matches hand arithmetic") {
  img::Image gray(8, 8, 3, 0.5);
  const img::Image out = inference::apply_tint(gray, inference::TintSpec::evening());
  // 0.5 * scale * 0.7 per channel; contrast about the per-channel mean leaves
  // constants unchanged.
  CHECK(std::abs(out.at(0, 0, 0) - 0.385) < 1e-12);
  CHECK(std::abs(out.at(0, 0, 1) - 0.3325) < 1e-12);
  CHECK(std::abs(out.at(0, 0, 2) - 0.315) < 1e-12);
}

TEST_CASE("tint: contrast pivots about the post-brightness channel mean") {
  img::Image im(1, 2, 3, 0.0);
  for (int c = 0; c < 3; ++c) {
    im.at(0, 0, c) = 0.2;
    im.at(0, 1, c) = 0.6;
  }
  inference::TintSpec spec;
  spec.contrast = 2.0;
  const img::Image out = inference::apply_tint(im, spec);
  // mean 0.4; 2*(0.2-0.4)+0.4 = 0.0; 2*(0.6-0.4)+0.4 = 0.8
  CHECK(out.at(0, 0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out.at(0, 1, 0) == doctest::Approx(0.8).epsilon(1e-12));
  inference::TintSpec bad;
  bad.brightness = 0.0;
  CHECK_THROWS_AS(inference::apply_tint(im, bad), InputError);
}

TEST_CASE("pseudo_uav mode never reads UAV pixels (bitwise)") {
  const model::Checkpoint ckpt = make_checkpoint(3, true);
  datagen::PlotPair pair = make_pair(5);
  inference::GenerationRequest req;
  req.mode = inference::GenerationMode::pseudo_uav;

  const auto a = inference::generate_one(ckpt, pair, req);
  for (double& v : pair.uav_image.data) v = 1.0 - v;  // garbage in the UAV raster
  const auto b = inference::generate_one(ckpt, pair, req);
  CHECK(a.predicted.data == b.predicted.data);  // bitwise identical
  // The reported MSE tracks the (changed) real target, not the prediction.
  CHECK(a.mse.has_value());
}

TEST_CASE("pseudo_sat is the mirror mode") {
  const model::Checkpoint ckpt = make_checkpoint(7, true);
  datagen::PlotPair pair = make_pair(9);
  inference::GenerationRequest req;
  req.mode = inference::GenerationMode::pseudo_sat;
  const auto a = inference::generate_one(ckpt, pair, req);
  for (double& v : pair.sat_image.data) v = 1.0 - v;
  const auto b = inference::generate_one(ckpt, pair, req);
  CHECK(a.predicted.data == b.predicted.data);
}

TEST_CASE("conditioned mode: provided patches matter, withheld patches do not") {
  const model::Checkpoint ckpt = make_checkpoint(11, true);
  datagen::PlotPair pair = make_pair(13);
  inference::GenerationRequest req;
  req.mode = inference::GenerationMode::conditioned;
  req.conditioned_uav_patches = {2, 5};

  const auto base = inference::generate_one(ckpt, pair, req);

  // Repaint a provided patch (patch 2 of the 4x4 grid at patch 56).
  datagen::PlotPair provided = pair;
  for (int y = 0; y < 56; ++y)
    for (int x = 0; x < 56; ++x)
      for (int c = 0; c < 3; ++c) provided.uav_image.at(y, 112 + x, c) = 0.9;
  const auto changed = inference::generate_one(ckpt, provided, req);
  double delta_provided = 0.0;
  for (size_t i = 0; i < base.predicted.size(); ++i)
    delta_provided = std::max(delta_provided,
                              std::abs(changed.predicted.data[i] - base.predicted.data[i]));
  CHECK(delta_provided > 1e-9);

  // Repaint a withheld patch (patch 0) leaves the output bitwise unchanged.
  datagen::PlotPair withheld = pair;
  for (int y = 0; y < 56; ++y)
    for (int x = 0; x < 56; ++x)
      for (int c = 0; c < 3; ++c) withheld.uav_image.at(y, x, c) = 0.05;
  const auto same = inference::generate_one(ckpt, withheld, req);
  CHECK(same.predicted.data == base.predicted.data);

  inference::GenerationRequest bad;
  bad.mode = inference::GenerationMode::conditioned;
  CHECK_THROWS_AS(inference::generate_one(ckpt, pair, bad), InputError);
}

TEST_CASE("zero-head checkpoint predicts zero and MSE equals mean squared target") {
  const model::Checkpoint ckpt = make_checkpoint(15, false);  // head at exactly zero
  const datagen::PlotPair pair = make_pair(17);
  inference::GenerationRequest req;
  req.mode = inference::GenerationMode::pseudo_uav;
  const auto g = inference::generate_one(ckpt, pair, req);
  for (double v : g.predicted.data) CHECK(v == 0.0);
  double expect = 0.0;
  for (double v : pair.uav_image.data) expect += v * v;
  expect /= static_cast<double>(pair.uav_image.size());
  CHECK(*g.mse == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("geometry mismatch is rejected") {
  model::Checkpoint ckpt = make_checkpoint(19, false);
  ckpt.config.image_size = 112;
  ckpt.config.patch_size = 16;
  const datagen::PlotPair pair = make_pair(21);
  inference::GenerationRequest req;
  CHECK_THROWS_AS(inference::generate_one(ckpt, pair, req), InputError);
}

TEST_CASE("mosaic assembles three panels on the grid") {
  std::vector<datagen::PlotPair> pairs;
  for (int i = 0; i < 4; ++i) {
    datagen::PlotPair p = make_pair(30 + static_cast<std::uint64_t>(i));
    p.record_id = i;
    p.subplot_id = 1;
    p.location_id = 0;
    p.timepoint_id = 0;
    pairs.push_back(std::move(p));
  }
  std::vector<inference::GeneratedSample> preds;
  for (int i = 0; i < 4; ++i) {
    inference::GeneratedSample g;
    g.predicted = img::Image(224, 224, 3, 0.5);
    g.record_id = i;
    g.subplot_id = 1;
    preds.push_back(std::move(g));
  }
  const img::Image mosaic =
      inference::build_mosaic(pairs, preds, 0, 0, std::make_pair(2, 2), 32);
  CHECK(mosaic.h == 64);
  CHECK(mosaic.w == 3 * 64 + 2 * 4);
  CHECK_THROWS_AS(inference::build_mosaic(pairs, preds, 3, 0, std::nullopt, 32),
                  InputError);
}

TEST_CASE("mask plan rendering grays masked patches") {
  img::Image sat(32, 32, 3, 0.2), uav(32, 32, 3, 0.4);
  masking::MaskPlan plan;
  plan.visible_sat = {0};
  plan.visible_uav = {};
  const img::Image panel = inference::render_mask_plan(plan, sat, uav, 16);
  CHECK(panel.at(0, 0, 0) == doctest::Approx(0.2));    // visible sat patch
  CHECK(panel.at(0, 16, 0) == doctest::Approx(0.75));  // masked sat patch
  CHECK(panel.at(0, 32 + 8 + 0, 0) == doctest::Approx(0.75));  // masked uav
}

TEST_CASE("sweep on a toy dataset is deterministic and well-formed") {
  // Tiny in-memory dataset with two locations.
  model::ModelConfig cfg = small_model();
  std::vector<trainer::TrainSample> train;
  std::vector<datagen::PlotPair> eval_pairs;
  for (int i = 0; i < 4; ++i) {
    datagen::PlotPair p = make_pair(40 + static_cast<std::uint64_t>(i));
    p.location_id = i % 2;
    p.record_id = i;
    eval_pairs.push_back(p);
    trainer::TrainSample s;
    s.patches.sat = tokenizer::patchify(p.sat_image, cfg.geometry());
    s.patches.uav = tokenizer::patchify(p.uav_image, cfg.geometry());
    s.location_id = p.location_id;
    train.push_back(std::move(s));
  }
  trainer::TrainConfig tc;
  tc.epochs = 2;
  tc.warmup_epochs = 1;
  tc.batch_size = 4;
  tc.base_lr = 1e-3;
  tc.seed = 3;
  masking::MaskingConfig mc;
  mc.tokens_per_modality = cfg.tokens_per_modality();
  mc.total_visible = 10;

  inference::SweepSpec spec;
  spec.grid = {{1.0, 1.0}, {0.9, 0.1}};
  const auto rows1 = inference::run_sweep(spec, train, eval_pairs, cfg, tc, mc);
  const auto rows2 = inference::run_sweep(spec, train, eval_pairs, cfg, tc, mc);
  REQUIRE(rows1.size() == 2);
  CHECK(rows1[1].expected_uav_token_pct == doctest::Approx(10.0));
  CHECK(rows1[0].mean_mse == rows2[0].mean_mse);
  CHECK(rows1[0].per_location_mse.size() == 2);
  for (const auto& r : rows1) CHECK(std::isfinite(r.mean_mse));

  const std::string path = (fs::temp_directory_path() / "crossmae_sweep.csv").string();
  inference::write_sweep_csv(path, rows1);
  const auto table = csv::read_file(path);
  CHECK(table.header.size() == 4 + 2);  // alpha pair, pct, mean + per-location
  CHECK(table.rows.size() == 2);
  fs::remove(path);
}
