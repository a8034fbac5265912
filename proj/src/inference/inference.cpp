#include "crossmae/inference/inference.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "crossmae/core/csv.hpp"
#include "crossmae/core/errors.hpp"

namespace crossmae::inference {

namespace fs = std::filesystem;

GenerationMode mode_from_name(const std::string& s) {
  if (s == "pseudo_uav") return GenerationMode::pseudo_uav;
  if (s == "pseudo_sat") return GenerationMode::pseudo_sat;
  if (s == "conditioned") return GenerationMode::conditioned;
  throw InputError("unknown generation mode '" + s + "'");
}

std::string mode_name(GenerationMode m) {
  switch (m) {
    case GenerationMode::pseudo_uav: return "pseudo_uav";
    case GenerationMode::pseudo_sat: return "pseudo_sat";
    case GenerationMode::conditioned: return "conditioned";
  }
  throw InternalError("mode_name: bad enum");
}

void TintSpec::validate() const {
  if (scale_r <= 0 || scale_g <= 0 || scale_b <= 0)
    throw InputError("tint: channel scales must be positive");
  if (brightness <= 0 || contrast <= 0)
    throw InputError("tint: brightness and contrast must be positive");
}

std::optional<TintSpec> TintSpec::preset(const std::string& name) {
  if (name == "morning") return morning();
  if (name == "afternoon") return afternoon();
  if (name == "evening") return evening();
  if (name == "none" || name == "identity") return identity();
  return std::nullopt;
}

img::Image apply_tint(const img::Image& image, const TintSpec& spec) {
  spec.validate();
  if (image.c != 3) throw InputError("tint: expects a 3-channel image");
  const double scales[3] = {spec.scale_r, spec.scale_g, spec.scale_b};
  img::Image out(image.h, image.w, 3);
  double mean[3] = {0.0, 0.0, 0.0};
  for (int y = 0; y < image.h; ++y)
    for (int x = 0; x < image.w; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        const double v = spec.brightness * image.at(y, x, ch) * scales[ch];
        out.at(y, x, ch) = v;
        mean[ch] += v;
      }
  const double n = static_cast<double>(image.h) * image.w;
  for (double& m : mean) m /= n;
  for (int y = 0; y < image.h; ++y)
    for (int x = 0; x < image.w; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        const double v = spec.contrast * (out.at(y, x, ch) - mean[ch]) + mean[ch];
        out.at(y, x, ch) = std::clamp(v, 0.0, 1.0);
      }
  return out;
}

namespace {

masking::MaskPlan plan_for_mode(const GenerationRequest& req, int tokens) {
  switch (req.mode) {
    case GenerationMode::pseudo_uav:
      return masking::full_sat_plan(tokens);
    case GenerationMode::pseudo_sat:
      return masking::full_uav_plan(tokens);
    case GenerationMode::conditioned:
      if (req.conditioned_uav_patches.empty() ||
          req.conditioned_uav_patches.size() > static_cast<size_t>(tokens))
        throw InputError("conditioned mode requires between 1 and P uav patch indices");
      return masking::conditioned_plan(tokens, req.conditioned_uav_patches);
  }
  throw InternalError("plan_for_mode: bad enum");
}

double image_mse(const img::Image& a, const img::Image& b) {
  if (a.size() != b.size()) throw InternalError("image_mse: shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

}  // namespace

GeneratedSample generate_one(const model::Checkpoint& ckpt, const datagen::PlotPair& pair,
                             const GenerationRequest& req) {
  const model::ModelConfig& cfg = ckpt.config;
  cfg.validate();
  if (cfg.image_size != 224)
    throw InputError("generate: checkpoint geometry does not match 224x224 plot pairs");
  const int tokens = cfg.tokens_per_modality();
  const masking::MaskPlan plan = plan_for_mode(req, tokens);
  const tokenizer::PatchGeometry geom = cfg.geometry();

  const bool predict_uav = req.mode != GenerationMode::pseudo_sat;

  model::SamplePatches patches;
  patches.sat = tokenizer::patchify(pair.sat_image, geom);
  if (plan.visible_uav.empty()) {
    // UAV tokens fully masked: the raster is never tokenized, so its content
    // cannot reach the model.
    patches.uav = model::Mat::Zero(tokens, geom.patch_dim());
  } else {
    patches.uav = tokenizer::patchify(apply_tint(pair.uav_image, req.tint), geom);
  }
  if (plan.visible_sat.empty()) patches.sat = model::Mat::Zero(tokens, geom.patch_dim());

  model::ForwardOptions fo;
  fo.want_loss = false;
  fo.want_predictions = true;
  const model::ForwardResult fr = model::forward(patches, plan, ckpt.params, cfg, fo);

  GeneratedSample out;
  out.predicted = tokenizer::unpatchify(predict_uav ? fr.pred_uav : fr.pred_sat, geom);
  img::clip01(out.predicted);
  const img::Image& target = predict_uav ? pair.uav_image : pair.sat_image;
  out.mse = image_mse(out.predicted, target);
  out.record_id = pair.record_id;
  out.subplot_id = pair.subplot_id;
  out.location_id = pair.location_id;
  out.timepoint_id = pair.timepoint_id;
  return out;
}

std::vector<GeneratedSample> generate(const model::Checkpoint& ckpt,
                                      const std::vector<datagen::PlotPair>& pairs,
                                      const GenerationRequest& req) {
  std::vector<GeneratedSample> out(pairs.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
  for (size_t i = 0; i < pairs.size(); ++i) out[i] = generate_one(ckpt, pairs[i], req);
  return out;
}

img::Image build_mosaic(const std::vector<datagen::PlotPair>& pairs,
                        const std::vector<GeneratedSample>& preds, int location_id,
                        int timepoint_id, std::optional<std::pair<int, int>> grid,
                        int cell_px) {
  std::vector<size_t> picks;
  for (size_t i = 0; i < pairs.size(); ++i)
    if (pairs[i].location_id == location_id && pairs[i].timepoint_id == timepoint_id &&
        pairs[i].subplot_id == 1)
      picks.push_back(i);
  if (picks.empty()) throw InputError("mosaic: no plots for requested location/timepoint");

  int rows, cols;
  if (grid) {
    rows = grid->first;
    cols = grid->second;
    while (rows * cols < static_cast<int>(picks.size())) ++rows;
  } else {
    cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(picks.size()))));
    rows = static_cast<int>(std::ceil(static_cast<double>(picks.size()) / cols));
  }

  const int gap = 4;
  const int panel_w = cols * cell_px;
  const int panel_h = rows * cell_px;
  img::Image mosaic(panel_h, 3 * panel_w + 2 * gap, 3, 1.0);

  auto paste = [&](const img::Image& src, int panel, int cell) {
    const img::Image small = img::resize_bilinear(src, cell_px, cell_px);
    const int r = cell / cols, c = cell % cols;
    const int x0 = panel * (panel_w + gap) + c * cell_px;
    const int y0 = r * cell_px;
    for (int y = 0; y < cell_px; ++y)
      for (int x = 0; x < cell_px; ++x)
        for (int ch = 0; ch < 3; ++ch)
          mosaic.at(y0 + y, x0 + x, ch) = small.at(y, x, ch);
  };

  for (size_t k = 0; k < picks.size(); ++k) {
    const datagen::PlotPair& pair = pairs[picks[k]];
    paste(pair.sat_image, 0, static_cast<int>(k));
    paste(pair.uav_image, 1, static_cast<int>(k));
    paste(preds[picks[k]].predicted, 2, static_cast<int>(k));
  }
  return mosaic;
}

void SweepSpec::validate() const {
  if (grid.empty()) throw ConfigError("sweep: empty alpha grid");
  for (const SweepPoint& p : grid)
    if (!(p.alpha_sat > 0.0) || !(p.alpha_uav > 0.0))
      throw ConfigError("sweep: alphas must be strictly positive");
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec,
                                const std::vector<trainer::TrainSample>& train_samples,
                                const std::vector<datagen::PlotPair>& eval_pairs,
                                const model::ModelConfig& model_cfg,
                                const trainer::TrainConfig& train_cfg,
                                const masking::MaskingConfig& base_mask_cfg,
                                const std::string& cache_dir) {
  spec.validate();
  if (eval_pairs.empty()) throw ConfigError("sweep: empty evaluation split");

  std::vector<SweepRow> rows;
  for (const SweepPoint& point : spec.grid) {
    masking::MaskingConfig mask_cfg = base_mask_cfg;
    mask_cfg.alpha_sat = point.alpha_sat;
    mask_cfg.alpha_uav = point.alpha_uav;

    model::Checkpoint ckpt;
    bool loaded = false;
    std::string cache_path;
    if (!cache_dir.empty()) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "a%.6g_b%.6g_s%llu_e%d_n%zu.ckpt",
                    point.alpha_sat, point.alpha_uav,
                    static_cast<unsigned long long>(train_cfg.seed), train_cfg.epochs,
                    train_samples.size());
      cache_path = cache_dir + "/" + buf;
      if (fs::exists(cache_path)) {
        ckpt = model::load_checkpoint(cache_path);
        loaded = ckpt.config == model_cfg;
      }
    }
    if (!loaded) {
      ckpt = trainer::train(train_samples, model_cfg, train_cfg, mask_cfg).checkpoint;
      if (!cache_path.empty()) {
        fs::create_directories(cache_dir);
        model::save_checkpoint(cache_path, ckpt);
      }
    }

    GenerationRequest req;
    req.mode = GenerationMode::pseudo_uav;
    const std::vector<GeneratedSample> preds = generate(ckpt, eval_pairs, req);

    std::map<int, std::pair<double, int>> by_loc;
    double total = 0.0;
    for (const GeneratedSample& g : preds) {
      by_loc[g.location_id].first += *g.mse;
      by_loc[g.location_id].second += 1;
      total += *g.mse;
    }
    SweepRow row;
    row.alphas = point;
    row.expected_uav_token_pct =
        100.0 * point.alpha_uav / (point.alpha_sat + point.alpha_uav);
    row.mean_mse = total / static_cast<double>(preds.size());
    for (const auto& [loc, acc] : by_loc)
      row.per_location_mse.emplace_back(loc, acc.first / acc.second);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  if (rows.empty()) throw InternalError("write_sweep_csv: no rows");
  std::set<int> locations;
  for (const SweepRow& r : rows)
    for (const auto& [loc, mse] : r.per_location_mse) locations.insert(loc);

  csv::Table t;
  t.header = {"alpha_sat", "alpha_uav", "expected_uav_token_pct", "mean_mse"};
  for (int loc : locations) t.header.push_back("loc" + std::to_string(loc) + "_mse");
  char buf[32];
  for (const SweepRow& r : rows) {
    std::vector<std::string> row;
    auto fmt = [&](double v) {
      std::snprintf(buf, sizeof(buf), "%.6g", v);
      return std::string(buf);
    };
    row.push_back(fmt(r.alphas.alpha_sat));
    row.push_back(fmt(r.alphas.alpha_uav));
    row.push_back(fmt(r.expected_uav_token_pct));
    row.push_back(fmt(r.mean_mse));
    for (int loc : locations) {
      std::string cell;
      for (const auto& [l, mse] : r.per_location_mse)
        if (l == loc) cell = fmt(mse);
      row.push_back(cell);
    }
    t.rows.push_back(std::move(row));
  }
  csv::write_file(path, t);
}

img::Image render_mask_plan(const masking::MaskPlan& plan, const img::Image& sat,
                            const img::Image& uav, int patch_size) {
  if (sat.h != uav.h || sat.w != uav.w) throw InputError("render_mask_plan: size mismatch");
  const int grid = sat.h / patch_size;
  const int gap = 8;
  img::Image panel(sat.h, sat.w * 2 + gap, 3, 1.0);
  auto draw = [&](const img::Image& im, const std::vector<int>& visible, int x_off) {
    std::set<int> vis(visible.begin(), visible.end());
    for (int py = 0; py < grid; ++py)
      for (int px = 0; px < grid; ++px) {
        const bool on = vis.count(py * grid + px) > 0;
        for (int y = 0; y < patch_size; ++y)
          for (int x = 0; x < patch_size; ++x)
            for (int ch = 0; ch < 3; ++ch) {
              const double v = im.at(py * patch_size + y, px * patch_size + x, ch);
              panel.at(py * patch_size + y, x_off + px * patch_size + x, ch) =
                  on ? v : 0.75;
            }
      }
  };
  draw(sat, plan.visible_sat, 0);
  draw(uav, plan.visible_uav, sat.w + gap);
  return panel;
}

}  // namespace crossmae::inference
