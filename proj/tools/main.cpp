#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crossmae/cli/config.hpp"
#include "crossmae/core/csv.hpp"
#include "crossmae/core/errors.hpp"
#include "crossmae/core/netpbm.hpp"
#include "crossmae/datagen/datagen.hpp"
#include "crossmae/inference/inference.hpp"
#include "crossmae/pheno/evaluate.hpp"
#include "crossmae/pheno/report.hpp"
#include "crossmae/trainer/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace crossmae;

namespace {

// Exit codes: 0 ok, 2 usage, 3 missing/invalid input, 4 config, 5 numeric/internal.
constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitConfig = 4;
constexpr int kExitInternal = 5;

std::string cache_root(const std::string& fallback) {
  if (const char* env = std::getenv("CROSSMAE_CACHE"); env && *env) return env;
  return fallback;
}

std::vector<trainer::TrainSample> to_train_samples(
    const std::vector<datagen::PlotPair>& pairs, const tokenizer::PatchGeometry& geom) {
  std::vector<trainer::TrainSample> samples;
  samples.reserve(pairs.size());
  for (const auto& pair : pairs) {
    trainer::TrainSample s;
    s.patches.sat = tokenizer::patchify(pair.sat_image, geom);
    s.patches.uav = tokenizer::patchify(pair.uav_image, geom);
    s.location_id = pair.location_id;
    samples.push_back(std::move(s));
  }
  return samples;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::uint64_t seed = 0;
  std::string grid = "4x6";
  int genotypes = 6;
  int replicates = 4;
  int locations = 2;
  int timepoints = 3;
  double missing_yield_frac = 0.0;
  double sensor_noise = 0.003;
  int raw_short_px = 112;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  datagen::SceneGenConfig cfg;
  const size_t x = a.grid.find('x');
  if (x == std::string::npos) throw ConfigError("--grid expects ROWSxCOLS, e.g. 4x6");
  cfg.grid_rows = std::stoi(a.grid.substr(0, x));
  cfg.grid_cols = std::stoi(a.grid.substr(x + 1));
  cfg.genotypes = a.genotypes;
  cfg.replicates = a.replicates;
  cfg.locations = a.locations;
  cfg.timepoints = a.timepoints;
  cfg.missing_yield_frac = a.missing_yield_frac;
  cfg.sensor_noise = a.sensor_noise;
  cfg.raw_short_px = a.raw_short_px;

  appcfg::DirLock lock(a.out);
  const datagen::Scene scene = datagen::generate_scene(cfg, a.seed);
  datagen::write_dataset(a.out, scene);

  json resolved;
  resolved["seed"] = a.seed;
  resolved["grid_rows"] = cfg.grid_rows;
  resolved["grid_cols"] = cfg.grid_cols;
  resolved["genotypes"] = cfg.genotypes;
  resolved["replicates"] = cfg.replicates;
  resolved["locations"] = cfg.locations;
  resolved["timepoints"] = cfg.timepoints;
  resolved["missing_yield_frac"] = cfg.missing_yield_frac;
  resolved["sensor_noise"] = cfg.sensor_noise;
  resolved["raw_short_px"] = cfg.raw_short_px;
  appcfg::write_run_manifest(a.out, "datagen synth", resolved, {},
                             {a.out + "/manifest.csv", a.out + "/scene.json"});
  std::cout << "wrote " << scene.plots.size() * cfg.timepoints << " plot records to "
            << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct PretrainArgs {
  std::string config_file;
  std::string data;
  std::string out;
  json overrides = json::object();
};

int run_pretrain(const PretrainArgs& a) {
  const json file_cfg =
      a.config_file.empty() ? json::object() : appcfg::load_json_file(a.config_file);
  const appcfg::PretrainSettings s = appcfg::resolve_pretrain(file_cfg, a.overrides);

  datagen::SplitSpec split;
  split.side = s.train.holdout_location_id >= 0 ? datagen::SplitSpec::Side::train
                                                : datagen::SplitSpec::Side::all;
  split.holdout_location_id = s.train.holdout_location_id;
  const auto pairs = datagen::load_dataset(a.data, split);
  const auto samples = to_train_samples(pairs, s.model.geometry());

  appcfg::DirLock lock(a.out);
  const trainer::TrainResult result =
      trainer::train(samples, s.model, s.train, s.mask, a.out,
                     [](const trainer::EpochRecord& r) {
                       std::printf("epoch %4d  loss %.6f  (sat %.6f  uav %.6f)  lr %.3e\n",
                                   r.epoch, r.loss_total, r.loss_sat, r.loss_uav,
                                   r.lr_first_step);
                       std::fflush(stdout);
                     });

  // Append-only per-epoch log.
  std::ofstream log(a.out + "/train_log.jsonl");
  for (const auto& e : result.log.epochs) {
    json rec = {{"epoch", e.epoch},       {"loss_total", e.loss_total},
                {"loss_sat", e.loss_sat}, {"loss_uav", e.loss_uav},
                {"lr", e.lr_first_step},  {"wall_ms", e.wall_ms},
                {"samples", e.samples}};
    log << rec.dump() << "\n";
  }

  appcfg::write_run_manifest(a.out, "pretrain", appcfg::settings_to_json(s),
                             {a.data + "/manifest.csv"},
                             {a.out + "/model.ckpt", a.out + "/train_log.jsonl"});
  std::cout << "trained " << result.log.epochs.size() << " epochs; checkpoint at "
            << a.out << "/model.ckpt\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string ckpt;
  std::string data;
  std::string out;
  std::string mode = "pseudo_uav";
  std::string tint = "none";
  std::string split = "all";
  int holdout = -1;
  int uav_patches = 0;
  std::uint64_t seed = 0;
  int mosaic_cell_px = 64;
};

int run_generate(const GenerateArgs& a) {
  const model::Checkpoint ckpt = model::load_checkpoint(a.ckpt);

  datagen::SplitSpec split;
  if (a.split == "train") split.side = datagen::SplitSpec::Side::train;
  else if (a.split == "eval") split.side = datagen::SplitSpec::Side::eval;
  else if (a.split == "all") split.side = datagen::SplitSpec::Side::all;
  else throw ConfigError("--split expects train|eval|all");
  split.holdout_location_id = a.holdout;
  const auto pairs = datagen::load_dataset(a.data, split);
  if (pairs.empty()) throw InputError("generate: no pairs selected");

  inference::GenerationRequest req;
  req.mode = inference::mode_from_name(a.mode);
  const auto tint = inference::TintSpec::preset(a.tint);
  if (!tint) throw ConfigError("--tint expects none|morning|afternoon|evening");
  req.tint = *tint;
  if (req.mode == inference::GenerationMode::conditioned) {
    if (a.uav_patches <= 0)
      throw ConfigError("conditioned mode requires --uav-patches K (K >= 1)");
    const int tokens = ckpt.config.tokens_per_modality();
    rng::Stream rs = rng::derive(a.seed, "conditioned-patches");
    std::set<int> chosen;
    while (static_cast<int>(chosen.size()) < std::min(a.uav_patches, tokens))
      chosen.insert(static_cast<int>(rs.below(static_cast<std::uint64_t>(tokens))));
    req.conditioned_uav_patches.assign(chosen.begin(), chosen.end());
  }

  appcfg::DirLock lock(a.out);
  fs::create_directories(a.out + "/pred");
  const auto preds = inference::generate(ckpt, pairs, req);

  csv::Table index;
  index.header = {"record_id", "subplot_id", "location_id", "timepoint_id",
                  "pred_path", "mse"};
  char buf[32];
  for (const auto& g : preds) {
    const std::string rel = "pred/rec" + std::to_string(g.record_id) + "_sp" +
                            std::to_string(g.subplot_id) + ".ppm";
    img::write_raster(a.out + "/" + rel, g.predicted, 16);
    std::snprintf(buf, sizeof(buf), "%.8g", g.mse.value_or(-1.0));
    index.rows.push_back({std::to_string(g.record_id), std::to_string(g.subplot_id),
                          std::to_string(g.location_id), std::to_string(g.timepoint_id),
                          rel, buf});
  }
  csv::write_file(a.out + "/predictions.csv", index);

  // Field mosaics per (location, timepoint).
  const auto grid = datagen::dataset_grid_shape(a.data);
  std::set<std::pair<int, int>> groups;
  for (const auto& p : pairs) groups.insert({p.location_id, p.timepoint_id});
  for (const auto& [loc, tp] : groups) {
    const img::Image mosaic =
        inference::build_mosaic(pairs, preds, loc, tp, grid, a.mosaic_cell_px);
    img::write_raster(a.out + "/mosaic_loc" + std::to_string(loc) + "_t" +
                          std::to_string(tp) + ".ppm",
                      mosaic, 8);
  }

  double mean_mse = 0.0;
  for (const auto& g : preds) mean_mse += g.mse.value_or(0.0);
  mean_mse /= static_cast<double>(preds.size());

  json resolved = {{"ckpt", a.ckpt},   {"mode", a.mode},       {"tint", a.tint},
                   {"split", a.split}, {"holdout", a.holdout}, {"seed", a.seed},
                   {"uav_patches", a.uav_patches}};
  appcfg::write_run_manifest(a.out, "generate", resolved,
                             {a.ckpt, a.data + "/manifest.csv"},
                             {a.out + "/predictions.csv"});
  std::printf("generated %zu predictions, mean MSE %.6f\n", preds.size(), mean_mse);
  return 0;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string grid_file;
  std::string data;
  std::string out_csv;
  std::string config_file;
  json overrides = json::object();
};

int run_sweep_cmd(const SweepArgs& a) {
  const json file_cfg =
      a.config_file.empty() ? json::object() : appcfg::load_json_file(a.config_file);
  const appcfg::PretrainSettings s = appcfg::resolve_pretrain(file_cfg, a.overrides);

  inference::SweepSpec spec;
  const csv::Table grid = csv::read_file(a.grid_file);
  const int c_sat = grid.require_col("alpha_sat");
  const int c_uav = grid.require_col("alpha_uav");
  for (const auto& row : grid.rows)
    spec.grid.push_back({std::stod(row[c_sat]), std::stod(row[c_uav])});

  datagen::SplitSpec train_split;
  train_split.side = s.train.holdout_location_id >= 0 ? datagen::SplitSpec::Side::train
                                                      : datagen::SplitSpec::Side::all;
  train_split.holdout_location_id = s.train.holdout_location_id;
  const auto train_pairs = datagen::load_dataset(a.data, train_split);
  const auto train_samples = to_train_samples(train_pairs, s.model.geometry());

  datagen::SplitSpec eval_split;
  eval_split.side = datagen::SplitSpec::Side::all;
  const auto eval_pairs = datagen::load_dataset(a.data, eval_split);

  const std::string cache =
      cache_root(fs::path(a.out_csv).parent_path().string() + "/cache");
  const auto rows = inference::run_sweep(spec, train_samples, eval_pairs, s.model,
                                         s.train, s.mask, cache);
  inference::write_sweep_csv(a.out_csv, rows);

  const std::string out_dir = fs::path(a.out_csv).parent_path().string();
  json resolved = appcfg::settings_to_json(s);
  resolved["grid_file"] = a.grid_file;
  appcfg::write_run_manifest(out_dir.empty() ? "." : out_dir, "sweep", resolved,
                             {a.grid_file, a.data + "/manifest.csv"}, {a.out_csv});
  std::cout << "sweep table written to " << a.out_csv << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct MaskDemoArgs {
  std::uint64_t seed = 0;
  double alpha_sat = 0.9;
  double alpha_uav = 0.1;
  int total_visible = 66;
  std::string data;
  std::string out = "maskdemo.ppm";
};

int run_maskdemo(const MaskDemoArgs& a) {
  masking::MaskingConfig cfg;
  cfg.alpha_sat = a.alpha_sat;
  cfg.alpha_uav = a.alpha_uav;
  cfg.total_visible = a.total_visible;
  rng::Stream rs = rng::derive(a.seed, "maskdemo");
  const masking::MaskPlan plan = masking::sample_plan(cfg, rs);

  img::Image sat(224, 224, 3), uav(224, 224, 3);
  if (!a.data.empty()) {
    datagen::SplitSpec split;
    const auto pairs = datagen::load_dataset(a.data, split);
    if (pairs.empty()) throw InputError("maskdemo: dataset is empty");
    sat = pairs[0].sat_image;
    uav = pairs[0].uav_image;
  } else {
    for (int y = 0; y < 224; ++y)
      for (int x = 0; x < 224; ++x) {
        sat.at(y, x, 0) = 0.3 + 0.4 * y / 223.0;
        sat.at(y, x, 1) = 0.5;
        sat.at(y, x, 2) = 0.3 + 0.4 * x / 223.0;
        uav.at(y, x, 0) = 0.2;
        uav.at(y, x, 1) = 0.4 + 0.4 * y / 223.0;
        uav.at(y, x, 2) = 0.2 + 0.3 * x / 223.0;
      }
  }
  const img::Image panel = inference::render_mask_plan(plan, sat, uav, 16);
  img::write_raster(a.out, panel, 8);
  std::printf("lambda_sat %.4f -> %zu sat + %zu uav visible tokens; wrote %s\n",
              plan.lambda_draw.lambda_sat, plan.visible_sat.size(),
              plan.visible_uav.size(), a.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------

struct FeaturesArgs {
  std::string data;
  std::string modality_set = "uav_rgb";
  std::string pred_dir;
  std::string out;
  std::string split = "all";
  int holdout = -1;
  std::string aggregate = "none";
};

int run_features(const FeaturesArgs& a) {
  const pheno::ModalitySet set = pheno::modality_set_from_name(a.modality_set);

  datagen::SplitSpec split;
  if (a.split == "train") split.side = datagen::SplitSpec::Side::train;
  else if (a.split == "eval") split.side = datagen::SplitSpec::Side::eval;
  else if (a.split == "all") split.side = datagen::SplitSpec::Side::all;
  else throw ConfigError("--split expects train|eval|all");
  split.holdout_location_id = a.holdout;
  const auto pairs = datagen::load_dataset(a.data, split);

  pheno::PredictionLookup preds;
  const bool needs_preds = set == pheno::ModalitySet::pred_uav_rgb ||
                           set == pheno::ModalitySet::sat_rgbnir_pred_uav;
  if (needs_preds) {
    if (a.pred_dir.empty())
      throw ConfigError("modality set " + a.modality_set +
                        " requires --pred DIR (a generate output directory)");
    const csv::Table index = csv::read_file(a.pred_dir + "/predictions.csv");
    const int c_rec = index.require_col("record_id");
    const int c_sub = index.require_col("subplot_id");
    const int c_path = index.require_col("pred_path");
    for (const auto& row : index.rows)
      preds.emplace(std::make_pair(std::stoi(row[c_rec]), std::stoi(row[c_sub])),
                    img::read_raster(a.pred_dir + "/" + row[c_path]));
  }

  std::vector<pheno::FeatureRow> rows =
      pheno::extract_all(pairs, set, needs_preds ? &preds : nullptr);
  if (a.aggregate == "plot-mean") rows = pheno::aggregate_plot_mean(rows);
  else if (a.aggregate != "none")
    throw ConfigError("--aggregate expects none|plot-mean");

  pheno::write_features_csv(a.out, rows, set);
  const std::string out_dir = fs::path(a.out).parent_path().string();
  json resolved = {{"modality_set", a.modality_set}, {"split", a.split},
                   {"holdout", a.holdout},           {"aggregate", a.aggregate},
                   {"pred_dir", a.pred_dir}};
  appcfg::write_run_manifest(out_dir.empty() ? "." : out_dir, "features", resolved,
                             {a.data + "/manifest.csv"}, {a.out});
  std::cout << "wrote " << rows.size() << " feature rows to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string features;
  std::string task = "yield";
  std::string model = "xgboost-style";
  std::string out;
  std::uint64_t seed = 0;
  int candidates = 25;
};

int run_evaluate(const EvaluateArgs& a) {
  pheno::EvalConfig cfg;
  cfg.task = pheno::task_from_name(a.task);
  cfg.family = pheno::family_from_name(a.model);
  cfg.seed = a.seed;
  cfg.search_candidates = a.candidates;

  const pheno::FeatureTable table = pheno::read_features_csv(a.features);
  const pheno::EvalReport report = pheno::evaluate(table.rows, cfg);
  pheno::write_eval_csv(a.out, report);

  const std::string out_dir = fs::path(a.out).parent_path().string();
  json resolved = {{"task", a.task},
                   {"model", a.model},
                   {"seed", a.seed},
                   {"candidates", a.candidates}};
  appcfg::write_run_manifest(out_dir.empty() ? "." : out_dir, "evaluate", resolved,
                             {a.features}, {a.out});
  for (const auto& c : report.cells)
    std::printf("%s t%d %s/%s: %.4f +/- %.4f%s\n", c.task.c_str(), c.timepoint,
                c.modality_set.c_str(), c.model.c_str(), c.mean, c.std_dev,
                c.failed ? "  [non-converged fold]" : "");
  return 0;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> eval_csvs;
  std::string out;
};

int run_report(const ReportArgs& a) {
  std::vector<pheno::EvalCell> cells;
  for (const std::string& path : a.eval_csvs) {
    const pheno::EvalReport r = pheno::read_eval_csv(path);
    cells.insert(cells.end(), r.cells.begin(), r.cells.end());
  }
  const pheno::ReportOutputs outputs = pheno::write_report(a.out, cells);
  json resolved = {{"eval_csvs", a.eval_csvs}};
  appcfg::write_run_manifest(a.out, "report", resolved, a.eval_csvs,
                             {outputs.modality_table_path,
                              outputs.augmentation_table_path, outputs.chart_path});
  std::cout << "report written to " << a.out << "\n";
  return 0;
}

void add_pretrain_overrides(CLI::App* cmd, json& overrides) {
  static const std::vector<std::pair<std::string, std::string>> int_keys = {
      {"--epochs", "epochs"},
      {"--batch", "batch_size"},
      {"--warmup-epochs", "warmup_epochs"},
      {"--holdout", "holdout_location_id"},
      {"--save-every", "save_every"},
      {"--enc-dim", "model.enc_dim"},
      {"--enc-depth", "model.enc_depth"},
      {"--enc-heads", "model.enc_heads"},
      {"--dec-dim", "model.dec_dim"},
      {"--dec-depth", "model.dec_depth"},
      {"--dec-heads", "model.dec_heads"},
      {"--patch", "model.patch_size"},
      {"--total-visible", "mask.total_visible"}};
  static const std::vector<std::pair<std::string, std::string>> real_keys = {
      {"--lr", "base_lr"},
      {"--warmup-start-lr", "warmup_start_lr"},
      {"--min-lr", "min_lr"},
      {"--weight-decay", "weight_decay"},
      {"--alpha-sat", "mask.alpha_sat"},
      {"--alpha-uav", "mask.alpha_uav"},
      {"--target-uav-mse", "target_uav_mse"}};
  for (const auto& [flag, key] : int_keys) {
    cmd->add_option_function<long long>(
        flag, [&overrides, key = key](long long v) { overrides[key] = v; });
  }
  for (const auto& [flag, key] : real_keys) {
    cmd->add_option_function<double>(
        flag, [&overrides, key = key](double v) { overrides[key] = v; });
  }
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&overrides](std::uint64_t v) { overrides["seed"] = v; });
  cmd->add_option_function<std::uint64_t>(
      "--mask-seed", [&overrides](std::uint64_t v) { overrides["mask.seed"] = v; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-modal satellite-to-UAV pretraining and phenotyping pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", appcfg::kToolVersion);

  auto* datagen_cmd = app.add_subcommand("datagen", "synthetic dataset tools");
  datagen_cmd->require_subcommand(1);
  SynthArgs synth;
  auto* synth_cmd =
      datagen_cmd->add_subcommand("synth", "generate a synthetic paired dataset");
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--grid", synth.grid, "plot grid per location, ROWSxCOLS");
  synth_cmd->add_option("--genotypes", synth.genotypes);
  synth_cmd->add_option("--replicates", synth.replicates);
  synth_cmd->add_option("--locations", synth.locations);
  synth_cmd->add_option("--timepoints", synth.timepoints);
  synth_cmd->add_option("--missing-yield-frac", synth.missing_yield_frac);
  synth_cmd->add_option("--sensor-noise", synth.sensor_noise);
  synth_cmd->add_option("--raw-short-px", synth.raw_short_px);
  synth_cmd->add_option("--out", synth.out)->required();

  PretrainArgs pre;
  auto* pre_cmd = app.add_subcommand("pretrain", "train the masked autoencoder");
  pre_cmd->add_option("--config", pre.config_file, "JSON config file");
  pre_cmd->add_option("--data", pre.data)->required();
  pre_cmd->add_option("--out", pre.out)->required();
  add_pretrain_overrides(pre_cmd, pre.overrides);

  GenerateArgs gen;
  auto* gen_cmd =
      app.add_subcommand("generate", "cross-modal generation from a checkpoint");
  gen_cmd->add_option("--ckpt", gen.ckpt)->required();
  gen_cmd->add_option("--data", gen.data)->required();
  gen_cmd->add_option("--out", gen.out)->required();
  gen_cmd->add_option("--mode", gen.mode, "pseudo_uav|pseudo_sat|conditioned");
  gen_cmd->add_option("--tint", gen.tint, "none|morning|afternoon|evening");
  gen_cmd->add_option("--split", gen.split, "train|eval|all");
  gen_cmd->add_option("--holdout", gen.holdout);
  gen_cmd->add_option("--uav-patches", gen.uav_patches,
                      "visible UAV patch count (conditioned)");
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--mosaic-cell-px", gen.mosaic_cell_px);

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "masking-ratio sweep over alpha pairs");
  sweep_cmd->add_option("--grid", sweep.grid_file, "CSV with alpha_sat,alpha_uav rows")
      ->required();
  sweep_cmd->add_option("--data", sweep.data)->required();
  sweep_cmd->add_option("--out", sweep.out_csv)->required();
  sweep_cmd->add_option("--config", sweep.config_file);
  add_pretrain_overrides(sweep_cmd, sweep.overrides);

  MaskDemoArgs mask_demo;
  auto* mask_cmd = app.add_subcommand("maskdemo", "render a sampled mask plan");
  mask_cmd->add_option("--seed", mask_demo.seed);
  mask_cmd->add_option("--alpha-sat", mask_demo.alpha_sat);
  mask_cmd->add_option("--alpha-uav", mask_demo.alpha_uav);
  mask_cmd->add_option("--total-visible", mask_demo.total_visible);
  mask_cmd->add_option("--data", mask_demo.data, "optional dataset for real imagery");
  mask_cmd->add_option("--out", mask_demo.out);

  FeaturesArgs feat;
  auto* feat_cmd = app.add_subcommand("features", "extract per-plot summary features");
  feat_cmd->add_option("--data", feat.data)->required();
  feat_cmd->add_option("--modality-set", feat.modality_set,
                       "sat_rgb|uav_rgb|pred_uav_rgb|sat_rgbnir|sat_rgbnir_pred_uav");
  feat_cmd->add_option("--pred", feat.pred_dir, "generate output dir (pred_uav sets)");
  feat_cmd->add_option("--out", feat.out)->required();
  feat_cmd->add_option("--split", feat.split, "train|eval|all");
  feat_cmd->add_option("--holdout", feat.holdout);
  feat_cmd->add_option("--aggregate", feat.aggregate, "none|plot-mean");

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "grouped-CV downstream evaluation");
  eval_cmd->add_option("--features", eval.features)->required();
  eval_cmd->add_option("--task", eval.task, "yield|nitrogen");
  eval_cmd->add_option("--model", eval.model,
                       "pls|svm|lasso|logistic|gboost|xgboost-style");
  eval_cmd->add_option("--out", eval.out)->required();
  eval_cmd->add_option("--seed", eval.seed);
  eval_cmd->add_option("--candidates", eval.candidates);

  ReportArgs rep;
  auto* rep_cmd =
      app.add_subcommand("report", "merge evaluation CSVs into comparison tables");
  rep_cmd->add_option("--eval", rep.eval_csvs, "evaluation CSV (repeatable)")->required();
  rep_cmd->add_option("--out", rep.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(synth);
    if (pre_cmd->parsed()) return run_pretrain(pre);
    if (gen_cmd->parsed()) return run_generate(gen);
    if (sweep_cmd->parsed()) return run_sweep_cmd(sweep);
    if (mask_cmd->parsed()) return run_maskdemo(mask_demo);
    if (feat_cmd->parsed()) return run_features(feat);
    if (eval_cmd->parsed()) return run_evaluate(eval);
    if (rep_cmd->parsed()) return run_report(rep);
  } catch (const ConfigError& e) {
    std::cerr << "error: [config] " << e.what() << "\n";
    return kExitConfig;
  } catch (const InputError& e) {
    std::cerr << "error: [input] " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericError& e) {
    std::cerr << "error: [numeric] " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: [internal] " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
