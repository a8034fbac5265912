#include "crossmae/datagen/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "crossmae/core/csv.hpp"
#include "crossmae/core/errors.hpp"
#include "crossmae/core/netpbm.hpp"

namespace crossmae::datagen {

namespace fs = std::filesystem;

std::string nitrogen_name(Nitrogen n) {
  switch (n) {
    case Nitrogen::low: return "low";
    case Nitrogen::medium: return "medium";
    case Nitrogen::high: return "high";
  }
  throw InternalError("nitrogen_name: bad enum");
}

Nitrogen nitrogen_from_name(const std::string& s) {
  if (s == "low") return Nitrogen::low;
  if (s == "medium") return Nitrogen::medium;
  if (s == "high") return Nitrogen::high;
  throw InputError("unknown nitrogen level '" + s + "'");
}

void SceneGenConfig::validate() const {
  if (grid_rows <= 0 || grid_cols <= 0) throw ConfigError("datagen: non-positive grid");
  if (genotypes < 2) throw ConfigError("datagen: need at least 2 genotypes");
  if (replicates < 2)
    throw ConfigError("datagen: need at least 2 replicates per genotype");
  if (genotypes * replicates > grid_rows * grid_cols)
    throw ConfigError("datagen: genotypes * replicates exceeds grid capacity");
  if (locations < 1 || timepoints < 1)
    throw ConfigError("datagen: need at least one location and timepoint");
  if (raw_short_px < 8) throw ConfigError("datagen: raw_short_px too small");
  if (aspect < 1.0) throw ConfigError("datagen: aspect must be >= 1");
  if (resample_factor < 1) throw ConfigError("datagen: resample_factor must be >= 1");
  if (missing_yield_frac < 0.0 || missing_yield_frac > 1.0)
    throw ConfigError("datagen: missing_yield_frac must be in [0,1]");
}

double yield_mean(double canopy_density, Nitrogen nitrogen) {
  return 2.0 + 6.0 * canopy_density + 1.5 * static_cast<double>(nitrogen);
}

Scene generate_scene(const SceneGenConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Scene scene;
  scene.config = cfg;
  scene.seed = seed;

  // Genotype vigor is global (shared across locations) so grouped CV has a
  // real genotype effect to generalize over.
  std::vector<double> vigor(cfg.genotypes);
  for (int g = 0; g < cfg.genotypes; ++g) {
    rng::Stream rs = rng::derive(seed, "vigor", g);
    vigor[g] = 0.25 + 0.5 * rs.uniform();
  }

  for (int loc = 0; loc < cfg.locations; ++loc) {
    int cell = 0;
    for (int g = 0; g < cfg.genotypes; ++g) {
      for (int r = 0; r < cfg.replicates; ++r, ++cell) {
        PlotState plot;
        plot.location_id = loc;
        plot.grid_row = cell / cfg.grid_cols;
        plot.grid_col = cell % cfg.grid_cols;
        plot.genotype_id = g;
        plot.replicate = r;
        plot.nitrogen = static_cast<Nitrogen>((g + r + loc) % 3);
        rng::Stream rs = rng::derive(seed, "plot", loc, g, r);
        const double n_boost = 0.06 * (static_cast<double>(plot.nitrogen) - 1.0);
        plot.canopy_density =
            std::clamp(vigor[g] + n_boost + cfg.canopy_noise * rs.normal(), 0.05, 0.95);
        plot.yield_value = std::max(
            0.0, yield_mean(plot.canopy_density, plot.nitrogen) +
                     cfg.yield_noise * rs.normal());
        if (cfg.missing_yield_frac > 0.0)
          plot.yield_missing = rs.uniform() < cfg.missing_yield_frac;
        scene.plots.push_back(plot);
      }
    }
  }
  return scene;
}

namespace {

// Smooth 1-D value noise on [0, n): cubic interpolation between seeded knots.
struct SmoothNoise {
  std::vector<double> knots;
  double spacing;

  SmoothNoise(rng::Stream& rs, int length, double spacing_px) : spacing(spacing_px) {
    const int k = static_cast<int>(std::ceil(length / spacing_px)) + 3;
    knots.resize(k);
    for (double& v : knots) v = rs.uniform();
  }

  double operator()(double x) const {
    const double t = x / spacing + 1.0;
    const int i = static_cast<int>(std::floor(t));
    const double f = t - i;
    const double a = knots[std::clamp(i - 1, 0, static_cast<int>(knots.size()) - 1)];
    const double b = knots[std::clamp(i, 0, static_cast<int>(knots.size()) - 1)];
    const double c = knots[std::clamp(i + 1, 0, static_cast<int>(knots.size()) - 1)];
    const double d = knots[std::clamp(i + 2, 0, static_cast<int>(knots.size()) - 1)];
    // Catmull-Rom
    return b + 0.5 * f * (c - a + f * (2 * a - 5 * b + 4 * c - d + f * (3 * (b - c) + d - a)));
  }
};

}  // namespace

PlotRender render_plot(const Scene& scene, const PlotState& plot, int timepoint) {
  const SceneGenConfig& cfg = scene.config;
  if (timepoint < 0 || timepoint >= cfg.timepoints)
    throw InputError("render_plot: timepoint out of range");
  const int h = cfg.raw_short_px;
  const int w = static_cast<int>(std::lround(cfg.raw_short_px * cfg.aspect));

  const double growth =
      cfg.timepoints == 1
          ? 1.0
          : 0.45 + 0.55 * static_cast<double>(timepoint) / (cfg.timepoints - 1);
  const double canopy_t = std::clamp(plot.canopy_density * growth, 0.0, 1.0);

  // Location-specific soil tone.
  rng::Stream loc_rs = rng::derive(scene.seed, "soil", plot.location_id);
  const double soil_r = 0.33 + 0.08 * loc_rs.uniform();
  const double soil_g = 0.26 + 0.06 * loc_rs.uniform();
  const double soil_b = 0.18 + 0.05 * loc_rs.uniform();

  // Plant color; nitrogen shifts greenness.
  const double n_shift = 0.92 + 0.08 * static_cast<double>(plot.nitrogen);
  const double plant_r = 0.10, plant_g = std::min(0.85, 0.42 * n_shift + 0.08),
               plant_b = 0.10;

  rng::Stream rs = rng::derive(scene.seed, "texture", plot.location_id,
                               static_cast<std::uint64_t>(plot.genotype_id) * 1000 +
                                   plot.replicate,
                               timepoint);
  const int plant_rows = 4;
  SmoothNoise along(rs, w, std::max(6.0, w / 14.0));
  SmoothNoise row_jitter(rs, w, std::max(10.0, w / 8.0));

  img::Image uav(h, w, 3);
  img::Image nir_full(h, w, 1);
  const double row_width = h * (0.055 + 0.06 * canopy_t);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double cover = 0.0;
      for (int k = 0; k < plant_rows; ++k) {
        const double cy =
            h * (static_cast<double>(k) + 0.5) / plant_rows + 1.5 * (row_jitter(x) - 0.5);
        const double dy = (y - cy) / row_width;
        cover += std::exp(-0.5 * dy * dy);
      }
      cover *= canopy_t * (0.55 + 0.45 * along(x));
      cover = std::clamp(cover, 0.0, 1.0);
      uav.at(y, x, 0) = soil_r + (plant_r - soil_r) * cover;
      uav.at(y, x, 1) = soil_g + (plant_g - soil_g) * cover;
      uav.at(y, x, 2) = soil_b + (plant_b - soil_b) * cover;
      nir_full.at(y, x, 0) = 0.15 + 0.70 * cover;
    }
  }
  img::clip01(uav);

  img::Image sat_rgb = img::degrade(uav, cfg.blur_sigma, cfg.resample_factor);
  img::Image sat_nir = img::degrade(nir_full, cfg.blur_sigma, cfg.resample_factor);
  if (cfg.sensor_noise > 0.0) {
    rng::Stream noise_rs = rng::derive(scene.seed, "sensor", plot.location_id,
                                       static_cast<std::uint64_t>(plot.genotype_id) * 1000 +
                                           plot.replicate,
                                       timepoint);
    for (double& v : sat_rgb.data) v += cfg.sensor_noise * noise_rs.normal();
    for (double& v : sat_nir.data) v += cfg.sensor_noise * noise_rs.normal();
  }
  img::clip01(sat_rgb);
  img::clip01(sat_nir);

  PlotRender out;
  out.uav = std::move(uav);
  out.sat = img::Image(h, w, 4);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      out.sat.at(y, x, 0) = sat_rgb.at(y, x, 0);
      out.sat.at(y, x, 1) = sat_rgb.at(y, x, 1);
      out.sat.at(y, x, 2) = sat_rgb.at(y, x, 2);
      out.sat.at(y, x, 3) = sat_nir.at(y, x, 0);
    }
  return out;
}

std::vector<int> crop_offsets(int long_side, int short_side) {
  if (long_side <= 0 || short_side <= 0)
    throw InputError("crop_offsets: non-positive dimensions");
  const int l = long_side, s = short_side;
  return {0, (l - s) / 2, l - s};
}

std::vector<img::Image> crop_subplots(const RawPlot& raw) {
  const img::Image& im = raw.image;
  if (im.h <= 0 || im.w <= 0 || im.empty())
    throw InputError("crop_subplots: non-positive dimensions");
  const bool wide = im.w >= im.h;
  const int s = wide ? im.h : im.w;
  const int l = wide ? im.w : im.h;
  std::vector<img::Image> crops;
  for (int off : crop_offsets(l, s)) {
    img::Image crop(s, s, im.c);
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x)
        for (int ch = 0; ch < im.c; ++ch)
          crop.at(y, x, ch) = wide ? im.at(y, x + off, ch) : im.at(y + off, x, ch);
    crops.push_back(std::move(crop));
  }
  return crops;
}

void PlotPair::validate() const {
  if (sat_image.h != 224 || sat_image.w != 224 || sat_image.c != 3)
    throw InputError("PlotPair: satellite image must be 224x224x3");
  if (uav_image.h != 224 || uav_image.w != 224 || uav_image.c != 3)
    throw InputError("PlotPair: uav image must be 224x224x3");
  if (sat_nir && (sat_nir->h != 224 || sat_nir->w != 224 || sat_nir->c != 1))
    throw InputError("PlotPair: NIR plane must be 224x224x1");
  auto check = [](const img::Image& im, const char* what) {
    for (double v : im.data)
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw InputError(std::string("PlotPair: ") + what +
                         " has values outside [0,1] or NaN");
  };
  check(sat_image, "satellite image");
  check(uav_image, "uav image");
  if (sat_nir) check(*sat_nir, "NIR plane");
}

void write_dataset(const std::string& dir, const Scene& scene) {
  fs::create_directories(fs::path(dir) / "images");
  csv::Table manifest;
  manifest.header = {"sat_path",    "uav_path",       "location_id", "timepoint_id",
                     "genotype_id", "nitrogen_level", "yield_value"};

  for (int t = 0; t < scene.config.timepoints; ++t) {
    for (const PlotState& plot : scene.plots) {
      const PlotRender render = render_plot(scene, plot, t);
      const std::string stem = "loc" + std::to_string(plot.location_id) + "_t" +
                               std::to_string(t) + "_g" +
                               std::to_string(plot.genotype_id) + "_r" +
                               std::to_string(plot.replicate);
      const std::string sat_rel = "images/" + stem + "_sat.pam";
      const std::string uav_rel = "images/" + stem + "_uav.ppm";
      img::write_raster(dir + "/" + sat_rel, render.sat, 16);
      img::write_raster(dir + "/" + uav_rel, render.uav, 16);
      manifest.rows.push_back(
          {sat_rel, uav_rel, std::to_string(plot.location_id), std::to_string(t),
           std::to_string(plot.genotype_id), nitrogen_name(plot.nitrogen),
           plot.yield_missing ? "missing" : std::to_string(plot.yield_value)});
    }
  }
  csv::write_file(dir + "/manifest.csv", manifest);

  nlohmann::json meta;
  meta["seed"] = scene.seed;
  meta["grid_rows"] = scene.config.grid_rows;
  meta["grid_cols"] = scene.config.grid_cols;
  meta["genotypes"] = scene.config.genotypes;
  meta["replicates"] = scene.config.replicates;
  meta["locations"] = scene.config.locations;
  meta["timepoints"] = scene.config.timepoints;
  meta["blur_sigma"] = scene.config.blur_sigma;
  meta["resample_factor"] = scene.config.resample_factor;
  meta["sensor_noise"] = scene.config.sensor_noise;
  meta["consistency_tolerance"] = scene.config.consistency_tolerance();
  nlohmann::json plots = nlohmann::json::array();
  for (const PlotState& p : scene.plots) {
    plots.push_back({{"location_id", p.location_id},
                     {"grid_row", p.grid_row},
                     {"grid_col", p.grid_col},
                     {"genotype_id", p.genotype_id},
                     {"replicate", p.replicate},
                     {"nitrogen", nitrogen_name(p.nitrogen)},
                     {"canopy_density", p.canopy_density},
                     {"yield_value", p.yield_value},
                     {"yield_missing", p.yield_missing}});
  }
  meta["plots"] = plots;
  std::ofstream os(dir + "/scene.json");
  os << meta.dump(2) << "\n";
  if (!os) throw InputError("write_dataset: cannot write scene.json");
}

std::vector<ManifestRecord> read_manifest(const std::string& dataset_dir) {
  const csv::Table t = csv::read_file(dataset_dir + "/manifest.csv");
  const int c_sat = t.require_col("sat_path");
  const int c_uav = t.require_col("uav_path");
  const int c_loc = t.require_col("location_id");
  const int c_tp = t.require_col("timepoint_id");
  const int c_gen = t.require_col("genotype_id");
  const int c_nit = t.require_col("nitrogen_level");
  const int c_yld = t.require_col("yield_value");
  std::vector<ManifestRecord> out;
  for (const auto& row : t.rows) {
    ManifestRecord r;
    r.sat_path = row[c_sat];
    r.uav_path = row[c_uav];
    r.location_id = std::stoi(row[c_loc]);
    r.timepoint_id = std::stoi(row[c_tp]);
    r.genotype_id = std::stoi(row[c_gen]);
    r.nitrogen = nitrogen_from_name(row[c_nit]);
    if (row[c_yld] != "missing") r.yield_value = std::stod(row[c_yld]);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PlotPair> load_dataset(const std::string& dataset_dir, const SplitSpec& split) {
  const std::vector<ManifestRecord> records = read_manifest(dataset_dir);
  if (split.side != SplitSpec::Side::all) {
    bool holdout_seen = false;
    for (const auto& r : records)
      if (r.location_id == split.holdout_location_id) holdout_seen = true;
    if (!holdout_seen)
      throw InputError("load_dataset: hold-out location " +
                       std::to_string(split.holdout_location_id) +
                       " not present in manifest");
  }

  std::vector<PlotPair> out;
  for (size_t rid = 0; rid < records.size(); ++rid) {
    const ManifestRecord& rec = records[rid];
    const bool held_out = rec.location_id == split.holdout_location_id;
    if (split.side == SplitSpec::Side::train && held_out) continue;
    if (split.side == SplitSpec::Side::eval && !held_out) continue;
    if (split.require_yield && !rec.yield_value) continue;

    const img::Image sat_raw = img::read_raster(dataset_dir + "/" + rec.sat_path);
    const img::Image uav_raw = img::read_raster(dataset_dir + "/" + rec.uav_path);
    if (uav_raw.c != 3)
      throw InputError("load_dataset: uav raster must have 3 channels: " + rec.uav_path);
    if (sat_raw.c != 3 && sat_raw.c != 4)
      throw InputError("load_dataset: satellite raster must have 3 or 4 channels: " +
                       rec.sat_path);
    // Paired rasters must agree on aspect so the three crops stay
    // co-registered.
    const double ar_sat = static_cast<double>(std::max(sat_raw.h, sat_raw.w)) /
                          std::min(sat_raw.h, sat_raw.w);
    const double ar_uav = static_cast<double>(std::max(uav_raw.h, uav_raw.w)) /
                          std::min(uav_raw.h, uav_raw.w);
    if (std::abs(ar_sat - ar_uav) > 0.01 * std::max(ar_sat, ar_uav))
      throw InputError("load_dataset: dimension mismatch between paired images in record " +
                       std::to_string(rid));

    const bool has_nir = sat_raw.c == 4;
    const std::vector<img::Image> sat_crops =
        crop_subplots({has_nir ? sat_raw : sat_raw});
    const std::vector<img::Image> uav_crops = crop_subplots({uav_raw});
    for (int sp = 0; sp < 3; ++sp) {
      PlotPair pair;
      const img::Image sat224 = img::resize_bilinear(sat_crops[sp], 224, 224);
      pair.sat_image = img::take_channels(sat224, 0, 3);
      if (has_nir) pair.sat_nir = img::take_channels(sat224, 3, 1);
      pair.uav_image = img::resize_bilinear(uav_crops[sp], 224, 224);
      pair.record_id = static_cast<int>(rid);
      pair.subplot_id = sp;
      pair.location_id = rec.location_id;
      pair.timepoint_id = rec.timepoint_id;
      pair.genotype_id = rec.genotype_id;
      pair.nitrogen = rec.nitrogen;
      pair.yield_value = rec.yield_value;
      pair.validate();
      out.push_back(std::move(pair));
    }
  }
  return out;
}

std::optional<std::pair<int, int>> dataset_grid_shape(const std::string& dataset_dir) {
  std::ifstream is(dataset_dir + "/scene.json");
  if (!is) return std::nullopt;
  nlohmann::json meta;
  try {
    is >> meta;
    return std::make_pair(meta.at("grid_rows").get<int>(),
                          meta.at("grid_cols").get<int>());
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

}  // namespace crossmae::datagen
