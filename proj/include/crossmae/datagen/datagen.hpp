#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crossmae/core/image.hpp"
#include "crossmae/core/rng.hpp"

namespace crossmae::datagen {

enum class Nitrogen { low = 0, medium = 1, high = 2 };

std::string nitrogen_name(Nitrogen n);
Nitrogen nitrogen_from_name(const std::string& s);

struct SceneGenConfig {
  int grid_rows = 4;
  int grid_cols = 6;
  int genotypes = 6;     // G
  int replicates = 4;    // M (plots per genotype per location)
  int locations = 2;
  int timepoints = 3;
  int raw_short_px = 112;     // short side of a raw plot image
  double aspect = 3.0;        // long/short ratio of raw plots
  double blur_sigma = 4.0;    // satellite degradation blur
  int resample_factor = 4;    // satellite down/up-sample factor
  double sensor_noise = 0.003;  // additive noise on satellite renders
  double canopy_noise = 0.08;
  double yield_noise = 0.4;
  double missing_yield_frac = 0.0;

  void validate() const;
  // Generator-documented bound for |degrade(uav) - sat|: quantization plus
  // the worst additive sensor deviation retained after clipping.
  double consistency_tolerance() const { return 5.0 * sensor_noise + 2e-4; }
};

// Latent state of one plot at one location (shared across timepoints).
struct PlotState {
  int location_id = 0;
  int grid_row = 0;
  int grid_col = 0;
  int genotype_id = 0;
  int replicate = 0;
  Nitrogen nitrogen = Nitrogen::low;
  double canopy_density = 0.0;  // [0,1]
  double yield_value = 0.0;     // >= 0
  bool yield_missing = false;
};

struct Scene {
  SceneGenConfig config;
  std::uint64_t seed = 0;
  std::vector<PlotState> plots;  // locations * genotypes * replicates
};

// The documented yield model. Monotone in both arguments; noise added on top
// by generate_scene (scaled by config.yield_noise).
double yield_mean(double canopy_density, Nitrogen nitrogen);

// Pure function of (config, seed).
Scene generate_scene(const SceneGenConfig& cfg, std::uint64_t seed);

// Renders one plot at one timepoint. uav is raw_short_px x (aspect*short) x 3;
// sat has an extra NIR channel (4 total) and is the degraded uav plus NIR.
struct PlotRender {
  img::Image uav;  // H x W x 3
  img::Image sat;  // H x W x 4 (RGB + NIR)
};
PlotRender render_plot(const Scene& scene, const PlotState& plot, int timepoint);

// --- plot cropping -----------------------------------------------------------

struct RawPlot {
  img::Image image;
};

// Exactly three square crops of side s = min(H, W), anchored at offsets
// 0, floor((L - s)/2), L - s along the long axis (L = max(H, W)). Adjacent
// crops overlap when the aspect ratio is below 3.
std::vector<img::Image> crop_subplots(const RawPlot& raw);
std::vector<int> crop_offsets(int long_side, int short_side);

// --- dataset layout ----------------------------------------------------------

struct ManifestRecord {
  std::string sat_path;  // relative to the manifest directory
  std::string uav_path;
  int location_id = 0;
  int timepoint_id = 0;
  int genotype_id = 0;
  Nitrogen nitrogen = Nitrogen::low;
  std::optional<double> yield_value;
};

struct PlotPair {
  img::Image sat_image;                 // 224 x 224 x 3
  std::optional<img::Image> sat_nir;    // 224 x 224 x 1 when the file has NIR
  img::Image uav_image;                 // 224 x 224 x 3
  int record_id = 0;   // row index in the manifest
  int subplot_id = 0;  // 0..2
  int location_id = 0;
  int timepoint_id = 0;
  int genotype_id = 0;
  Nitrogen nitrogen = Nitrogen::low;
  std::optional<double> yield_value;

  void validate() const;  // dims, [0,1] range, NaN rejection
};

struct SplitSpec {
  enum class Side { train, eval, all };
  Side side = Side::all;
  int holdout_location_id = -1;
  bool require_yield = false;  // downstream analyses drop missing-yield plots
};

// Writes the full synthetic dataset (manifest.csv, scene.json, images/).
void write_dataset(const std::string& dir, const Scene& scene);

std::vector<ManifestRecord> read_manifest(const std::string& dataset_dir);

// Applies the split, loads rasters, crops the three subplots of each record
// and resizes them to 224 x 224 (bilinear).
std::vector<PlotPair> load_dataset(const std::string& dataset_dir, const SplitSpec& split);

// Grid shape recorded by the generator (for field mosaics); nullopt when the
// dataset has no scene.json.
std::optional<std::pair<int, int>> dataset_grid_shape(const std::string& dataset_dir);

}  // namespace crossmae::datagen
