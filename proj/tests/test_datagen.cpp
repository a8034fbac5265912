#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "crossmae/core/errors.hpp"
#include "crossmae/core/netpbm.hpp"
#include "crossmae/datagen/datagen.hpp"

using namespace crossmae;
namespace fs = std::filesystem;

namespace {

datagen::SceneGenConfig small_config() {
  datagen::SceneGenConfig cfg;
  cfg.grid_rows = 2;
  cfg.grid_cols = 2;
  cfg.genotypes = 2;
  cfg.replicates = 2;
  cfg.locations = 2;
  cfg.timepoints = 2;
  cfg.raw_short_px = 48;
  cfg.blur_sigma = 2.0;
  cfg.resample_factor = 2;
  return cfg;
}

}  // namespace

TEST_CASE("scene generation satisfies the documented structure") {
  const datagen::Scene scene = datagen::generate_scene(small_config(), 0);
  CHECK(scene.plots.size() == 2 * 2 * 2);  // locations * genotypes * replicates
  std::map<std::pair<int, int>, int> genotype_counts;
  for (const auto& p : scene.plots) {
    genotype_counts[{p.location_id, p.genotype_id}]++;
    CHECK(p.canopy_density >= 0.05);
    CHECK(p.canopy_density <= 0.95);
    CHECK(p.yield_value >= 0.0);
  }
  for (const auto& [key, count] : genotype_counts) CHECK(count == 2);
}

TEST_CASE("scene generation is a pure function of (config, seed)") {
  const datagen::Scene a = datagen::generate_scene(small_config(), 7);
  const datagen::Scene b = datagen::generate_scene(small_config(), 7);
  const datagen::Scene c = datagen::generate_scene(small_config(), 8);
  REQUIRE(a.plots.size() == b.plots.size());
  bool identical = true, differs = false;
  for (size_t i = 0; i < a.plots.size(); ++i) {
    identical = identical && a.plots[i].canopy_density == b.plots[i].canopy_density &&
                a.plots[i].yield_value == b.plots[i].yield_value;
    differs = differs || a.plots[i].canopy_density != c.plots[i].canopy_density;
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("zero yield noise matches the documented yield function exactly") {
  datagen::SceneGenConfig cfg = small_config();
  cfg.yield_noise = 0.0;
  const datagen::Scene scene = datagen::generate_scene(cfg, 1);
  for (const auto& p : scene.plots) {
    // Independent evaluation of the documented model.
    const double expected =
        2.0 + 6.0 * p.canopy_density + 1.5 * static_cast<double>(p.nitrogen);
    CHECK(p.yield_value == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("over-capacity configuration is rejected") {
  datagen::SceneGenConfig cfg = small_config();
  cfg.genotypes = 3;  // 3 * 2 > 2 * 2
  CHECK_THROWS_AS(datagen::generate_scene(cfg, 0), ConfigError);
  cfg = small_config();
  cfg.replicates = 1;
  CHECK_THROWS_AS(datagen::generate_scene(cfg, 0), ConfigError);
}

TEST_CASE("crop offsets match the anchor formula") {
  SUBCASE("exact 3:1 tiles with zero overlap") {
    CHECK(datagen::crop_offsets(300, 100) == std::vector<int>{0, 100, 200});
  }
  SUBCASE("240x100 overlaps neighbors by 30") {
    CHECK(datagen::crop_offsets(240, 100) == std::vector<int>{0, 70, 140});
  }
  SUBCASE("square plot gives three identical anchors") {
    CHECK(datagen::crop_offsets(100, 100) == std::vector<int>{0, 0, 0});
  }
  SUBCASE("non-positive dims are rejected") {
    CHECK_THROWS_AS(datagen::crop_offsets(0, 10), InputError);
  }
}

TEST_CASE("crop_subplots geometry properties") {
  rng::Stream rs = rng::derive(4, "crop");
  for (int rep = 0; rep < 30; ++rep) {
    const int s = 8 + static_cast<int>(rs.below(40));
    const int l = s + static_cast<int>(rs.below(3 * static_cast<std::uint64_t>(s)));
    img::Image im(s, l, 3);
    for (double& v : im.data) v = rs.uniform();
    const auto crops = datagen::crop_subplots({im});
    REQUIRE(crops.size() == 3);
    for (const auto& c : crops) {
      CHECK(c.h == s);
      CHECK(c.w == s);
    }
    const auto offs = datagen::crop_offsets(l, s);
    // Union covers the long axis.
    CHECK(offs[0] == 0);
    CHECK(offs[2] + s == l);
    CHECK(offs[1] >= offs[0]);
    CHECK(offs[2] >= offs[1]);
    if (l >= 3 * s) {
      CHECK(offs[1] >= offs[0] + s);  // pairwise disjoint
      CHECK(offs[2] >= offs[1] + s);
    } else {
      // Total overlap is exactly 3s - L.
      const int overlap01 = std::max(0, offs[0] + s - offs[1]);
      const int overlap12 = std::max(0, offs[1] + s - offs[2]);
      CHECK(overlap01 + overlap12 == 3 * s - l);
    }
    // Content check: crop 0 equals the leading square block.
    CHECK(crops[0].at(0, 0, 0) == im.at(0, 0, 0));
    CHECK(crops[2].at(0, s - 1, 0) == im.at(0, l - 1, 0));
  }
}

TEST_CASE("vertical plots crop along the long (vertical) axis") {
  img::Image im(90, 30, 1);
  for (int y = 0; y < 90; ++y)
    for (int x = 0; x < 30; ++x) im.at(y, x, 0) = y;
  const auto crops = datagen::crop_subplots({im});
  CHECK(crops[0].at(0, 0, 0) == 0.0);
  CHECK(crops[1].at(0, 0, 0) == 30.0);
  CHECK(crops[2].at(0, 0, 0) == 60.0);
}

TEST_CASE("dataset round trip, splits and consistency oracle") {
  const std::string dir = (fs::temp_directory_path() / "crossmae_ds_test").string();
  fs::remove_all(dir);
  datagen::SceneGenConfig cfg = small_config();
  const datagen::Scene scene = datagen::generate_scene(cfg, 3);
  datagen::write_dataset(dir, scene);

  SUBCASE("manifest reads back with the documented schema") {
    const auto records = datagen::read_manifest(dir);
    CHECK(records.size() == scene.plots.size() * cfg.timepoints);
  }

  SUBCASE("train split excludes the held-out location") {
    datagen::SplitSpec split;
    split.side = datagen::SplitSpec::Side::train;
    split.holdout_location_id = 1;
    const auto train = datagen::load_dataset(dir, split);
    CHECK(!train.empty());
    for (const auto& p : train) CHECK(p.location_id == 0);

    split.side = datagen::SplitSpec::Side::eval;
    const auto eval = datagen::load_dataset(dir, split);
    for (const auto& p : eval) CHECK(p.location_id == 1);
    CHECK(train.size() + eval.size() == scene.plots.size() * cfg.timepoints * 3);
  }

  SUBCASE("unknown hold-out location is an input error") {
    datagen::SplitSpec split;
    split.side = datagen::SplitSpec::Side::train;
    split.holdout_location_id = 9;
    CHECK_THROWS_AS(datagen::load_dataset(dir, split), InputError);
  }

  SUBCASE("pairs are 224x224, in range, with NIR") {
    datagen::SplitSpec split;
    const auto pairs = datagen::load_dataset(dir, split);
    REQUIRE(!pairs.empty());
    for (const auto& p : pairs) {
      CHECK(p.sat_image.h == 224);
      CHECK(p.uav_image.w == 224);
      CHECK(p.sat_nir.has_value());
    }
  }

  SUBCASE("cross-modal consistency: degraded uav matches the satellite render") {
    // The oracle applies the generator's documented degradation to the raw
    // UAV render and compares against the stored satellite raster.
    const datagen::PlotState& plot = scene.plots[0];
    const datagen::PlotRender render = datagen::render_plot(scene, plot, 0);
    const img::Image redo = img::degrade(render.uav, cfg.blur_sigma, cfg.resample_factor);
    double max_err = 0.0;
    for (int y = 0; y < render.uav.h; ++y)
      for (int x = 0; x < render.uav.w; ++x)
        for (int c = 0; c < 3; ++c)
          max_err = std::max(max_err, std::abs(redo.at(y, x, c) - render.sat.at(y, x, c)));
    CHECK(max_err < cfg.consistency_tolerance());
  }

  SUBCASE("grid shape is recorded") {
    const auto grid = datagen::dataset_grid_shape(dir);
    REQUIRE(grid.has_value());
    CHECK(grid->first == 2);
    CHECK(grid->second == 2);
  }

  fs::remove_all(dir);
}

TEST_CASE("missing yield handling") {
  const std::string dir = (fs::temp_directory_path() / "crossmae_ds_missing").string();
  fs::remove_all(dir);
  datagen::SceneGenConfig cfg = small_config();
  cfg.locations = 1;
  cfg.timepoints = 1;
  cfg.missing_yield_frac = 0.5;
  datagen::Scene scene = datagen::generate_scene(cfg, 12);
  // Force a deterministic mix regardless of the draw.
  scene.plots[0].yield_missing = true;
  scene.plots[1].yield_missing = false;
  datagen::write_dataset(dir, scene);

  datagen::SplitSpec keep_all;
  const auto all = datagen::load_dataset(dir, keep_all);
  datagen::SplitSpec downstream;
  downstream.require_yield = true;
  const auto with_yield = datagen::load_dataset(dir, downstream);
  CHECK(all.size() > with_yield.size());
  for (const auto& p : with_yield) CHECK(p.yield_value.has_value());
  int missing = 0;
  for (const auto& p : all) missing += p.yield_value ? 0 : 1;
  CHECK(missing > 0);  // retained for pretraining, flagged as missing
  fs::remove_all(dir);
}

TEST_CASE("paired rasters with mismatched aspect are rejected") {
  const std::string dir = (fs::temp_directory_path() / "crossmae_ds_mismatch").string();
  fs::remove_all(dir);
  fs::create_directories(dir + "/images");
  img::Image sat(224, 224, 3, 0.5);
  img::Image uav(200, 224, 3, 0.5);
  img::write_raster(dir + "/images/sat.ppm", sat, 8);
  img::write_raster(dir + "/images/uav.ppm", uav, 8);
  std::ofstream manifest(dir + "/manifest.csv");
  manifest << "sat_path,uav_path,location_id,timepoint_id,genotype_id,nitrogen_level,"
              "yield_value\n";
  manifest << "images/sat.ppm,images/uav.ppm,0,0,0,low,1.0\n";
  manifest.close();
  datagen::SplitSpec split;
  CHECK_THROWS_AS(datagen::load_dataset(dir, split), InputError);
  fs::remove_all(dir);
}

TEST_CASE("missing image file is an input error") {
  const std::string dir = (fs::temp_directory_path() / "crossmae_ds_nofile").string();
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream manifest(dir + "/manifest.csv");
  manifest << "sat_path,uav_path,location_id,timepoint_id,genotype_id,nitrogen_level,"
              "yield_value\n";
  manifest << "images/nope.ppm,images/nope2.ppm,0,0,0,low,missing\n";
  manifest.close();
  datagen::SplitSpec split;
  CHECK_THROWS_AS(datagen::load_dataset(dir, split), InputError);
  fs::remove_all(dir);
}

TEST_CASE("PlotPair validation rejects NaN and out-of-range pixels") {
  datagen::PlotPair pair;
  pair.sat_image = img::Image(224, 224, 3, 0.5);
  pair.uav_image = img::Image(224, 224, 3, 0.5);
  CHECK_NOTHROW(pair.validate());
  pair.uav_image.at(3, 3, 0) = std::nan("");
  CHECK_THROWS_AS(pair.validate(), InputError);
  pair.uav_image.at(3, 3, 0) = 1.5;
  CHECK_THROWS_AS(pair.validate(), InputError);
  pair.uav_image.at(3, 3, 0) = 0.5;
  pair.sat_image = img::Image(200, 224, 3, 0.5);
  CHECK_THROWS_AS(pair.validate(), InputError);
}

TEST_CASE("nitrogen names round trip") {
  for (auto n : {datagen::Nitrogen::low, datagen::Nitrogen::medium, datagen::Nitrogen::high})
    CHECK(datagen::nitrogen_from_name(datagen::nitrogen_name(n)) == n);
  CHECK_THROWS_AS(datagen::nitrogen_from_name("zero"), InputError);
}
