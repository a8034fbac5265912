#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crossmae/datagen/datagen.hpp"
#include "crossmae/pheno/indices.hpp"

namespace crossmae::pheno {

// Which images feed the feature extractor. These mirror the evaluation
// configurations of the downstream study: real-satellite / real-UAV /
// predicted-UAV RGB, satellite RGB+NIR, and the NIR set augmented with
// predicted-UAV features.
enum class ModalitySet {
  sat_rgb,
  uav_rgb,
  pred_uav_rgb,
  sat_rgbnir,
  sat_rgbnir_pred_uav,
};

ModalitySet modality_set_from_name(const std::string& s);
std::string modality_set_name(ModalitySet m);

struct SummaryStats {
  double min = 0.0, mean = 0.0, max = 0.0, std_dev = 0.0;  // population std
};

SummaryStats summarize(const img::Image& plane);

struct FeatureRow {
  std::vector<double> values;  // in the fixed column order for the set
  // Metadata / provenance.
  std::string modality_set;
  int location_id = 0;
  int timepoint_id = 0;
  int plot_id = 0;     // manifest record index
  int subplot_id = 0;  // 0..2
  int genotype_id = 0;
  datagen::Nitrogen nitrogen = datagen::Nitrogen::low;
  std::optional<double> yield_value;
};

// Fixed, documented column order for a modality set: per source (sat, uav or
// pred_uav), bands then applicable indices, each expanded to
// <source>_<name>_{min,mean,max,std}.
std::vector<std::string> feature_columns(ModalitySet set);

// Predicted-UAV images keyed by (record_id, subplot_id).
using PredictionLookup = std::map<std::pair<int, int>, img::Image>;

// Extracts one row per plot pair; NIR-dependent sets require pairs loaded
// from 4-channel satellite rasters, prediction-dependent sets require a
// lookup entry per pair.
FeatureRow extract_features(const datagen::PlotPair& pair, ModalitySet set,
                            const img::Image* pred_uav);

std::vector<FeatureRow> extract_all(const std::vector<datagen::PlotPair>& pairs,
                                    ModalitySet set, const PredictionLookup* preds);

// Averages the three subplot rows of each plot record ("plot-mean"
// aggregation); metadata of subplot 0 is kept with subplot_id = -1.
std::vector<FeatureRow> aggregate_plot_mean(const std::vector<FeatureRow>& rows);

void write_features_csv(const std::string& path, const std::vector<FeatureRow>& rows,
                        ModalitySet set);
struct FeatureTable {
  std::vector<std::string> columns;
  std::vector<FeatureRow> rows;
};
FeatureTable read_features_csv(const std::string& path);

}  // namespace crossmae::pheno
