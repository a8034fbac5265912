#include "crossmae/pheno/features.hpp"

#include <algorithm>
#include <cmath>

#include "crossmae/core/csv.hpp"
#include "crossmae/core/errors.hpp"

namespace crossmae::pheno {

ModalitySet modality_set_from_name(const std::string& s) {
  if (s == "sat_rgb") return ModalitySet::sat_rgb;
  if (s == "uav_rgb") return ModalitySet::uav_rgb;
  if (s == "pred_uav_rgb") return ModalitySet::pred_uav_rgb;
  if (s == "sat_rgbnir") return ModalitySet::sat_rgbnir;
  if (s == "sat_rgbnir_pred_uav") return ModalitySet::sat_rgbnir_pred_uav;
  throw InputError("unknown modality set '" + s + "'");
}

std::string modality_set_name(ModalitySet m) {
  switch (m) {
    case ModalitySet::sat_rgb: return "sat_rgb";
    case ModalitySet::uav_rgb: return "uav_rgb";
    case ModalitySet::pred_uav_rgb: return "pred_uav_rgb";
    case ModalitySet::sat_rgbnir: return "sat_rgbnir";
    case ModalitySet::sat_rgbnir_pred_uav: return "sat_rgbnir_pred_uav";
  }
  throw InternalError("modality_set_name: bad enum");
}

SummaryStats summarize(const img::Image& plane) {
  if (plane.empty()) throw InputError("summarize: empty image");
  SummaryStats s;
  s.min = plane.data[0];
  s.max = plane.data[0];
  double sum = 0.0;
  for (double v : plane.data) {
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    sum += v;
  }
  const double n = static_cast<double>(plane.data.size());
  s.mean = sum / n;
  if (s.min == s.max) {  // constant plane: exact stats, no accumulation residue
    s.mean = s.min;
    s.std_dev = 0.0;
    return s;
  }
  double acc = 0.0;
  for (double v : plane.data) {
    const double d = v - s.mean;
    acc += d * d;
  }
  s.std_dev = std::sqrt(acc / n);
  return s;
}

namespace {

struct Source {
  std::string prefix;     // "sat", "uav", "pred_uav"
  bool with_nir = false;  // adds the nir band and NIR indices
};

std::vector<Source> sources_for(ModalitySet set) {
  switch (set) {
    case ModalitySet::sat_rgb: return {{"sat", false}};
    case ModalitySet::uav_rgb: return {{"uav", false}};
    case ModalitySet::pred_uav_rgb: return {{"pred_uav", false}};
    case ModalitySet::sat_rgbnir: return {{"sat", true}};
    case ModalitySet::sat_rgbnir_pred_uav: return {{"sat", true}, {"pred_uav", false}};
  }
  throw InternalError("sources_for: bad enum");
}

const char* kStats[4] = {"min", "mean", "max", "std"};

std::vector<std::string> source_feature_names(const Source& src) {
  std::vector<std::string> names;
  std::vector<std::string> bands = {"red", "green", "blue"};
  if (src.with_nir) bands.push_back("nir");
  for (const auto& b : bands) names.push_back(b);
  for (Index ix : all_indices()) {
    if (index_requires_nir(ix) && !src.with_nir) continue;
    names.push_back(index_name(ix));
  }
  std::vector<std::string> out;
  for (const auto& n : names)
    for (const char* st : kStats) out.push_back(src.prefix + "_" + n + "_" + st);
  return out;
}

void append_source_features(const Source& src, const img::Image& rgb,
                            const img::Image* nir, std::vector<double>& out) {
  if (rgb.empty()) throw InputError("extract_features: empty image");
  std::vector<img::Image> planes;
  for (int ch = 0; ch < 3; ++ch) planes.push_back(img::take_channels(rgb, ch, 1));
  if (src.with_nir) {
    if (nir == nullptr)
      throw InputError("extract_features: modality set requires the NIR band, "
                       "which is not available for this pair");
    planes.push_back(*nir);
  }
  BandSet bands{&rgb, src.with_nir ? nir : nullptr};
  for (Index ix : all_indices()) {
    if (index_requires_nir(ix) && !src.with_nir) continue;
    planes.push_back(compute_index(bands, ix));
  }
  for (const img::Image& plane : planes) {
    const SummaryStats s = summarize(plane);
    out.push_back(s.min);
    out.push_back(s.mean);
    out.push_back(s.max);
    out.push_back(s.std_dev);
  }
}

}  // namespace

std::vector<std::string> feature_columns(ModalitySet set) {
  std::vector<std::string> out;
  for (const Source& src : sources_for(set)) {
    const auto names = source_feature_names(src);
    out.insert(out.end(), names.begin(), names.end());
  }
  return out;
}

FeatureRow extract_features(const datagen::PlotPair& pair, ModalitySet set,
                            const img::Image* pred_uav) {
  FeatureRow row;
  row.modality_set = modality_set_name(set);
  row.location_id = pair.location_id;
  row.timepoint_id = pair.timepoint_id;
  row.plot_id = pair.record_id;
  row.subplot_id = pair.subplot_id;
  row.genotype_id = pair.genotype_id;
  row.nitrogen = pair.nitrogen;
  row.yield_value = pair.yield_value;

  for (const Source& src : sources_for(set)) {
    if (src.prefix == "sat") {
      const img::Image* nir = pair.sat_nir ? &*pair.sat_nir : nullptr;
      append_source_features(src, pair.sat_image, nir, row.values);
    } else if (src.prefix == "uav") {
      append_source_features(src, pair.uav_image, nullptr, row.values);
    } else {
      if (pred_uav == nullptr)
        throw InputError("extract_features: predicted-UAV image missing for record " +
                         std::to_string(pair.record_id) + " subplot " +
                         std::to_string(pair.subplot_id));
      append_source_features(src, *pred_uav, nullptr, row.values);
    }
  }
  return row;
}

std::vector<FeatureRow> extract_all(const std::vector<datagen::PlotPair>& pairs,
                                    ModalitySet set, const PredictionLookup* preds) {
  std::vector<FeatureRow> rows;
  rows.reserve(pairs.size());
  for (const auto& pair : pairs) {
    const img::Image* pred = nullptr;
    if (preds) {
      auto it = preds->find({pair.record_id, pair.subplot_id});
      if (it != preds->end()) pred = &it->second;
    }
    rows.push_back(extract_features(pair, set, pred));
  }
  return rows;
}

std::vector<FeatureRow> aggregate_plot_mean(const std::vector<FeatureRow>& rows) {
  std::map<int, FeatureRow> by_plot;
  std::map<int, int> counts;
  for (const FeatureRow& r : rows) {
    auto it = by_plot.find(r.plot_id);
    if (it == by_plot.end()) {
      FeatureRow agg = r;
      agg.subplot_id = -1;
      by_plot.emplace(r.plot_id, std::move(agg));
      counts[r.plot_id] = 1;
    } else {
      if (it->second.values.size() != r.values.size())
        throw InternalError("aggregate_plot_mean: ragged feature rows");
      for (size_t i = 0; i < r.values.size(); ++i) it->second.values[i] += r.values[i];
      counts[r.plot_id] += 1;
    }
  }
  std::vector<FeatureRow> out;
  for (auto& [plot, row] : by_plot) {
    const double inv = 1.0 / counts[plot];
    for (double& v : row.values) v *= inv;
    out.push_back(std::move(row));
  }
  return out;
}

namespace {
const std::vector<std::string> kMetaColumns = {
    "modality_set", "location_id", "timepoint_id", "plot_id",
    "subplot_id",   "genotype_id", "nitrogen_level", "yield_value"};
}

void write_features_csv(const std::string& path, const std::vector<FeatureRow>& rows,
                        ModalitySet set) {
  csv::Table t;
  t.header = feature_columns(set);
  t.header.insert(t.header.end(), kMetaColumns.begin(), kMetaColumns.end());
  char buf[40];
  for (const FeatureRow& r : rows) {
    if (r.values.size() + kMetaColumns.size() != t.header.size())
      throw InternalError("write_features_csv: row width mismatch");
    std::vector<std::string> cells;
    for (double v : r.values) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      cells.emplace_back(buf);
    }
    cells.push_back(r.modality_set);
    cells.push_back(std::to_string(r.location_id));
    cells.push_back(std::to_string(r.timepoint_id));
    cells.push_back(std::to_string(r.plot_id));
    cells.push_back(std::to_string(r.subplot_id));
    cells.push_back(std::to_string(r.genotype_id));
    cells.push_back(datagen::nitrogen_name(r.nitrogen));
    if (r.yield_value) {
      std::snprintf(buf, sizeof(buf), "%.17g", *r.yield_value);
      cells.emplace_back(buf);
    } else {
      cells.emplace_back("missing");
    }
    t.rows.push_back(std::move(cells));
  }
  csv::write_file(path, t);
}

FeatureTable read_features_csv(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  FeatureTable out;
  // Feature columns are everything before the metadata block.
  size_t meta_start = t.header.size();
  for (size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i] == kMetaColumns.front()) {
      meta_start = i;
      break;
    }
  if (meta_start + kMetaColumns.size() != t.header.size())
    throw InputError("read_features_csv: unexpected metadata layout in " + path);
  out.columns.assign(t.header.begin(), t.header.begin() + static_cast<long>(meta_start));

  const int c_set = t.require_col("modality_set");
  const int c_loc = t.require_col("location_id");
  const int c_tp = t.require_col("timepoint_id");
  const int c_plot = t.require_col("plot_id");
  const int c_sub = t.require_col("subplot_id");
  const int c_gen = t.require_col("genotype_id");
  const int c_nit = t.require_col("nitrogen_level");
  const int c_yld = t.require_col("yield_value");

  for (const auto& row : t.rows) {
    FeatureRow r;
    r.values.reserve(meta_start);
    for (size_t i = 0; i < meta_start; ++i) r.values.push_back(std::stod(row[i]));
    r.modality_set = row[c_set];
    r.location_id = std::stoi(row[c_loc]);
    r.timepoint_id = std::stoi(row[c_tp]);
    r.plot_id = std::stoi(row[c_plot]);
    r.subplot_id = std::stoi(row[c_sub]);
    r.genotype_id = std::stoi(row[c_gen]);
    r.nitrogen = datagen::nitrogen_from_name(row[c_nit]);
    if (row[c_yld] != "missing") r.yield_value = std::stod(row[c_yld]);
    out.rows.push_back(std::move(r));
  }
  return out;
}

}  // namespace crossmae::pheno
