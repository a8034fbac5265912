#include "crossmae/pheno/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "crossmae/core/csv.hpp"
#include "crossmae/core/errors.hpp"
#include "crossmae/core/netpbm.hpp"

namespace crossmae::pheno {

namespace {

void write_comparison_table(const std::string& path,
                            const std::vector<EvalCell>& cells,
                            const std::vector<std::string>& sets) {
  std::set<std::pair<std::string, int>> keys;
  for (const EvalCell& c : cells)
    if (std::find(sets.begin(), sets.end(), c.modality_set) != sets.end())
      keys.insert({c.task, c.timepoint});

  csv::Table t;
  t.header = {"task", "timepoint"};
  for (const std::string& s : sets) {
    t.header.push_back(s + "_mean");
    t.header.push_back(s + "_std");
  }
  char buf[32];
  for (const auto& [task, tp] : keys) {
    std::vector<std::string> row = {task, std::to_string(tp)};
    for (const std::string& s : sets) {
      std::string mean_cell, std_cell;
      for (const EvalCell& c : cells) {
        if (c.task == task && c.timepoint == tp && c.modality_set == s) {
          std::snprintf(buf, sizeof(buf), "%.4f", c.mean);
          mean_cell = buf;
          std::snprintf(buf, sizeof(buf), "%.4f", c.std_dev);
          std_cell = buf;
        }
      }
      row.push_back(mean_cell);
      row.push_back(std_cell);
    }
    t.rows.push_back(std::move(row));
  }
  csv::write_file(path, t);
}

// 5x7 digit/letter glyphs sufficient for short axis labels.
void draw_text(img::Image& im, int x0, int y0, const std::string& text) {
  static const std::map<char, std::array<unsigned char, 7>> glyphs = {
      {'0', {0x1e, 0x21, 0x21, 0x21, 0x21, 0x21, 0x1e}},
      {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
      {'2', {0x1e, 0x21, 0x01, 0x0e, 0x10, 0x20, 0x3f}},
      {'3', {0x1e, 0x21, 0x01, 0x0e, 0x01, 0x21, 0x1e}},
      {'4', {0x02, 0x06, 0x0a, 0x12, 0x3f, 0x02, 0x02}},
      {'5', {0x3f, 0x20, 0x3e, 0x01, 0x01, 0x21, 0x1e}},
      {'6', {0x1e, 0x20, 0x3e, 0x21, 0x21, 0x21, 0x1e}},
      {'7', {0x3f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x1e, 0x21, 0x21, 0x1e, 0x21, 0x21, 0x1e}},
      {'9', {0x1e, 0x21, 0x21, 0x1f, 0x01, 0x01, 0x1e}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
  };
  int x = x0;
  for (char ch : text) {
    auto it = glyphs.find(ch);
    if (it != glyphs.end()) {
      for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 6; ++c)
          if (it->second[static_cast<size_t>(r)] & (1 << (5 - c))) {
            const int yy = y0 + r, xx = x + c;
            if (yy >= 0 && yy < im.h && xx >= 0 && xx < im.w)
              for (int k = 0; k < 3; ++k) im.at(yy, xx, k) = 0.1;
          }
    }
    x += 7;
  }
}

}  // namespace

img::Image render_bar_chart(const std::vector<std::string>& labels,
                            const std::vector<double>& values,
                            const std::vector<double>& errors) {
  if (labels.size() != values.size() || values.size() != errors.size() || values.empty())
    throw InputError("bar chart: mismatched or empty inputs");
  const int n = static_cast<int>(values.size());
  const int bar_w = 36, gap = 18, margin = 40;
  const int w = margin * 2 + n * bar_w + (n - 1) * gap;
  const int h = 300;
  img::Image chart(h, w, 3, 1.0);

  double vmax = 0.0;
  for (size_t i = 0; i < values.size(); ++i)
    vmax = std::max(vmax, values[i] + errors[i]);
  if (vmax <= 0.0) vmax = 1.0;
  vmax *= 1.1;

  const int plot_h = h - 2 * margin;
  auto y_of = [&](double v) { return h - margin - static_cast<int>(plot_h * v / vmax); };

  // Axes.
  for (int y = margin; y <= h - margin; ++y)
    for (int k = 0; k < 3; ++k) chart.at(y, margin - 2, k) = 0.2;
  for (int x = margin - 2; x < w - margin / 2; ++x)
    for (int k = 0; k < 3; ++k) chart.at(h - margin, x, k) = 0.2;

  const double palette[6][3] = {{0.23, 0.49, 0.72}, {0.89, 0.47, 0.21},
                                {0.30, 0.65, 0.32}, {0.79, 0.25, 0.28},
                                {0.55, 0.41, 0.67}, {0.45, 0.45, 0.45}};
  for (int i = 0; i < n; ++i) {
    const int x0 = margin + i * (bar_w + gap);
    const int top = std::clamp(y_of(values[static_cast<size_t>(i)]), 0, h - margin);
    const double* col = palette[i % 6];
    for (int y = top; y < h - margin; ++y)
      for (int x = x0; x < x0 + bar_w; ++x)
        for (int k = 0; k < 3; ++k) chart.at(y, x, k) = col[k];
    // Error whisker.
    const int lo = std::clamp(
        y_of(values[static_cast<size_t>(i)] - errors[static_cast<size_t>(i)]), 0, h - 1);
    const int hi = std::clamp(
        y_of(values[static_cast<size_t>(i)] + errors[static_cast<size_t>(i)]), 0, h - 1);
    for (int y = hi; y <= lo; ++y)
      for (int k = 0; k < 3; ++k) chart.at(y, x0 + bar_w / 2, k) = 0.05;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", values[static_cast<size_t>(i)]);
    draw_text(chart, x0, std::max(0, top - 10), buf);
    draw_text(chart, x0, h - margin + 6, std::to_string(i));
  }
  return chart;
}

ReportOutputs write_report(const std::string& out_dir, const std::vector<EvalCell>& cells) {
  if (cells.empty()) throw InputError("report: no evaluation cells");
  std::filesystem::create_directories(out_dir);
  ReportOutputs out;
  out.modality_table_path = out_dir + "/modality_comparison.csv";
  out.augmentation_table_path = out_dir + "/augmentation_comparison.csv";
  out.chart_path = out_dir + "/model_comparison.ppm";

  write_comparison_table(out.modality_table_path, cells,
                         {"sat_rgb", "uav_rgb", "pred_uav_rgb"});
  write_comparison_table(out.augmentation_table_path, cells,
                         {"sat_rgbnir", "sat_rgbnir_pred_uav"});

  // Bars: mean metric per (model, modality set) across timepoints, a
  // chart-level analogue of the model-comparison figure. A legend CSV maps
  // bar indices to their labels.
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> agg;
  for (const EvalCell& c : cells) {
    auto& slot = agg[{c.model, c.modality_set}];
    slot.first += c.mean;
    slot.second += 1;
  }
  std::vector<std::string> labels;
  std::vector<double> values, errors;
  csv::Table legend;
  legend.header = {"bar", "model", "modality_set", "mean"};
  int idx = 0;
  char buf[32];
  for (const auto& [key, acc] : agg) {
    const double mean = acc.first / acc.second;
    labels.push_back(key.first + "/" + key.second);
    values.push_back(mean);
    // Spread of per-timepoint means around the aggregate.
    double var = 0.0;
    int n = 0;
    for (const EvalCell& c : cells)
      if (c.model == key.first && c.modality_set == key.second) {
        var += (c.mean - mean) * (c.mean - mean);
        ++n;
      }
    errors.push_back(n > 1 ? std::sqrt(var / n) : 0.0);
    std::snprintf(buf, sizeof(buf), "%.4f", mean);
    legend.rows.push_back({std::to_string(idx++), key.first, key.second, buf});
  }
  img::write_raster(out.chart_path, render_bar_chart(labels, values, errors), 8);
  csv::write_file(out_dir + "/model_comparison_legend.csv", legend);
  return out;
}

}  // namespace crossmae::pheno
