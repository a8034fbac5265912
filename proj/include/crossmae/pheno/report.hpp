#pragma once

#include <string>
#include <vector>

#include "crossmae/core/image.hpp"
#include "crossmae/pheno/evaluate.hpp"

namespace crossmae::pheno {

// Merges evaluation cells into the two comparison tables:
//  - modality_comparison.csv: rows (task, timepoint), one mean/std column
//    pair per single-source modality set (sat_rgb / uav_rgb / pred_uav_rgb).
//  - augmentation_comparison.csv: same layout for sat_rgbnir vs
//    sat_rgbnir_pred_uav.
// plus a grouped bar chart of mean metric per (model, modality set).
struct ReportOutputs {
  std::string modality_table_path;
  std::string augmentation_table_path;
  std::string chart_path;
};

ReportOutputs write_report(const std::string& out_dir,
                           const std::vector<EvalCell>& cells);

// Bar chart raster used by the report; exposed for tests.
img::Image render_bar_chart(const std::vector<std::string>& labels,
                            const std::vector<double>& values,
                            const std::vector<double>& errors);

}  // namespace crossmae::pheno
