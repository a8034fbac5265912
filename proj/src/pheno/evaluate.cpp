#include "crossmae/pheno/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "crossmae/core/csv.hpp"
#include "crossmae/core/errors.hpp"

namespace crossmae::pheno {

namespace {

struct FittedOutcome {
  double metric = 0.0;
  bool converged = true;
  std::string message;
};

FittedOutcome fit_and_score(const EvalConfig& cfg, const HyperParams& hp,
                            const MatX& x_train, const MatX& x_test,
                            const std::vector<FeatureRow>& rows,
                            const std::vector<size_t>& train_rows,
                            const std::vector<size_t>& test_rows, std::uint64_t seed) {
  FittedOutcome out;
  if (cfg.task == Task::yield_regression) {
    const Vec y_train = yield_targets(rows, train_rows);
    const Vec y_test = yield_targets(rows, test_rows);
    auto model = make_regressor(cfg.family, hp, seed);
    const FitStatus st = model->fit(x_train, y_train);
    out.converged = st.converged;
    out.message = st.message;
    out.metric = squared_pearson(model->predict(x_test), y_test);
  } else {
    const std::vector<int> y_train = nitrogen_targets(rows, train_rows);
    const std::vector<int> y_test = nitrogen_targets(rows, test_rows);
    auto model = make_classifier(cfg.family, hp, seed);
    const FitStatus st = model->fit(x_train, y_train, 3);
    out.converged = st.converged;
    out.message = st.message;
    out.metric = accuracy(model->predict(x_test), y_test);
  }
  return out;
}

// Plain deterministic k-fold over the (already grouped-by-outer-fold)
// training rows, used only for hyperparameter selection.
std::vector<std::pair<std::vector<size_t>, std::vector<size_t>>> inner_folds(
    const std::vector<size_t>& train_rows, int k, rng::Stream& rs) {
  std::vector<size_t> shuffled = train_rows;
  for (size_t i = shuffled.size() - 1; i > 0; --i) {
    const size_t j = rs.below(i + 1);
    std::swap(shuffled[i], shuffled[j]);
  }
  const int folds = std::min<int>(k, static_cast<int>(shuffled.size()));
  std::vector<std::pair<std::vector<size_t>, std::vector<size_t>>> out(
      static_cast<size_t>(folds));
  for (size_t i = 0; i < shuffled.size(); ++i) {
    const int f = static_cast<int>(i * static_cast<size_t>(folds) / shuffled.size());
    for (int j = 0; j < folds; ++j) {
      if (j == f)
        out[static_cast<size_t>(j)].second.push_back(shuffled[i]);
      else
        out[static_cast<size_t>(j)].first.push_back(shuffled[i]);
    }
  }
  return out;
}

}  // namespace

EvalCell evaluate_timepoint(const std::vector<FeatureRow>& rows, int timepoint,
                            const EvalConfig& cfg) {
  if (!family_supports(cfg.family, cfg.task))
    throw ConfigError("evaluate: model family '" + family_name(cfg.family) +
                      "' does not apply to task '" + task_name(cfg.task) + "'");

  std::vector<FeatureRow> filtered;
  for (const FeatureRow& r : rows) {
    if (timepoint >= 0 && r.timepoint_id != timepoint) continue;
    if (cfg.task == Task::yield_regression && !r.yield_value) continue;
    filtered.push_back(r);
  }
  if (filtered.size() < 10)
    throw ConfigError("evaluate: fewer than 10 usable rows for timepoint " +
                      std::to_string(timepoint));

  EvalCell cell;
  cell.task = task_name(cfg.task);
  cell.model = family_name(cfg.family);
  cell.modality_set = filtered.front().modality_set;
  cell.timepoint = timepoint;
  cell.n_rows = static_cast<int>(filtered.size());

  const std::vector<CvSplit> splits = build_cv(filtered, cfg.seed, cfg.outer_folds);
  for (size_t fold = 0; fold < splits.size(); ++fold) {
    const CvSplit& split = splits[fold];

    // Standardization fit on the outer-training rows only.
    Standardizer scaler;
    const MatX x_train_raw = design_matrix(filtered, split.train_rows);
    scaler.fit(x_train_raw);

    // Hyperparameter search: candidates scored by inner CV on training rows.
    rng::Stream search_rng = rng::derive(cfg.seed, "search", fold);
    const auto inner = inner_folds(split.train_rows, cfg.inner_folds, search_rng);
    HyperParams best_hp;
    double best_score = -1e300;
    for (int cand = 0; cand < cfg.search_candidates; ++cand) {
      const HyperParams hp = sample_hyperparams(cfg.family, cfg.task, search_rng);
      double score = 0.0;
      int used = 0;
      for (const auto& [itr, ite] : inner) {
        if (itr.empty() || ite.empty()) continue;
        const MatX xi_train = scaler.transform(design_matrix(filtered, itr));
        const MatX xi_test = scaler.transform(design_matrix(filtered, ite));
        const FittedOutcome fo = fit_and_score(
            cfg, hp, xi_train, xi_test, filtered, itr, ite,
            rng::derive_seed(cfg.seed, "fit", fold, static_cast<std::uint64_t>(cand)));
        score += fo.metric;
        ++used;
      }
      if (used == 0) continue;
      score /= used;
      if (score > best_score) {
        best_score = score;
        best_hp = hp;
      }
    }

    const MatX x_train = scaler.transform(x_train_raw);
    const MatX x_test = scaler.transform(design_matrix(filtered, split.test_rows));
    const FittedOutcome fo =
        fit_and_score(cfg, best_hp, x_train, x_test, filtered, split.train_rows,
                      split.test_rows, rng::derive_seed(cfg.seed, "final", fold));
    if (!fo.converged) {
      // Recorded, not fatal: the cell is marked failed and carries the note.
      cell.failed = true;
      cell.failure_note = fo.message;
    }
    cell.fold_metrics.push_back(fo.metric);
    cell.chosen_params = best_hp.describe();
  }

  const double n = static_cast<double>(cell.fold_metrics.size());
  double mean = 0.0;
  for (double v : cell.fold_metrics) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : cell.fold_metrics) var += (v - mean) * (v - mean);
  cell.mean = mean;
  cell.std_dev = std::sqrt(var / n);
  return cell;
}

EvalReport evaluate(const std::vector<FeatureRow>& rows, const EvalConfig& cfg) {
  std::set<int> timepoints;
  for (const FeatureRow& r : rows) timepoints.insert(r.timepoint_id);
  if (timepoints.empty()) throw ConfigError("evaluate: no feature rows");
  EvalReport report;
  for (int tp : timepoints) report.cells.push_back(evaluate_timepoint(rows, tp, cfg));
  return report;
}

void write_eval_csv(const std::string& path, const EvalReport& report) {
  csv::Table t;
  t.header = {"task", "timepoint", "modality_set", "model", "mean", "std",
              "n_rows", "folds", "fold_metrics", "chosen_params", "status"};
  char buf[64];
  for (const EvalCell& c : report.cells) {
    std::vector<std::string> row;
    row.push_back(c.task);
    row.push_back(std::to_string(c.timepoint));
    row.push_back(c.modality_set);
    row.push_back(c.model);
    std::snprintf(buf, sizeof(buf), "%.6g", c.mean);
    row.emplace_back(buf);
    std::snprintf(buf, sizeof(buf), "%.6g", c.std_dev);
    row.emplace_back(buf);
    row.push_back(std::to_string(c.n_rows));
    row.push_back(std::to_string(c.fold_metrics.size()));
    std::string folds;
    for (size_t i = 0; i < c.fold_metrics.size(); ++i) {
      if (i) folds += ";";
      std::snprintf(buf, sizeof(buf), "%.6g", c.fold_metrics[i]);
      folds += buf;
    }
    row.push_back(folds);
    row.push_back(c.chosen_params);
    row.push_back(c.failed ? "failed: " + c.failure_note : "ok");
    t.rows.push_back(std::move(row));
  }
  csv::write_file(path, t);
}

EvalReport read_eval_csv(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  const int c_task = t.require_col("task");
  const int c_tp = t.require_col("timepoint");
  const int c_set = t.require_col("modality_set");
  const int c_model = t.require_col("model");
  const int c_mean = t.require_col("mean");
  const int c_std = t.require_col("std");
  const int c_n = t.require_col("n_rows");
  const int c_folds = t.require_col("fold_metrics");
  const int c_params = t.require_col("chosen_params");
  const int c_status = t.require_col("status");
  EvalReport report;
  for (const auto& row : t.rows) {
    EvalCell c;
    c.task = row[c_task];
    c.timepoint = std::stoi(row[c_tp]);
    c.modality_set = row[c_set];
    c.model = row[c_model];
    c.mean = std::stod(row[c_mean]);
    c.std_dev = std::stod(row[c_std]);
    c.n_rows = std::stoi(row[c_n]);
    std::string metrics = row[c_folds];
    size_t pos = 0;
    while (pos < metrics.size()) {
      const size_t next = metrics.find(';', pos);
      c.fold_metrics.push_back(std::stod(metrics.substr(pos, next - pos)));
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    c.chosen_params = row[c_params];
    c.failed = row[c_status].rfind("failed", 0) == 0;
    report.cells.push_back(std::move(c));
  }
  return report;
}

}  // namespace crossmae::pheno
