#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crossmae/pheno/cv.hpp"
#include "crossmae/pheno/models.hpp"

namespace crossmae::pheno {

struct EvalConfig {
  Task task = Task::yield_regression;
  ModelFamily family = ModelFamily::xgboost;
  int outer_folds = 5;
  int inner_folds = 3;
  int search_candidates = 25;
  std::uint64_t seed = 0;
};

// One table cell: metric distribution over the outer folds for a
// (task, timepoint, modality set, model) combination.
struct EvalCell {
  std::string task;
  std::string modality_set;
  std::string model;
  int timepoint = -1;
  std::vector<double> fold_metrics;
  double mean = 0.0;
  double std_dev = 0.0;
  int n_rows = 0;
  std::string chosen_params;  // of the last outer fold
  bool failed = false;        // model did not converge on some fold
  std::string failure_note;
};

struct EvalReport {
  std::vector<EvalCell> cells;
};

// Runs the full protocol on one feature table: rows are filtered per
// timepoint (and to rows with yield for the regression task), grouped
// genotype folds are built, features are standardized per outer-training
// fold, and each fold picks hyperparameters by randomized search with inner
// cross-validation on the training side only.
EvalReport evaluate(const std::vector<FeatureRow>& rows, const EvalConfig& cfg);

// Single-timepoint core, exposed for tests.
EvalCell evaluate_timepoint(const std::vector<FeatureRow>& rows, int timepoint,
                            const EvalConfig& cfg);

void write_eval_csv(const std::string& path, const EvalReport& report);
EvalReport read_eval_csv(const std::string& path);

}  // namespace crossmae::pheno
