#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "crossmae/core/rng.hpp"

namespace crossmae::pheno {

using Vec = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

enum class ModelFamily { pls, svm, lasso, logistic, gboost, xgboost };
enum class Task { yield_regression, nitrogen_classification };

ModelFamily family_from_name(const std::string& s);
std::string family_name(ModelFamily f);
Task task_from_name(const std::string& s);
std::string task_name(Task t);
bool family_supports(ModelFamily f, Task t);

struct HyperParams {
  std::map<std::string, double> values;

  double get(const std::string& k, double fallback) const;
  std::string describe() const;
};

// Draws one hyperparameter candidate from the family's documented search
// space (integer parameters uniform over integers, reals uniform over the
// listed interval).
HyperParams sample_hyperparams(ModelFamily f, Task t, rng::Stream& rs);

struct FitStatus {
  bool converged = true;
  std::string message;
};

class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual FitStatus fit(const MatX& x, const Vec& y) = 0;
  virtual Vec predict(const MatX& x) const = 0;
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual FitStatus fit(const MatX& x, const std::vector<int>& y, int n_classes) = 0;
  virtual std::vector<int> predict(const MatX& x) const = 0;
};

std::unique_ptr<Regressor> make_regressor(ModelFamily f, const HyperParams& hp,
                                          std::uint64_t seed);
std::unique_ptr<Classifier> make_classifier(ModelFamily f, const HyperParams& hp,
                                            std::uint64_t seed);

}  // namespace crossmae::pheno
