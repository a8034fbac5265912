#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "crossmae/pheno/features.hpp"

namespace crossmae::pheno {

using Vec = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// The N x F feature rows reorganized as M x G x F: each genotype contributes
// exactly M rows (replicates). Genotypes with more rows are truncated to
// M = min count with a seeded, order-independent choice of which to keep.
struct GroupedData {
  std::vector<int> genotype_ids;              // size G
  std::vector<std::vector<size_t>> row_index; // [G][M] -> index into the row list
  int replicates = 0;                          // M
};

GroupedData group_by_genotype(const std::vector<FeatureRow>& rows, std::uint64_t seed);

// One cross-validation fold over the replicate axis.
struct CvSplit {
  std::vector<size_t> train_rows;
  std::vector<size_t> test_rows;
};

// k = min(5, M) folds partitioning the replicate axis; every genotype keeps
// presence in the training side of every fold. Deterministic given seed and
// independent of input row order.
std::vector<CvSplit> build_cv(const std::vector<FeatureRow>& rows, std::uint64_t seed,
                              int folds = 5);

// Column-wise standardizer fit on training rows only.
struct Standardizer {
  Vec mean;
  Vec scale;  // 1/std, with zero-variance columns mapped to scale 1

  void fit(const MatX& train);
  MatX transform(const MatX& x) const;
};

// Squared Pearson correlation between predictions and truth. Zero when either
// side is constant.
double squared_pearson(const Vec& pred, const Vec& truth);

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

// Dense design matrix / target extraction from feature rows.
MatX design_matrix(const std::vector<FeatureRow>& rows, const std::vector<size_t>& which);
Vec yield_targets(const std::vector<FeatureRow>& rows, const std::vector<size_t>& which);
std::vector<int> nitrogen_targets(const std::vector<FeatureRow>& rows,
                                  const std::vector<size_t>& which);

}  // namespace crossmae::pheno
