#include "crossmae/pheno/cv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "crossmae/core/errors.hpp"
#include "crossmae/core/rng.hpp"

namespace crossmae::pheno {

namespace {

// Canonical within-genotype ordering key, independent of input row order.
std::string row_key(const FeatureRow& r) {
  std::ostringstream ss;
  ss << r.location_id << "|" << r.timepoint_id << "|" << r.plot_id << "|"
     << r.subplot_id << "|" << r.modality_set;
  for (double v : r.values) ss << "|" << v;
  return ss.str();
}

}  // namespace

GroupedData group_by_genotype(const std::vector<FeatureRow>& rows, std::uint64_t seed) {
  std::map<int, std::vector<size_t>> groups;
  for (size_t i = 0; i < rows.size(); ++i) groups[rows[i].genotype_id].push_back(i);
  if (groups.empty()) throw ConfigError("group_by_genotype: no rows");

  int m_min = INT32_MAX;
  for (auto& [g, idx] : groups) {
    if (static_cast<int>(idx.size()) < 2)
      throw ConfigError("group_by_genotype: genotype " + std::to_string(g) +
                        " has fewer than 2 rows");
    m_min = std::min(m_min, static_cast<int>(idx.size()));
  }

  GroupedData out;
  out.replicates = m_min;
  for (auto& [g, idx] : groups) {
    // Sort by content key so fold assembly cannot depend on row order, then
    // seeded-shuffle and truncate to M.
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      return row_key(rows[a]) < row_key(rows[b]);
    });
    rng::Stream rs = rng::derive(seed, "cv-group", static_cast<std::uint64_t>(g));
    for (size_t i = idx.size() - 1; i > 0; --i) {
      const size_t j = rs.below(i + 1);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(static_cast<size_t>(m_min));
    out.genotype_ids.push_back(g);
    out.row_index.push_back(idx);
  }
  return out;
}

std::vector<CvSplit> build_cv(const std::vector<FeatureRow>& rows, std::uint64_t seed,
                              int folds) {
  const GroupedData grouped = group_by_genotype(rows, seed);
  const int m = grouped.replicates;
  const int k = std::min(folds, m);
  if (k < 2) throw ConfigError("build_cv: need at least 2 replicates per genotype");

  // Partition the replicate axis 0..M-1 into k contiguous chunks.
  std::vector<CvSplit> splits(static_cast<size_t>(k));
  for (int rep = 0; rep < m; ++rep) {
    const int fold = rep * k / m;
    for (size_t g = 0; g < grouped.row_index.size(); ++g) {
      const size_t row = grouped.row_index[g][static_cast<size_t>(rep)];
      for (int f = 0; f < k; ++f) {
        if (f == fold)
          splits[static_cast<size_t>(f)].test_rows.push_back(row);
        else
          splits[static_cast<size_t>(f)].train_rows.push_back(row);
      }
    }
  }
  for (auto& s : splits) {
    std::sort(s.train_rows.begin(), s.train_rows.end());
    std::sort(s.test_rows.begin(), s.test_rows.end());
  }
  return splits;
}

void Standardizer::fit(const MatX& train) {
  if (train.rows() == 0) throw ConfigError("standardizer: empty training matrix");
  mean = train.colwise().mean();
  scale.resize(train.cols());
  for (Eigen::Index j = 0; j < train.cols(); ++j) {
    const double var = (train.col(j).array() - mean(j)).square().mean();
    const double sd = std::sqrt(var);
    scale(j) = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
}

MatX Standardizer::transform(const MatX& x) const {
  if (x.cols() != mean.size()) throw InternalError("standardizer: width mismatch");
  MatX out = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    out.col(j) = (out.col(j).array() - mean(j)) * scale(j);
  return out;
}

double squared_pearson(const Vec& pred, const Vec& truth) {
  if (pred.size() != truth.size() || pred.size() == 0)
    throw InternalError("squared_pearson: size mismatch");
  const double mp = pred.mean();
  const double mt = truth.mean();
  const double cov = ((pred.array() - mp) * (truth.array() - mt)).mean();
  const double vp = (pred.array() - mp).square().mean();
  const double vt = (truth.array() - mt).square().mean();
  if (vp <= 1e-300 || vt <= 1e-300) return 0.0;
  const double r = cov / std::sqrt(vp * vt);
  return r * r;
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw InternalError("accuracy: size mismatch");
  size_t hits = 0;
  for (size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

MatX design_matrix(const std::vector<FeatureRow>& rows, const std::vector<size_t>& which) {
  if (which.empty()) throw InternalError("design_matrix: empty selection");
  MatX x(static_cast<Eigen::Index>(which.size()),
         static_cast<Eigen::Index>(rows[which[0]].values.size()));
  for (size_t i = 0; i < which.size(); ++i)
    for (size_t j = 0; j < rows[which[i]].values.size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[which[i]].values[j];
  return x;
}

Vec yield_targets(const std::vector<FeatureRow>& rows, const std::vector<size_t>& which) {
  Vec y(static_cast<Eigen::Index>(which.size()));
  for (size_t i = 0; i < which.size(); ++i) {
    if (!rows[which[i]].yield_value)
      throw InputError("yield_targets: row with missing yield reached a downstream task");
    y(static_cast<Eigen::Index>(i)) = *rows[which[i]].yield_value;
  }
  return y;
}

std::vector<int> nitrogen_targets(const std::vector<FeatureRow>& rows,
                                  const std::vector<size_t>& which) {
  std::vector<int> y(which.size());
  for (size_t i = 0; i < which.size(); ++i)
    y[i] = static_cast<int>(rows[which[i]].nitrogen);
  return y;
}

}  // namespace crossmae::pheno
