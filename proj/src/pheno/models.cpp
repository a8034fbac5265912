#include "crossmae/pheno/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "crossmae/core/errors.hpp"

namespace crossmae::pheno {

ModelFamily family_from_name(const std::string& s) {
  if (s == "pls") return ModelFamily::pls;
  if (s == "svm") return ModelFamily::svm;
  if (s == "lasso") return ModelFamily::lasso;
  if (s == "logistic") return ModelFamily::logistic;
  if (s == "gboost") return ModelFamily::gboost;
  if (s == "xgboost-style" || s == "xgboost") return ModelFamily::xgboost;
  throw InputError("unknown model family '" + s + "'");
}

std::string family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::pls: return "pls";
    case ModelFamily::svm: return "svm";
    case ModelFamily::lasso: return "lasso";
    case ModelFamily::logistic: return "logistic";
    case ModelFamily::gboost: return "gboost";
    case ModelFamily::xgboost: return "xgboost-style";
  }
  throw InternalError("family_name: bad enum");
}

Task task_from_name(const std::string& s) {
  if (s == "yield") return Task::yield_regression;
  if (s == "nitrogen") return Task::nitrogen_classification;
  throw InputError("unknown task '" + s + "' (expected yield|nitrogen)");
}

std::string task_name(Task t) {
  return t == Task::yield_regression ? "yield" : "nitrogen";
}

bool family_supports(ModelFamily f, Task t) {
  if (t == Task::yield_regression)
    return f == ModelFamily::pls || f == ModelFamily::svm || f == ModelFamily::lasso ||
           f == ModelFamily::gboost || f == ModelFamily::xgboost;
  return f == ModelFamily::logistic || f == ModelFamily::svm ||
         f == ModelFamily::gboost || f == ModelFamily::xgboost;
}

double HyperParams::get(const std::string& k, double fallback) const {
  auto it = values.find(k);
  return it == values.end() ? fallback : it->second;
}

std::string HyperParams::describe() const {
  std::ostringstream ss;
  bool first = true;
  for (const auto& [k, v] : values) {
    if (!first) ss << " ";
    first = false;
    ss << k << "=" << v;
  }
  return ss.str();
}

HyperParams sample_hyperparams(ModelFamily f, Task t, rng::Stream& rs) {
  auto unif = [&](double lo, double hi) { return lo + (hi - lo) * rs.uniform(); };
  auto unif_int = [&](int lo, int hi) {
    return static_cast<double>(lo + static_cast<int>(rs.below(
                                        static_cast<std::uint64_t>(hi - lo + 1))));
  };
  HyperParams hp;
  switch (f) {
    case ModelFamily::pls:
      hp.values["n_components"] = unif_int(1, 10);
      break;
    case ModelFamily::svm:
      hp.values["C"] = unif(0.1, 10.0);
      hp.values["gamma_scale"] = unif_int(0, 1);  // 1: "scale", 0: "auto"
      if (t == Task::nitrogen_classification)
        hp.values["kernel_rbf"] = unif_int(0, 1);  // 1: rbf, 0: linear
      else
        hp.values["kernel_rbf"] = 1.0;
      break;
    case ModelFamily::lasso:
      hp.values["alpha"] = unif(1e-4, 1.0);
      break;
    case ModelFamily::logistic:
      hp.values["C"] = unif(0.01, 10.0);
      break;
    case ModelFamily::gboost:
      hp.values["n_estimators"] = unif_int(50, 200);
      hp.values["learning_rate"] = unif(0.01, 0.3);
      hp.values["max_depth"] = unif_int(3, 10);
      break;
    case ModelFamily::xgboost:
      hp.values["n_estimators"] = unif_int(50, 300);
      hp.values["learning_rate"] = unif(0.01, 0.3);
      hp.values["max_depth"] = unif_int(3, 12);
      hp.values["subsample"] = unif(0.5, 1.0);
      hp.values["colsample_bytree"] = unif(0.5, 1.0);
      break;
  }
  return hp;
}

// ---------------------------------------------------------------------------
// Partial least squares (NIPALS, single response)
// ---------------------------------------------------------------------------

namespace {

class PlsRegressor final : public Regressor {
 public:
  explicit PlsRegressor(int components) : components_(components) {}

  FitStatus fit(const MatX& x, const Vec& y) override {
    x_mean_ = x.colwise().mean();
    y_mean_ = y.mean();
    MatX xr = x.rowwise() - x_mean_.transpose();
    Vec yr = y.array() - y_mean_;
    const int k_max = std::min<int>(
        components_, static_cast<int>(std::min(x.cols(), x.rows() - 1)));
    w_.clear();
    p_.clear();
    q_.clear();
    for (int k = 0; k < std::max(1, k_max); ++k) {
      Vec w = xr.transpose() * yr;
      const double wn = w.norm();
      if (wn < 1e-12) break;
      w /= wn;
      Vec t = xr * w;
      const double tt = t.squaredNorm();
      if (tt < 1e-12) break;
      Vec p = xr.transpose() * t / tt;
      const double q = yr.dot(t) / tt;
      xr -= t * p.transpose();
      yr -= q * t;
      w_.push_back(w);
      p_.push_back(p);
      q_.push_back(q);
    }
    return {};
  }

  Vec predict(const MatX& x) const override {
    Vec out = Vec::Constant(x.rows(), y_mean_);
    MatX xr = x.rowwise() - x_mean_.transpose();
    for (size_t k = 0; k < w_.size(); ++k) {
      Vec t = xr * w_[k];
      out += q_[k] * t;
      xr -= t * p_[k].transpose();
    }
    return out;
  }

 private:
  int components_;
  Vec x_mean_;
  double y_mean_ = 0.0;
  std::vector<Vec> w_, p_;
  std::vector<double> q_;
};

// ---------------------------------------------------------------------------
// Lasso (cyclic coordinate descent on 1/(2n)||y - Xw||^2 + alpha ||w||_1)
// ---------------------------------------------------------------------------

class LassoRegressor final : public Regressor {
 public:
  LassoRegressor(double alpha, int max_iter = 2000, double tol = 1e-7)
      : alpha_(alpha), max_iter_(max_iter), tol_(tol) {}

  FitStatus fit(const MatX& x, const Vec& y) override {
    const Eigen::Index n = x.rows(), f = x.cols();
    x_mean_ = x.colwise().mean();
    y_mean_ = y.mean();
    const MatX xc = x.rowwise() - x_mean_.transpose();
    const Vec yc = y.array() - y_mean_;
    w_ = Vec::Zero(f);
    Vec col_sq(f);
    for (Eigen::Index j = 0; j < f; ++j)
      col_sq(j) = xc.col(j).squaredNorm() / static_cast<double>(n);
    Vec resid = yc;
    FitStatus status;
    status.converged = false;
    for (int it = 0; it < max_iter_; ++it) {
      double max_delta = 0.0;
      for (Eigen::Index j = 0; j < f; ++j) {
        if (col_sq(j) < 1e-12) continue;
        const double wj = w_(j);
        const double rho = xc.col(j).dot(resid) / static_cast<double>(n) + col_sq(j) * wj;
        const double soft = std::max(0.0, std::abs(rho) - alpha_);
        const double nw = soft > 0.0 ? std::copysign(soft, rho) / col_sq(j) : 0.0;
        if (nw != wj) {
          resid -= (nw - wj) * xc.col(j);
          w_(j) = nw;
          max_delta = std::max(max_delta, std::abs(nw - wj));
        }
      }
      if (max_delta < tol_) {
        status.converged = true;
        break;
      }
    }
    if (!status.converged) status.message = "lasso: coordinate descent hit max_iter";
    return status;
  }

  Vec predict(const MatX& x) const override {
    return ((x.rowwise() - x_mean_.transpose()) * w_).array() + y_mean_;
  }

 private:
  double alpha_;
  int max_iter_;
  double tol_;
  Vec x_mean_;
  double y_mean_ = 0.0;
  Vec w_;
};

// ---------------------------------------------------------------------------
// Kernel machines. The intercept is absorbed by augmenting the kernel with a
// constant (+1), which removes the dual equality constraint and leaves a
// box-constrained problem solvable by exact coordinate ascent.
// ---------------------------------------------------------------------------

struct KernelSpec {
  bool rbf = true;
  double gamma = 1.0;
};

double kernel_eval(const KernelSpec& ks, const Vec& a, const Vec& b) {
  if (ks.rbf) return std::exp(-ks.gamma * (a - b).squaredNorm()) + 1.0;
  return a.dot(b) + 1.0;
}

MatX kernel_matrix(const KernelSpec& ks, const MatX& x) {
  const Eigen::Index n = x.rows();
  MatX k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = kernel_eval(ks, x.row(i), x.row(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  return k;
}

// gamma per the two standard data-dependent width heuristics:
// "scale" -> 1 / (F * var(X)), "auto" -> 1 / F.
double resolve_gamma(bool scale_mode, const MatX& x) {
  const double f = static_cast<double>(x.cols());
  if (!scale_mode) return 1.0 / f;
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  return var > 1e-12 ? 1.0 / (f * var) : 1.0 / f;
}

class SvrRegressor final : public Regressor {
 public:
  SvrRegressor(double c, bool gamma_scale, bool rbf, double epsilon = 0.1,
               int max_epochs = 1500, double tol = 1e-3)
      : c_(c), gamma_scale_(gamma_scale), rbf_(rbf), epsilon_(epsilon),
        max_epochs_(max_epochs), tol_(tol) {}

  FitStatus fit(const MatX& x, const Vec& y) override {
    x_ = x;
    ks_.rbf = rbf_;
    ks_.gamma = resolve_gamma(gamma_scale_, x);
    const MatX k = kernel_matrix(ks_, x);
    const Eigen::Index n = x.rows();
    beta_ = Vec::Zero(n);
    Vec s = Vec::Zero(n);  // s = K beta
    FitStatus status;
    status.converged = false;
    // Near-duplicate rows make K singular, so coordinates can drift along the
    // null space indefinitely; convergence is judged on the dual objective,
    // not the step size.
    auto objective = [&]() {
      return y.dot(beta_) - epsilon_ * beta_.cwiseAbs().sum() - 0.5 * beta_.dot(s);
    };
    double prev_obj = objective();
    for (int epoch = 0; epoch < max_epochs_; ++epoch) {
      double max_step = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double kii = k(i, i);
        if (kii < 1e-12) continue;
        const double u = y(i) - (s(i) - k(i, i) * beta_(i));
        const double soft = std::max(0.0, std::abs(u) - epsilon_);
        double nb = soft > 0.0 ? std::copysign(soft, u) / kii : 0.0;
        nb = std::clamp(nb, -c_, c_);
        const double delta = nb - beta_(i);
        if (delta != 0.0) {
          s += delta * k.col(i);
          beta_(i) = nb;
          max_step = std::max(max_step, std::abs(delta));
        }
      }
      // Stop when coordinate steps are negligible at the box scale C, or when
      // the dual objective has flattened (rank-deficient kernels crawl along
      // a null-space valley without ever zeroing the steps).
      const double obj = objective();
      if (max_step <= tol_ * c_ ||
          obj - prev_obj <= 1e-8 * std::max(1.0, std::abs(obj))) {
        status.converged = true;
        break;
      }
      prev_obj = obj;
    }
    if (!status.converged) status.message = "svr: coordinate ascent hit max_epochs";
    return status;
  }

  Vec predict(const MatX& x) const override {
    Vec out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < x_.rows(); ++j)
        acc += beta_(j) * kernel_eval(ks_, x_.row(j), x.row(i));
      out(i) = acc;
    }
    return out;
  }

 private:
  double c_;
  bool gamma_scale_;
  bool rbf_;
  double epsilon_;
  int max_epochs_;
  double tol_;
  MatX x_;
  KernelSpec ks_;
  Vec beta_;
};

class SvcClassifier final : public Classifier {
 public:
  SvcClassifier(double c, bool gamma_scale, bool rbf, int max_epochs = 1500,
                double tol = 1e-3)
      : c_(c), gamma_scale_(gamma_scale), rbf_(rbf), max_epochs_(max_epochs), tol_(tol) {}

  FitStatus fit(const MatX& x, const std::vector<int>& y, int n_classes) override {
    x_ = x;
    n_classes_ = n_classes;
    ks_.rbf = rbf_;
    ks_.gamma = resolve_gamma(gamma_scale_, x);
    const MatX k = kernel_matrix(ks_, x);
    const Eigen::Index n = x.rows();
    alpha_.assign(static_cast<size_t>(n_classes), Vec::Zero(n));
    labels_.assign(static_cast<size_t>(n_classes), Vec::Zero(n));
    FitStatus status;
    // One-vs-rest binary machines.
    for (int cls = 0; cls < n_classes; ++cls) {
      Vec& a = alpha_[static_cast<size_t>(cls)];
      Vec& lab = labels_[static_cast<size_t>(cls)];
      for (Eigen::Index i = 0; i < n; ++i) lab(i) = y[static_cast<size_t>(i)] == cls ? 1.0 : -1.0;
      Vec s = Vec::Zero(n);  // s_i = sum_j a_j lab_j K_ij
      bool converged = false;
      // Same objective-based stop as the regressor (singular K tolerance).
      auto objective = [&]() { return a.sum() - 0.5 * a.dot(lab.cwiseProduct(s)); };
      double prev_obj = objective();
      for (int epoch = 0; epoch < max_epochs_ && !converged; ++epoch) {
        double max_step = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double kii = k(i, i);
          if (kii < 1e-12) continue;
          const double margin = lab(i) * (s(i) - a(i) * lab(i) * kii);
          double na = std::clamp((1.0 - margin) / kii, 0.0, c_);
          const double delta = na - a(i);
          if (delta != 0.0) {
            s += delta * lab(i) * k.col(i);
            a(i) = na;
            max_step = std::max(max_step, std::abs(delta));
          }
        }
        const double obj = objective();
        converged = max_step <= tol_ * c_ ||
                    obj - prev_obj <= 1e-8 * std::max(1.0, std::abs(obj));
        prev_obj = obj;
      }
      if (!converged) {
        status.converged = false;
        status.message = "svc: coordinate ascent hit max_epochs";
      }
    }
    return status;
  }

  std::vector<int> predict(const MatX& x) const override {
    std::vector<int> out(static_cast<size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      int best = 0;
      double best_score = -1e300;
      for (int cls = 0; cls < n_classes_; ++cls) {
        double score = 0.0;
        for (Eigen::Index j = 0; j < x_.rows(); ++j)
          score += alpha_[static_cast<size_t>(cls)](j) *
                   labels_[static_cast<size_t>(cls)](j) *
                   kernel_eval(ks_, x_.row(j), x.row(i));
        if (score > best_score) {
          best_score = score;
          best = cls;
        }
      }
      out[static_cast<size_t>(i)] = best;
    }
    return out;
  }

 private:
  double c_;
  bool gamma_scale_;
  bool rbf_;
  int max_epochs_;
  double tol_;
  MatX x_;
  KernelSpec ks_;
  int n_classes_ = 0;
  std::vector<Vec> alpha_;
  std::vector<Vec> labels_;
};

// ---------------------------------------------------------------------------
// Multinomial logistic regression, L2 penalty 1/(2C)||W||^2, gradient descent
// with backtracking line search.
// ---------------------------------------------------------------------------

class LogisticClassifier final : public Classifier {
 public:
  LogisticClassifier(double c, int max_iter = 500, double tol = 1e-6)
      : c_(c), max_iter_(max_iter), tol_(tol) {}

  FitStatus fit(const MatX& x, const std::vector<int>& y, int n_classes) override {
    const Eigen::Index n = x.rows(), f = x.cols();
    n_classes_ = n_classes;
    w_ = MatX::Zero(f, n_classes);
    b_ = Vec::Zero(n_classes);

    MatX onehot = MatX::Zero(n, n_classes);
    for (Eigen::Index i = 0; i < n; ++i) onehot(i, y[static_cast<size_t>(i)]) = 1.0;

    const double inv_n = 1.0 / static_cast<double>(n);
    const double reg = 1.0 / c_;
    double step = 1.0;
    FitStatus status;
    status.converged = false;

    auto objective = [&](const MatX& w, const Vec& b) {
      MatX logits = x * w;
      logits.rowwise() += b.transpose();
      double nll = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double m = logits.row(i).maxCoeff();
        const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
        nll += lse - logits(i, y[static_cast<size_t>(i)]);
      }
      return nll * inv_n + 0.5 * reg * w.squaredNorm() * inv_n;
    };

    double obj = objective(w_, b_);
    for (int it = 0; it < max_iter_; ++it) {
      MatX logits = x * w_;
      logits.rowwise() += b_.transpose();
      MatX p(n, n_classes);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double m = logits.row(i).maxCoeff();
        p.row(i) = (logits.row(i).array() - m).exp();
        p.row(i) /= p.row(i).sum();
      }
      const MatX diff = p - onehot;
      MatX gw = x.transpose() * diff * inv_n + reg * inv_n * w_;
      Vec gb = diff.colwise().sum().transpose() * inv_n;
      const double gnorm = std::sqrt(gw.squaredNorm() + gb.squaredNorm());
      if (gnorm < tol_) {
        status.converged = true;
        break;
      }
      // Backtracking.
      step = std::min(step * 2.0, 64.0);
      for (;;) {
        const MatX w_try = w_ - step * gw;
        const Vec b_try = b_ - step * gb;
        const double obj_try = objective(w_try, b_try);
        if (obj_try <= obj - 1e-4 * step * gnorm * gnorm || step < 1e-10) {
          w_ = w_try;
          b_ = b_try;
          obj = obj_try;
          break;
        }
        step *= 0.5;
      }
    }
    if (!status.converged) status.message = "logistic: gradient descent hit max_iter";
    return status;
  }

  std::vector<int> predict(const MatX& x) const override {
    MatX logits = x * w_;
    logits.rowwise() += b_.transpose();
    std::vector<int> out(static_cast<size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      Eigen::Index best;
      logits.row(i).maxCoeff(&best);
      out[static_cast<size_t>(i)] = static_cast<int>(best);
    }
    return out;
  }

 private:
  double c_;
  int max_iter_;
  double tol_;
  int n_classes_ = 0;
  MatX w_;
  Vec b_;
};

// ---------------------------------------------------------------------------
// Gradient-boosted regression trees. One exact-greedy CART builder shared by
// the first-order ("gboost") and second-order, subsampling ("xgboost-style")
// variants.
// ---------------------------------------------------------------------------

struct TreeNode {
  int feature = -1;  // -1: leaf
  double threshold = 0.0;
  double value = 0.0;
  int left = -1;
  int right = -1;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double eval(const Vec& x) const {
    int id = 0;
    while (nodes[static_cast<size_t>(id)].feature >= 0) {
      const TreeNode& nd = nodes[static_cast<size_t>(id)];
      id = x(nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<size_t>(id)].value;
  }
};

struct TreeBuildConfig {
  int max_depth = 3;
  int min_rows = 2;       // minimum rows to attempt a split
  double lambda = 1.0;    // leaf L2 regularization (second-order gain)
  double min_gain = 1e-12;
};

// Builds one tree on (g, h): leaf value -sum(g)/(sum(h)+lambda); split gain is
// the standard second-order formulation. First-order boosting passes h = 1.
class TreeBuilder {
 public:
  TreeBuilder(const MatX& x, const Vec& g, const Vec& h, const TreeBuildConfig& cfg,
              const std::vector<int>& features)
      : x_(x), g_(g), h_(h), cfg_(cfg), features_(features) {}

  Tree build(const std::vector<int>& rows) {
    Tree tree;
    grow(tree, rows, 0);
    return tree;
  }

 private:
  int grow(Tree& tree, const std::vector<int>& rows, int depth) {
    double gsum = 0.0, hsum = 0.0;
    for (int r : rows) {
      gsum += g_(r);
      hsum += h_(r);
    }
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes[static_cast<size_t>(id)].value = -gsum / (hsum + cfg_.lambda);

    if (depth >= cfg_.max_depth || static_cast<int>(rows.size()) < cfg_.min_rows)
      return id;

    const double parent_score = gsum * gsum / (hsum + cfg_.lambda);
    double best_gain = cfg_.min_gain;
    int best_feature = -1;
    double best_threshold = 0.0;

    std::vector<int> sorted = rows;
    for (int f : features_) {
      std::sort(sorted.begin(), sorted.end(),
                [&](int a, int b) { return x_(a, f) < x_(b, f); });
      double gl = 0.0, hl = 0.0;
      for (size_t i = 0; i + 1 < sorted.size(); ++i) {
        gl += g_(sorted[i]);
        hl += h_(sorted[i]);
        if (x_(sorted[i], f) == x_(sorted[i + 1], f)) continue;
        const double gr = gsum - gl, hr = hsum - hl;
        const double gain = gl * gl / (hl + cfg_.lambda) + gr * gr / (hr + cfg_.lambda) -
                            parent_score;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = f;
          best_threshold = 0.5 * (x_(sorted[i], f) + x_(sorted[i + 1], f));
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<int> left, right;
    for (int r : rows)
      (x_(r, best_feature) <= best_threshold ? left : right).push_back(r);
    if (left.empty() || right.empty()) return id;

    tree.nodes[static_cast<size_t>(id)].feature = best_feature;
    tree.nodes[static_cast<size_t>(id)].threshold = best_threshold;
    const int l = grow(tree, left, depth + 1);
    tree.nodes[static_cast<size_t>(id)].left = l;
    const int r = grow(tree, right, depth + 1);
    tree.nodes[static_cast<size_t>(id)].right = r;
    return id;
  }

  const MatX& x_;
  const Vec& g_;
  const Vec& h_;
  TreeBuildConfig cfg_;
  std::vector<int> features_;
};

struct BoostParams {
  int n_estimators = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  double subsample = 1.0;   // row fraction per tree
  double colsample = 1.0;   // feature fraction per tree
  bool second_order = false;
  std::uint64_t seed = 0;
};

class BoostedRegressor final : public Regressor {
 public:
  explicit BoostedRegressor(const BoostParams& bp) : bp_(bp) {}

  FitStatus fit(const MatX& x, const Vec& y) override {
    const Eigen::Index n = x.rows();
    base_ = y.mean();
    Vec pred = Vec::Constant(n, base_);
    trees_.clear();
    rng::Stream rs = rng::derive(bp_.seed, "boost");
    std::vector<int> all_rows(static_cast<size_t>(n));
    std::iota(all_rows.begin(), all_rows.end(), 0);
    std::vector<int> all_feats(static_cast<size_t>(x.cols()));
    std::iota(all_feats.begin(), all_feats.end(), 0);

    for (int t = 0; t < bp_.n_estimators; ++t) {
      Vec g = pred - y;  // d/dpred of 1/2 (pred-y)^2
      Vec h = Vec::Ones(n);
      TreeBuildConfig cfg;
      cfg.max_depth = bp_.max_depth;
      cfg.lambda = bp_.second_order ? 1.0 : 0.0;
      const std::vector<int> rows = sample_subset(all_rows, bp_.subsample, rs);
      const std::vector<int> feats = sample_subset(all_feats, bp_.colsample, rs);
      TreeBuilder builder(x, g, h, cfg, feats);
      Tree tree = builder.build(rows);
      for (Eigen::Index i = 0; i < n; ++i)
        pred(i) += bp_.learning_rate * tree.eval(x.row(i));
      trees_.push_back(std::move(tree));
    }
    return {};
  }

  Vec predict(const MatX& x) const override {
    Vec out = Vec::Constant(x.rows(), base_);
    for (const Tree& t : trees_)
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        out(i) += bp_.learning_rate * t.eval(x.row(i));
    return out;
  }

 private:
  static std::vector<int> sample_subset(const std::vector<int>& all, double frac,
                                        rng::Stream& rs) {
    if (frac >= 1.0) return all;
    const size_t count =
        std::max<size_t>(1, static_cast<size_t>(std::lround(frac * all.size())));
    std::vector<int> pool = all;
    for (size_t i = 0; i < count; ++i) {
      const size_t j = i + rs.below(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  BoostParams bp_;
  double base_ = 0.0;
  std::vector<Tree> trees_;
  friend class BoostedClassifier;
};

class BoostedClassifier final : public Classifier {
 public:
  explicit BoostedClassifier(const BoostParams& bp) : bp_(bp) {}

  FitStatus fit(const MatX& x, const std::vector<int>& y, int n_classes) override {
    const Eigen::Index n = x.rows();
    n_classes_ = n_classes;
    MatX logits = MatX::Zero(n, n_classes);
    trees_.assign(static_cast<size_t>(bp_.n_estimators),
                  std::vector<Tree>(static_cast<size_t>(n_classes)));
    rng::Stream rs = rng::derive(bp_.seed, "boost-cls");
    std::vector<int> all_rows(static_cast<size_t>(n));
    std::iota(all_rows.begin(), all_rows.end(), 0);
    std::vector<int> all_feats(static_cast<size_t>(x.cols()));
    std::iota(all_feats.begin(), all_feats.end(), 0);

    for (int t = 0; t < bp_.n_estimators; ++t) {
      // Softmax probabilities.
      MatX p(n, n_classes);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double m = logits.row(i).maxCoeff();
        p.row(i) = (logits.row(i).array() - m).exp();
        p.row(i) /= p.row(i).sum();
      }
      const std::vector<int> rows = BoostedRegressor::sample_subset(all_rows, bp_.subsample, rs);
      const std::vector<int> feats =
          BoostedRegressor::sample_subset(all_feats, bp_.colsample, rs);
      for (int cls = 0; cls < n_classes; ++cls) {
        Vec g(n), h(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const double target = y[static_cast<size_t>(i)] == cls ? 1.0 : 0.0;
          g(i) = p(i, cls) - target;
          h(i) = std::max(1e-6, p(i, cls) * (1.0 - p(i, cls)));
        }
        TreeBuildConfig cfg;
        cfg.max_depth = bp_.max_depth;
        cfg.lambda = bp_.second_order ? 1.0 : 0.0;
        TreeBuilder builder(x, g, h, cfg, feats);
        Tree tree = builder.build(rows);
        for (Eigen::Index i = 0; i < n; ++i)
          logits(i, cls) += bp_.learning_rate * tree.eval(x.row(i));
        trees_[static_cast<size_t>(t)][static_cast<size_t>(cls)] = std::move(tree);
      }
    }
    return {};
  }

  std::vector<int> predict(const MatX& x) const override {
    std::vector<int> out(static_cast<size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      Vec logits = Vec::Zero(n_classes_);
      for (const auto& stage : trees_)
        for (int cls = 0; cls < n_classes_; ++cls)
          logits(cls) += bp_.learning_rate * stage[static_cast<size_t>(cls)].eval(x.row(i));
      Eigen::Index best;
      logits.maxCoeff(&best);
      out[static_cast<size_t>(i)] = static_cast<int>(best);
    }
    return out;
  }

 private:
  BoostParams bp_;
  int n_classes_ = 0;
  std::vector<std::vector<Tree>> trees_;  // [stage][class]
};

BoostParams boost_params(const HyperParams& hp, bool second_order, std::uint64_t seed) {
  BoostParams bp;
  bp.n_estimators = static_cast<int>(hp.get("n_estimators", 100));
  bp.learning_rate = hp.get("learning_rate", 0.1);
  bp.max_depth = static_cast<int>(hp.get("max_depth", 3));
  bp.subsample = hp.get("subsample", 1.0);
  bp.colsample = hp.get("colsample_bytree", 1.0);
  bp.second_order = second_order;
  bp.seed = seed;
  return bp;
}

}  // namespace

std::unique_ptr<Regressor> make_regressor(ModelFamily f, const HyperParams& hp,
                                          std::uint64_t seed) {
  switch (f) {
    case ModelFamily::pls:
      return std::make_unique<PlsRegressor>(static_cast<int>(hp.get("n_components", 2)));
    case ModelFamily::lasso:
      return std::make_unique<LassoRegressor>(hp.get("alpha", 0.01));
    case ModelFamily::svm:
      return std::make_unique<SvrRegressor>(hp.get("C", 1.0),
                                            hp.get("gamma_scale", 1.0) > 0.5,
                                            hp.get("kernel_rbf", 1.0) > 0.5);
    case ModelFamily::gboost:
      return std::make_unique<BoostedRegressor>(boost_params(hp, false, seed));
    case ModelFamily::xgboost:
      return std::make_unique<BoostedRegressor>(boost_params(hp, true, seed));
    case ModelFamily::logistic:
      break;
  }
  throw ConfigError("model family '" + family_name(f) + "' does not support regression");
}

std::unique_ptr<Classifier> make_classifier(ModelFamily f, const HyperParams& hp,
                                            std::uint64_t seed) {
  switch (f) {
    case ModelFamily::logistic:
      return std::make_unique<LogisticClassifier>(hp.get("C", 1.0));
    case ModelFamily::svm:
      return std::make_unique<SvcClassifier>(hp.get("C", 1.0),
                                             hp.get("gamma_scale", 1.0) > 0.5,
                                             hp.get("kernel_rbf", 1.0) > 0.5);
    case ModelFamily::gboost:
      return std::make_unique<BoostedClassifier>(boost_params(hp, false, seed));
    case ModelFamily::xgboost:
      return std::make_unique<BoostedClassifier>(boost_params(hp, true, seed));
    case ModelFamily::pls:
    case ModelFamily::lasso:
      break;
  }
  throw ConfigError("model family '" + family_name(f) + "' does not support classification");
}

}  // namespace crossmae::pheno
