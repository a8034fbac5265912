#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "crossmae/core/errors.hpp"
#include "crossmae/masking/masking.hpp"

using namespace crossmae;
using masking::MaskingConfig;

namespace {

// --- independent Beta oracle -------------------------------------------------
// Regularized incomplete beta I_x(a,b) by Lentz continued fraction, plus an
// inverse-CDF sampler built on bisection. Shares no code with rng::Stream.

double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double betacf(double a, double b, double x) {
  const int max_it = 300;
  const double eps = 1e-14, fpmin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_it; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

double beta_cdf(double x, double a, double b) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double bt =
      std::exp(a * std::log(x) + b * std::log(1.0 - x) - log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double beta_inverse_cdf(double u, double a, double b) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (beta_cdf(mid, a, b) < u)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("config validation") {
  MaskingConfig cfg;
  cfg.alpha_sat = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.total_visible = 2 * cfg.tokens_per_modality + 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("symmetric alphas give mean one half") {
  MaskingConfig cfg;
  cfg.alpha_sat = 1.0;
  cfg.alpha_uav = 1.0;
  rng::Stream rs = rng::derive(100, "beta");
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += masking::sample_proportions(cfg, rs).lambda_sat;
  // Beta(1,1) is Uniform(0,1): sd of the mean = sqrt(1/12)/sqrt(n).
  const double se = std::sqrt(1.0 / 12.0 / n);
  CHECK(std::abs(sum / n - 0.5) < 3.0 * se);
}

TEST_CASE("asymmetric draw matches the Beta mean and an independent sampler") {
  const double a = 0.9, b = 0.1;
  MaskingConfig cfg;
  cfg.alpha_sat = a;
  cfg.alpha_uav = b;
  rng::Stream rs = rng::derive(101, "beta");
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  int hist[10] = {0};
  for (int i = 0; i < n; ++i) {
    const double l = masking::sample_proportions(cfg, rs).lambda_sat;
    sum += l;
    sum2 += l * l;
    hist[std::min(9, static_cast<int>(l * 10.0))]++;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  const double ab = a + b;
  const double expect_mean = a / ab;                      // 0.9
  const double expect_var = a * b / (ab * ab * (ab + 1)); // Beta variance
  const double se_mean = std::sqrt(expect_var / n);
  CHECK(std::abs(mean - expect_mean) < 3.0 * se_mean);
  CHECK(var == doctest::Approx(expect_var).epsilon(0.05));

  // Brute-force histogram from the inverse-CDF reference sampler.
  rng::Stream ref = rng::derive(102, "ref-uniforms");
  int ref_hist[10] = {0};
  const int m = 20000;
  for (int i = 0; i < m; ++i) {
    const double l = beta_inverse_cdf(ref.uniform(), a, b);
    ref_hist[std::min(9, static_cast<int>(l * 10.0))]++;
  }
  for (int k = 0; k < 10; ++k) {
    const double p_mine = static_cast<double>(hist[k]) / n;
    const double p_ref = static_cast<double>(ref_hist[k]) / m;
    const double se = std::sqrt(std::max(p_ref * (1 - p_ref) / m, 1e-9)) +
                      std::sqrt(std::max(p_mine * (1 - p_mine) / n, 1e-9));
    CHECK_MESSAGE(std::abs(p_mine - p_ref) < 5.0 * se + 1e-3,
                  "bin " << k << ": " << p_mine << " vs " << p_ref);
  }

  // And against the analytic CDF at a few quantiles.
  for (double x : {0.5, 0.8, 0.95, 0.99}) {
    int count = 0;
    rng::Stream rs2 = rng::derive(103, "beta2");
    const int n2 = 50000;
    for (int i = 0; i < n2; ++i)
      if (masking::sample_proportions(cfg, rs2).lambda_sat <= x) ++count;
    const double p = beta_cdf(x, a, b);
    const double se = std::sqrt(p * (1 - p) / n2);
    CHECK(std::abs(static_cast<double>(count) / n2 - p) < 5.0 * se + 1e-4);
  }
}

TEST_CASE("expected uav share for the (1.2, 0.8) setting is 40 percent") {
  MaskingConfig cfg;
  cfg.alpha_sat = 1.2;
  cfg.alpha_uav = 0.8;
  rng::Stream rs = rng::derive(104, "beta");
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += masking::sample_proportions(cfg, rs).lambda_uav;
  CHECK(0.8 / 2.0 == doctest::Approx(0.40));
  const double expect_var = 1.2 * 0.8 / (2.0 * 2.0 * 3.0);
  CHECK(std::abs(sum / n - 0.40) < 3.0 * std::sqrt(expect_var / n));
}

TEST_CASE("token allocation floor arithmetic") {
  MaskingConfig cfg;  // T = 66, P = 196
  CHECK(masking::allocate_tokens({1.0, 0.0}, cfg).sat == 66);
  CHECK(masking::allocate_tokens({1.0, 0.0}, cfg).uav == 0);
  CHECK(masking::allocate_tokens({0.5, 0.5}, cfg).sat == 33);
  CHECK(masking::allocate_tokens({0.5, 0.5}, cfg).uav == 33);
  // floor(0.7 * 66) = floor(46.2) = 46
  const auto a = masking::allocate_tokens({0.7, 0.3}, cfg);
  CHECK(a.sat == 46);
  CHECK(a.uav == 20);
}

TEST_CASE("token allocation stays within the per-modality budget for large T") {
  MaskingConfig cfg;
  cfg.total_visible = 320;  // between P and 2P
  const auto a = masking::allocate_tokens({0.95, 0.05}, cfg);
  CHECK(a.sat <= cfg.tokens_per_modality);
  CHECK(a.uav <= cfg.tokens_per_modality);
  CHECK(a.sat + a.uav == 320);
}

TEST_CASE("allocation plus selection always sums to T (property)") {
  rng::Stream rs = rng::derive(105, "prop");
  for (int rep = 0; rep < 200; ++rep) {
    MaskingConfig cfg;
    cfg.alpha_sat = 0.05 + 2.0 * rs.uniform();
    cfg.alpha_uav = 0.05 + 2.0 * rs.uniform();
    cfg.tokens_per_modality = 16 + static_cast<int>(rs.below(200));
    cfg.total_visible = static_cast<int>(rs.below(2 * cfg.tokens_per_modality + 1));
    const masking::MaskPlan plan = masking::sample_plan(cfg, rs);
    CHECK(plan.total_visible() == cfg.total_visible);
    const std::set<int> s(plan.visible_sat.begin(), plan.visible_sat.end());
    CHECK(s.size() == plan.visible_sat.size());
    if (!plan.visible_sat.empty()) {
      CHECK(plan.visible_sat.front() >= 0);
      CHECK(plan.visible_sat.back() < cfg.tokens_per_modality);
      CHECK(std::is_sorted(plan.visible_sat.begin(), plan.visible_sat.end()));
    }
    CHECK(plan.lambda_draw.lambda_sat + plan.lambda_draw.lambda_uav ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("selection boundaries and determinism") {
  MaskingConfig cfg;
  rng::Stream rs = rng::derive(106, "sel");
  const masking::MaskPlan plan = masking::select_visible({0, 66}, cfg, rs);
  CHECK(plan.visible_sat.empty());
  CHECK(plan.visible_uav.size() == 66);

  rng::Stream r1 = rng::derive(107, "dup");
  rng::Stream r2 = rng::derive(107, "dup");
  const masking::MaskPlan p1 = masking::select_visible({66, 0}, cfg, r1);
  const masking::MaskPlan p2 = masking::select_visible({66, 0}, cfg, r2);
  CHECK(p1.visible_sat == p2.visible_sat);
  CHECK(p1.visible_uav == p2.visible_uav);

  CHECK_THROWS_AS(masking::select_visible({197, 0}, cfg, r1), InternalError);
}

TEST_CASE("uniform inclusion frequency at fixed T_sat = 33") {
  MaskingConfig cfg;
  rng::Stream rs = rng::derive(108, "incl");
  const int draws = 50000;
  std::vector<int> counts(196, 0);
  for (int d = 0; d < draws; ++d) {
    const masking::MaskPlan plan = masking::select_visible({33, 33}, cfg, rs);
    for (int i : plan.visible_sat) counts[static_cast<size_t>(i)]++;
  }
  const double p = 33.0 / 196.0;
  const double sigma = std::sqrt(draws * p * (1 - p));
  for (int i = 0; i < 196; ++i)
    CHECK_MESSAGE(std::abs(counts[static_cast<size_t>(i)] - draws * p) < 4.5 * sigma,
                  "token " << i << " count " << counts[static_cast<size_t>(i)]);
}

TEST_CASE("fixed inference plans") {
  const auto full_sat = masking::full_sat_plan(196);
  CHECK(full_sat.visible_sat.size() == 196);
  CHECK(full_sat.visible_uav.empty());
  const auto cond = masking::conditioned_plan(196, {7, 3, 3});
  CHECK(cond.visible_uav == std::vector<int>{3, 7});
  CHECK_THROWS_AS(masking::conditioned_plan(196, {196}), InputError);
  const auto masked = masking::masked_indices({1, 3}, 5);
  CHECK(masked == std::vector<int>{0, 2, 4});
}
