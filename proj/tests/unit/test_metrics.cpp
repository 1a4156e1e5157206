#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "iblr/errors.hpp"
#include "iblr/families.hpp"
#include "iblr/metrics.hpp"
#include "iblr/models.hpp"
#include "test_util.hpp"

using namespace iblr;
using namespace iblr::test;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// -log N(z | 0, I).
std::unique_ptr<TargetModel> standard_normal_prior(long d, double shift = 0.0) {
  return quadratic_model(Mat::Identity(d, d), Vec::Zero(d), 0.5 * static_cast<double>(d) * kLog2Pi + shift);
}

// KL(N(mu, S^{-1}) || N(0, I)).
double gaussian_kl_oracle(const Vec& mu, const Mat& S) {
  const Eigen::LLT<Mat> llt(S);
  const Mat cov = llt.solve(Mat::Identity(S.rows(), S.cols()));
  double logdet_s = 0.0;
  for (long i = 0; i < S.rows(); ++i) logdet_s += 2.0 * std::log(llt.matrixL()(i, i));
  return 0.5 * (cov.trace() + mu.squaredNorm() - static_cast<double>(mu.size()) + logdet_s);
}

Mat rows_sorted(const Mat& m) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
  for (long i = 0; i < m.rows(); ++i) rows[static_cast<std::size_t>(i)].assign(m.row(i).data(), m.row(i).data() + m.cols());
  std::sort(rows.begin(), rows.end());
  Mat out(m.rows(), m.cols());
  for (long i = 0; i < m.rows(); ++i) {
    for (long j = 0; j < m.cols(); ++j) out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return out;
}

double rbf(const Mat& a, long i, const Mat& b, long j, double h) {
  return std::exp(-(a.row(i) - b.row(j)).squaredNorm() / (2 * h * h));
}

// Unbiased squared MMD by brute force: the paired form for equal sizes after
// sorting both sets, the two-sample U-statistic otherwise.
double mmd_oracle(const Mat& a, const Mat& b, double h) {
  const Mat x = rows_sorted(a), y = rows_sorted(b);
  const long m = x.rows(), n = y.rows();
  if (m == n) {
    double total = 0.0;
    for (long i = 0; i < m; ++i) {
      for (long j = 0; j < m; ++j) {
        if (i == j) continue;
        total += rbf(x, i, x, j, h) + rbf(y, i, y, j, h) - rbf(x, i, y, j, h) - rbf(x, j, y, i, h);
      }
    }
    return total / (static_cast<double>(m) * (m - 1));
  }
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < m; ++j)
      if (i != j) kxx += rbf(x, i, x, j, h);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      if (i != j) kyy += rbf(y, i, y, j, h);
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < n; ++j) kxy += rbf(x, i, y, j, h);
  return kxx / (static_cast<double>(m) * (m - 1)) + kyy / (static_cast<double>(n) * (n - 1)) -
         2.0 * kxy / (static_cast<double>(m) * n);
}

Mat normal_samples(RngStream& rng, long n, long d, double shift) {
  Mat m = random_matrix(rng, n, d);
  return m.array() + shift;
}

Mat shuffled(const Mat& m, RngStream& rng) {
  std::vector<long> idx(static_cast<std::size_t>(m.rows()));
  std::iota(idx.begin(), idx.end(), 0L);
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.next_u64() % i]);
  Mat out(m.rows(), m.cols());
  for (long i = 0; i < m.rows(); ++i) out.row(i) = m.row(idx[static_cast<std::size_t>(i)]);
  return out;
}

double logistic_log_lik(const Vec& z, const Vec& x, double y) { return -std::log1p(std::exp(-y * x.dot(z))); }

}  // namespace

TEST_CASE("Monte-Carlo negative ELBO") {
  RngStream rng(1, 0);
  SUBCASE("q equal to the prior with no data") {
    auto prior = standard_normal_prior(3);
    auto q = make_gaussian_full(Vec::Zero(3), Mat::Identity(3, 3));
    const MetricResult r = neg_elbo_mc(*q, *prior, rng, 1000);
    CHECK(std::fabs(r.value) <= 3.0 * r.std_error + 1e-12);
    CHECK(r.n_samples == 1000);
    CHECK(r.name == "neg_elbo");
  }
  SUBCASE("Gaussian KL") {
    auto prior = standard_normal_prior(2);
    const Vec mu = random_vector(rng, 2);
    const Mat S = random_spd(rng, 2, 0.5);
    auto q = make_gaussian_full(mu, S);
    const MetricResult r = neg_elbo_mc(*q, *prior, rng, 100000);
    CHECK(std::fabs(r.value - gaussian_kl_oracle(mu, S)) <= 3.0 * r.std_error);
    CHECK(r.std_error > 0.0);
    CHECK(*neg_elbo_exact(*q, *prior) == doctest::Approx(gaussian_kl_oracle(mu, S)).epsilon(1e-12));
  }
  SUBCASE("linear regression at the exact posterior") {
    auto model = bayes_linreg(synthetic_linear(rng, 50, 3, 0.5), 0.25, 1.0);
    const ExactSolution sol = *model->exact_solution();
    auto q = make_gaussian_full(sol.mu, sol.S);
    const MetricResult r = neg_elbo_mc(*q, *model, rng, 200);
    CHECK(std::fabs(r.value - sol.neg_elbo) <= 3.0 * r.std_error + 1e-9 * std::fabs(sol.neg_elbo));
  }
  SUBCASE("a constant shift moves the estimate by the constant") {
    auto a = standard_normal_prior(2);
    auto b = standard_normal_prior(2, 5.0);
    auto q = make_gaussian_diag(random_vector(rng, 2), Vec::Constant(2, 3.0));
    RngStream r1(4, 0), r2(4, 0);
    const double va = neg_elbo_mc(*q, *a, r1, 500).value;
    const double vb = neg_elbo_mc(*q, *b, r2, 500).value;
    CHECK(std::fabs((vb - va) - 5.0) <= 1e-12);
  }
  SUBCASE("one sample has an infinite standard error") {
    auto prior = standard_normal_prior(1);
    auto q = make_gaussian_full(Vec::Zero(1), Mat::Identity(1, 1));
    CHECK(std::isinf(neg_elbo_mc(*q, *prior, rng, 1).std_error));
    CHECK_THROWS_AS(neg_elbo_mc(*q, *prior, rng, 0), DomainError);
    auto q2 = make_gaussian_full(Vec::Zero(2), Mat::Identity(2, 2));
    CHECK_THROWS_AS(neg_elbo_mc(*q2, *prior, rng, 5), DimensionMismatch);
  }
  SUBCASE("draws outside the support") {
    GammaFactorData d;
    d.W = Mat::Constant(1, 1, 1.0);
    d.Y = Mat::Constant(1, 1, 2.0);
    auto positive = gamma_factor_model(d);
    auto q = make_gaussian_full(Vec::Zero(1), Mat::Identity(1, 1));
    CHECK_THROWS_AS(neg_elbo_mc(*q, *positive, rng, 50), SupportError);
  }
  SUBCASE("deterministic given the stream") {
    auto prior = standard_normal_prior(2);
    auto q = make_gaussian_diag(Vec::Ones(2), Vec::Constant(2, 2.0));
    RngStream r1(9, 2), r2(9, 2);
    CHECK(neg_elbo_mc(*q, *prior, r1, 300).value == neg_elbo_mc(*q, *prior, r2, 300).value);
  }
}

TEST_CASE("closed-form ELBO gap") {
  RngStream rng(2, 0);
  auto model = bayes_linreg(synthetic_linear(rng, 40, 3, 0.5), 0.5, 2.0);
  const ExactSolution sol = *model->exact_solution();
  CHECK(elbo_gap(*make_gaussian_full(sol.mu, sol.S), *model).value == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
  for (int k = 0; k < 10; ++k) {
    const Vec mu = sol.mu + 0.1 * random_vector(rng, 3);
    const Mat S = sol.S + random_spd(rng, 3, 0.1);
    CHECK(elbo_gap(*make_gaussian_full(mu, S), *model).value > 0.0);
  }
  SUBCASE("diagonal Gaussians use the same closed form") {
    const Vec s = sol.S.diagonal();
    Mat D = Mat::Zero(3, 3);
    D.diagonal() = s;
    CHECK(*neg_elbo_exact(*make_gaussian_diag(sol.mu, s), *model) ==
          doctest::Approx(*neg_elbo_exact(*make_gaussian_full(sol.mu, D), *model)).epsilon(1e-14));
  }
  SUBCASE("missing closed forms") {
    CHECK_FALSE(neg_elbo_exact(*make_gamma(1.0, 1.0), *model).has_value());
    CHECK_THROWS_AS(elbo_gap(*make_gamma(1.0, 1.0), *model), DomainError);
    auto laplace = toy_density("laplace");
    CHECK_FALSE(neg_elbo_exact(*make_gaussian_full(Vec::Zero(2), Mat::Identity(2, 2)), *laplace).has_value());
    CHECK_THROWS_AS(elbo_gap(*make_gaussian_full(Vec::Zero(2), Mat::Identity(2, 2)), *laplace), DomainError);
  }
}

TEST_CASE("kernel MMD") {
  RngStream rng(3, 0);
  SUBCASE("identical sets") {
    const Mat a = normal_samples(rng, 200, 2, 0.0);
    const MetricResult r = mmd_rbf(a, a);
    CHECK(std::fabs(r.value) <= 1e-12);
    CHECK(r.name == "mmd");
  }
  SUBCASE("well separated Gaussians") {
    const Mat a = normal_samples(rng, 500, 1, 0.0);
    const Mat b = normal_samples(rng, 500, 1, 10.0);
    const MetricResult r = mmd_rbf(a, b);
    CHECK(r.value > 0.5);
    Mat pooled(1000, 1);
    pooled << a, b;
    const double h = median_pairwise_distance(pooled);
    CHECK(r.value == doctest::Approx(mmd_oracle(a, b, h)).epsilon(1e-10));
  }
  SUBCASE("brute force with a fixed bandwidth") {
    const Mat a = normal_samples(rng, 40, 3, 0.0);
    const Mat b = normal_samples(rng, 40, 3, 0.3);
    CHECK(mmd_rbf(a, b, 1.3).value == doctest::Approx(mmd_oracle(a, b, 1.3)).epsilon(1e-12));
    const Mat c = normal_samples(rng, 25, 3, 0.3);
    CHECK(mmd_rbf(a, c, 0.8).value == doctest::Approx(mmd_oracle(a, c, 0.8)).epsilon(1e-12));
  }
  SUBCASE("order and argument invariance") {
    const Mat a = normal_samples(rng, 300, 2, 0.0);
    const Mat b = normal_samples(rng, 300, 2, 0.5);
    const double v = mmd_rbf(a, b).value;
    CHECK(mmd_rbf(shuffled(a, rng), b).value == v);
    CHECK(mmd_rbf(a, shuffled(b, rng)).value == v);
    CHECK(mmd_rbf(b, a).value == v);
    const Mat c = normal_samples(rng, 170, 2, 0.5);
    CHECK(mmd_rbf(a, c).value == mmd_rbf(shuffled(c, rng), shuffled(a, rng)).value);
  }
  SUBCASE("same distribution is near zero") {
    const Mat a = normal_samples(rng, 1000, 2, 0.0);
    const Mat b = normal_samples(rng, 1000, 2, 0.0);
    CHECK(std::fabs(mmd_rbf(a, b).value) <= 0.01);
  }
  SUBCASE("median distance") {
    Mat odd(3, 1);
    odd << 0.0, 1.0, 3.0;
    CHECK(median_pairwise_distance(odd) == 2.0);
    Mat even(4, 1);
    even << 0.0, 1.0, 3.0, 7.0;
    CHECK(median_pairwise_distance(even) == 3.5);
    CHECK_THROWS_AS(median_pairwise_distance(Mat::Zero(1, 2)), DomainError);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(mmd_rbf(Mat::Zero(1, 2), Mat::Zero(5, 2)), DomainError);
    CHECK_THROWS_AS(mmd_rbf(Mat::Zero(3, 2), Mat::Zero(3, 1)), DimensionMismatch);
    CHECK_THROWS_AS(mmd_rbf(Mat::Zero(3, 2), Mat::Zero(3, 2)), DomainError);
    CHECK_THROWS_AS(mmd_rbf(normal_samples(rng, 3, 1, 0), normal_samples(rng, 3, 1, 0), -1.0), DomainError);
  }
}

TEST_CASE("test log-loss") {
  RngStream rng(4, 0);
  Vec w(2);
  w << 1.0, -1.0;
  auto model = bayes_logreg(synthetic_logistic(rng, 20, w, 1.0), 1.0);
  SUBCASE("uninformative features give log 2") {
    Dataset test;
    test.X = Mat::Zero(10, 2);
    test.y = Vec::Ones(10);
    auto q = make_gaussian_full(random_vector(rng, 2), Mat::Identity(2, 2));
    const MetricResult r = test_log_loss(*q, *model, test, rng, 50);
    CHECK(std::fabs(r.value - std::log(2.0)) <= 3.0 * r.std_error + 1e-15);
  }
  SUBCASE("a symmetric posterior predicts a coin flip") {
    Dataset test;
    test.X = random_matrix(rng, 30, 2);
    test.y = Vec::Ones(30);
    for (long i = 0; i < 30; i += 2) test.y(i) = -1.0;
    auto q = make_gaussian_full(Vec::Zero(2), 4.0 * Mat::Identity(2, 2));
    const MetricResult r = test_log_loss(*q, *model, test, rng, 20000);
    CHECK(std::fabs(r.value - std::log(2.0)) <= 3.0 * r.std_error + 1e-3);
  }
  SUBCASE("a confident correct posterior drives the loss to zero") {
    Dataset test;
    test.X = Mat::Zero(1, 2);
    test.X(0, 0) = 1.0;
    test.y = Vec::Ones(1);
    double prev = 1.0;
    for (double m : {1.0, 4.0, 10.0, 20.0}) {
      Vec mu(2);
      mu << m, 0.0;
      auto q = make_gaussian_full(mu, 1e4 * Mat::Identity(2, 2));
      const double v = test_log_loss(*q, *model, test, rng, 200).value;
      CHECK(v > 0.0);
      CHECK(v < prev);
      prev = v;
    }
    CHECK(prev < 1e-8);
  }
  SUBCASE("one draw equals plugging in that draw") {
    const Dataset test = synthetic_logistic(rng, 15, w, 1.0);
    auto q = make_gaussian_full(random_vector(rng, 2), random_spd(rng, 2));
    RngStream r1(11, 0), r2(11, 0);
    const Vec z = q->sample(r2, 1).row(0).transpose();
    double direct = 0.0;
    for (long i = 0; i < 15; ++i) direct -= logistic_log_lik(z, test.X.row(i).transpose(), test.y(i));
    const MetricResult r = test_log_loss(*q, *model, test, r1, 1);
    CHECK(r.value == doctest::Approx(direct / 15.0).epsilon(1e-14));
    CHECK(std::isinf(r.std_error));
  }
  SUBCASE("errors") {
    auto q = make_gaussian_full(Vec::Zero(2), Mat::Identity(2, 2));
    Dataset empty;
    empty.X = Mat::Zero(0, 2);
    empty.y = Vec::Zero(0);
    CHECK_THROWS_AS(test_log_loss(*q, *model, empty, rng, 10), DomainError);
    auto quad = quadratic_model(Mat::Identity(2, 2), Vec::Zero(2));
    CHECK_THROWS_AS(test_log_loss(*q, *quad, synthetic_logistic(rng, 3, w), rng, 10), EstimatorUnavailable);
  }
}

TEST_CASE("trace evaluator") {
  RngStream rng(5, 0);
  const Dataset ds = synthetic_linear(rng, 30, 2, 0.5);
  auto model = bayes_linreg(ds, 0.25, 1.0);
  auto q = make_gaussian_full(Vec::Zero(2), Mat::Identity(2, 2));
  SUBCASE("closed form with the gap") {
    EvaluatorConfig cfg;
    cfg.elbo_gap = true;
    const TraceHook hook = make_evaluator(*model, cfg);
    TraceRecord rec;
    rec.iter = 3;
    hook(*q, rec);
    CHECK(rec.neg_elbo == *neg_elbo_exact(*q, *model));
    CHECK(rec.neg_elbo_se == 0.0);
    CHECK(rec.metrics.at("elbo_gap") == doctest::Approx(rec.neg_elbo - model->exact_solution()->neg_elbo));
  }
  SUBCASE("sampled, with test and MMD metrics on the cadence") {
    EvaluatorConfig cfg;
    cfg.prefer_exact = false;
    cfg.n_samples = 50;
    cfg.seed = 17;
    cfg.test = &ds;
    cfg.test_samples = 20;
    const Mat ref = normal_samples(rng, 100, 2, 0.0);
    cfg.reference = &ref;
    cfg.mmd_samples = 100;
    cfg.cadence = 5;
    const TraceHook hook = make_evaluator(*model, cfg);
    TraceRecord a, b, c;
    a.iter = b.iter = 10;
    c.iter = 11;
    hook(*q, a);
    hook(*q, b);
    hook(*q, c);
    CHECK(a.neg_elbo == b.neg_elbo);
    CHECK(a.metrics == b.metrics);
    CHECK(a.neg_elbo_se > 0.0);
    CHECK(a.metrics.count("test_log_loss") == 1);
    CHECK(a.metrics.count("mmd") == 1);
    CHECK(c.metrics.empty());
    CHECK(c.neg_elbo != a.neg_elbo);
  }
}
