#include <doctest.h>

#include <cmath>
#include <vector>

#include "iblr/errors.hpp"
#include "iblr/linalg.hpp"
#include "iblr/rng.hpp"
#include "iblr/special.hpp"
#include "test_util.hpp"

using namespace iblr;
using namespace iblr::test;

namespace {

// Brute-force polygamma oracles: shift far to the right by direct summation,
// then a three-term asymptotic tail.
constexpr int kShiftN = 20000;

double digamma_oracle(double x) {
  double s = 0.0;
  for (int k = kShiftN - 1; k >= 0; --k) s += 1.0 / (x + k);
  const double y = x + kShiftN;
  return std::log(y) - 0.5 / y - 1.0 / (12.0 * y * y) - s;
}

double trigamma_oracle(double x) {
  double s = 0.0;
  for (int k = kShiftN - 1; k >= 0; --k) s += 1.0 / ((x + k) * (x + k));
  const double y = x + kShiftN;
  return s + 1.0 / y + 0.5 / (y * y) + 1.0 / (6.0 * y * y * y);
}

double tetragamma_oracle(double x) {
  double s = 0.0;
  for (int k = kShiftN - 1; k >= 0; --k) s += 1.0 / ((x + k) * (x + k) * (x + k));
  const double y = x + kShiftN;
  return -2.0 * s - 1.0 / (y * y) - 1.0 / (y * y * y) - 0.5 / (y * y * y * y);
}

// Composite Simpson on [a, b] with n (even) panels.
template <class F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// exp(x) E1(x) = int_0^inf exp(-x (e^v - 1)) dv.
double exp_e1_oracle(double x) {
  const double vmax = std::log(1.0 + 800.0 / x);
  return simpson([x](double v) { return std::exp(-x * std::expm1(v)); }, 0.0, vmax, 200000);
}

// Phi(-y) / phi(y) = int_0^inf exp(-y t - t^2 / 2) dt.
double upper_mills_oracle(double y) {
  const double tmax = std::max(40.0, 800.0 / std::max(y, 1.0));
  return simpson([y](double t) { return std::exp(-y * t - 0.5 * t * t); }, 0.0, tmax, 400000);
}

double log_mills_oracle(double x) {
  if (x < -3.0) return std::log(upper_mills_oracle(-x));
  return std::log(0.5 * std::erfc(-x / std::sqrt(2.0))) + 0.5 * x * x + 0.5 * std::log(2.0 * M_PI);
}

Mat expm_eigen_oracle(const Mat& m) {
  const SymmetricEigen e = jacobi_eigen(m);
  Vec ex = e.values.array().exp();
  return e.vectors * ex.asDiagonal() * e.vectors.transpose();
}

}  // namespace

TEST_CASE("cholesky of the identity is the identity") {
  CHECK(max_abs(cholesky(Mat::Identity(3, 3)) - Mat::Identity(3, 3)) == 0.0);
}

TEST_CASE("cholesky of a 2x2 matches hand elimination") {
  Mat m(2, 2);
  m << 4, 2, 2, 3;
  const Mat L = cholesky(m);
  Mat expect(2, 2);
  expect << 2, 0, 1, std::sqrt(2.0);
  CHECK(max_abs(L - expect) < 1e-15);
  CHECK(max_abs(L * L.transpose() - m) < 1e-14);
}

TEST_CASE("cholesky reports the failing pivot row") {
  Mat m(2, 2);
  m << 1, 2, 2, 1;
  try {
    cholesky(m);
    FAIL("expected NotPositiveDefinite");
  } catch (const NotPositiveDefinite& e) {
    CHECK(e.row() == 1);
  }
}

TEST_CASE("cholesky round trip on random SPD matrices") {
  RngStream rng(11, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const long d = 1 + trial % 8;
    const Mat m = random_spd(rng, d, 1e-3);
    const Mat L = cholesky(m);
    CHECK(max_abs(L * L.transpose() - m) <= 1e-10 * max_abs(m));
    for (long i = 0; i < d; ++i) CHECK(L(i, i) > 0.0);
    for (long i = 0; i < d; ++i) {
      for (long j = i + 1; j < d; ++j) CHECK(L(i, j) == 0.0);
    }
  }
}

TEST_CASE("SPDMatrix stores a symmetric copy") {
  RngStream rng(12, 0);
  Mat m = random_spd(rng, 4);
  m(0, 1) += 1e-14;
  const SPDMatrix s(m);
  for (long i = 0; i < 4; ++i) {
    for (long j = 0; j < 4; ++j) CHECK(s.data()(i, j) == s.data()(j, i));
  }
}

TEST_CASE("solve_spd examples and residuals") {
  Vec b(2);
  b << 3, 4;
  CHECK(max_abs(solve_spd(SPDMatrix::identity(2), b) - b) == 0.0);
  Mat d(2, 2);
  d << 4, 0, 0, 2;
  Vec b2(2);
  b2 << 8, 2;
  Vec x = solve_spd(SPDMatrix(d), b2);
  CHECK(x(0) == doctest::Approx(2.0));
  CHECK(x(1) == doctest::Approx(1.0));

  RngStream rng(13, 0);
  for (int t = 0; t < 20; ++t) {
    const SPDMatrix m(random_spd(rng, 5));
    const Vec r = random_vector(rng, 5);
    const Vec sol = solve_spd(m, r);
    CHECK((m.data() * sol - r).norm() <= 1e-9 * r.norm());
    const Mat R = random_matrix(rng, 5, 3);
    CHECK(max_abs(m.data() * solve_spd(m, R) - R) <= 1e-9 * max_abs(R));
  }
  CHECK_THROWS_AS(solve_spd(SPDMatrix::identity(2), Vec(Vec::Zero(3))), DimensionMismatch);
}

TEST_CASE("log determinant and inverse") {
  RngStream rng(14, 0);
  const Mat m = random_spd(rng, 4);
  const SPDMatrix s(m);
  const SymmetricEigen e = jacobi_eigen(m);
  CHECK(s.log_det() == doctest::Approx(e.values.array().log().sum()).epsilon(1e-12));
  CHECK(max_abs(s.inverse() * m - Mat::Identity(4, 4)) < 1e-10);
}

TEST_CASE("min_eigenvalue examples") {
  CHECK(min_eigenvalue(Mat::Identity(4, 4)) == doctest::Approx(1.0).epsilon(1e-12));
  Mat d = Mat::Zero(3, 3);
  d.diagonal() << 3, -2, 5;
  CHECK(min_eigenvalue(d) == doctest::Approx(-2.0).epsilon(1e-12));
  Mat m(2, 2);
  m << 2, 1, 1, 2;
  CHECK(std::fabs(min_eigenvalue(m) - 1.0) < 1e-8);
}

TEST_CASE("jacobi eigenvectors reconstruct the matrix") {
  RngStream rng(15, 0);
  for (int t = 0; t < 10; ++t) {
    const Mat m = random_symmetric(rng, 6, 3.0);
    const SymmetricEigen e = jacobi_eigen(m);
    const Mat back = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    CHECK(max_abs(back - m) < 1e-10);
    for (long i = 1; i < 6; ++i) CHECK(e.values(i - 1) <= e.values(i));
  }
}

TEST_CASE("matrix exponential examples") {
  CHECK(max_abs(matrix_exponential(Mat::Zero(3, 3)) - Mat::Identity(3, 3)) == 0.0);
  Mat d = Mat::Zero(2, 2);
  d(0, 0) = 1.0;
  const Mat ed = matrix_exponential(d);
  CHECK(ed(0, 0) == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  CHECK(ed(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::fabs(ed(0, 1)) < 1e-15);
  Mat h(2, 2);
  h << 0, 0.3, 0.3, 0;
  const Mat eh = matrix_exponential(h);
  CHECK(eh(0, 0) == doctest::Approx(std::cosh(0.3)).epsilon(1e-14));
  CHECK(eh(0, 1) == doctest::Approx(std::sinh(0.3)).epsilon(1e-14));
}

TEST_CASE("matrix exponential agrees with the eigen-decomposition oracle") {
  RngStream rng(16, 0);
  for (int t = 0; t < 20; ++t) {
    const Mat m = random_symmetric(rng, 4, 0.2 + 0.3 * t);
    const Mat ref = expm_eigen_oracle(m);
    CHECK(max_abs(matrix_exponential(m) - ref) <= 1e-10 * max_abs(ref));
  }
}

TEST_CASE("matrix exponential group law") {
  RngStream rng(17, 0);
  for (int t = 0; t < 20; ++t) {
    Mat m = random_symmetric(rng, 3);
    m *= (0.25 * (t % 20)) / std::max(1e-12, m.norm());
    const Mat p = matrix_exponential(m) * matrix_exponential(-m);
    CHECK(max_abs(p - Mat::Identity(3, 3)) < 1e-8);
  }
}

TEST_CASE("sym_sqrt squares back") {
  RngStream rng(18, 0);
  const Mat m = random_spd(rng, 5);
  const Mat r = sym_sqrt(m);
  CHECK(max_abs(r * r - m) < 1e-10 * max_abs(m));
  CHECK(max_abs(r - r.transpose()) < 1e-12);
}

TEST_CASE("polygamma pinned values") {
  CHECK(std::fabs(digamma(1.0) + 0.57721566490153286) < 1e-10);
  CHECK(std::fabs(trigamma(1.0) - M_PI * M_PI / 6.0) < 1e-10);
  CHECK(std::fabs(digamma_oracle(1.0) + 0.57721566490153286) < 1e-10);
  for (double x : {0.5, 2.0, 7.3}) CHECK(std::fabs(digamma(x + 1) - digamma(x) - 1.0 / x) < 1e-12);
}

TEST_CASE("polygamma against brute-force sums") {
  for (int i = 0; i < 20; ++i) {
    const double x = 0.05 + 1.7 * i + 0.013 * i * i;
    CHECK(std::fabs(digamma(x) - digamma_oracle(x)) < 1e-10);
    CHECK(std::fabs(trigamma(x) - trigamma_oracle(x)) < 1e-10);
    CHECK(std::fabs(tetragamma(x) - tetragamma_oracle(x)) < 1e-10);
  }
}

TEST_CASE("polygamma finite-difference consistency") {
  const double h = 1e-4;
  for (double x : {0.7, 2.0, 11.0}) {
    CHECK(std::fabs((digamma(x + h) - digamma(x - h)) / (2 * h) - trigamma(x)) < 1e-5);
    CHECK(std::fabs((trigamma(x + h) - trigamma(x - h)) / (2 * h) - tetragamma(x)) < 1e-5);
  }
}

TEST_CASE("polygamma and log_gamma reject non-positive input") {
  CHECK_THROWS_AS(digamma(0.0), DomainError);
  CHECK_THROWS_AS(trigamma(-1.0), DomainError);
  CHECK_THROWS_AS(tetragamma(0.0), DomainError);
  CHECK_THROWS_AS(log_gamma(0.0), DomainError);
  CHECK_THROWS_AS(exp_e1(0.0), DomainError);
}

TEST_CASE("log_gamma values") {
  CHECK(std::fabs(log_gamma(1.0)) < 1e-12);
  CHECK(std::fabs(log_gamma(0.5) - 0.5 * std::log(M_PI)) < 1e-10);
  for (double x : {1.5, 4.0}) CHECK(std::fabs(log_gamma(x + 1) - log_gamma(x) - std::log(x)) < 1e-12);
  for (int i = 0; i < 20; ++i) {
    const double x = 0.01 + 3.3 * i;
    CHECK(std::fabs(log_gamma(x) - std::lgamma(x)) < 1e-10 * std::max(1.0, std::fabs(std::lgamma(x))));
  }
}

TEST_CASE("log_mills_ratio values") {
  CHECK(std::fabs(log_mills_ratio(0.0) - 0.2257913526447274) < 1e-12);
  CHECK(std::isfinite(log_mills_ratio(-30.0)));
  const double phi5 = 1.0 - 0.5 * std::erfc(5.0 / std::sqrt(2.0));
  CHECK(rel_err(log_mills_ratio(5.0), std::log(phi5) + 12.5 + 0.5 * std::log(2 * M_PI)) < 1e-12);
  for (int i = 0; i < 20; ++i) {
    const double x = -40.0 + 80.0 * i / 19.0;
    CHECK(rel_err(log_mills_ratio(x), log_mills_oracle(x)) < 1e-9);
  }
}

TEST_CASE("log_ndtr in the deep left tail") {
  const double x = -30.0;
  const double expect = std::log(upper_mills_oracle(30.0)) - 450.0 - 0.5 * std::log(2 * M_PI);
  CHECK(rel_err(log_ndtr(x), expect) < 1e-10);
  CHECK(rel_err(log_ndtr(-1.0), std::log(0.5 * std::erfc(1.0 / std::sqrt(2.0)))) < 1e-13);
}

TEST_CASE("exp_e1 values") {
  CHECK(rel_err(exp_e1(1.0), 0.5963473623231940) < 1e-9);
  CHECK(rel_err(exp_e1_oracle(1.0), 0.5963473623231940) < 1e-10);
  const double x = 150.0;
  double s = 1.0, term = 1.0;
  for (int n = 1; n <= 5; ++n) {
    term *= -n / x;
    s += term;
  }
  CHECK(rel_err(exp_e1(x), s / x) < 1e-6);
  CHECK(std::fabs(exp_e1(1e4) * 1e4 - 1.0) < 1e-4);
  for (int i = 0; i < 20; ++i) {
    const double xi = 0.02 * std::pow(1.45, i);
    CHECK(rel_err(exp_e1(xi), exp_e1_oracle(xi)) < 1e-9);
  }
}

TEST_CASE("exp_e1 bracketing bound and monotone tail") {
  double prev = 0.0;
  for (double x : {0.01, 0.1, 1.0, 5.0, 50.0, 99.0, 101.0, 150.0, 1000.0}) {
    const double v = exp_e1(x);
    CHECK(v > 1.0 / (x + 1.0));
    CHECK(v < 1.0 / x);
    CHECK(v * x > prev);
    prev = v * x;
  }
}

TEST_CASE("rng streams are reproducible and distinct") {
  RngStream a(5, 3), b(5, 3), c(5, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t x = a.next_u64();
    CHECK(x == b.next_u64());
    differs = differs || x != c.next_u64();
  }
  CHECK(differs);
  RngStream s(5, 0);
  RngStream t = s.substream(9);
  RngStream u = s.substream(9);
  CHECK(t.normal() == u.normal());
}

TEST_CASE("uniform draws lie strictly inside the unit interval") {
  RngStream r(1, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    CHECK_UNARY(u > 0.0 && u < 1.0);
  }
}

TEST_CASE("gamma sampler moments") {
  RngStream r(21, 0);
  const int n = 1000000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = sample_gamma(r, 3.0, 2.0);
    s += z;
    s2 += z * z;
  }
  const double mean = s / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::fabs(mean - 1.5) < 3 * se);
  CHECK(std::fabs(s2 / n - mean * mean - 0.75) < 0.01);
  RngStream r2(22, 0);
  double small = 0.0;
  for (int i = 0; i < 200000; ++i) small += sample_gamma(r2, 0.3, 1.0);
  CHECK(small / 200000 == doctest::Approx(0.3).epsilon(0.02));
  CHECK_THROWS_AS(sample_gamma(r, -1.0, 1.0), DomainError);
}

TEST_CASE("inverse Gaussian sampler mean") {
  RngStream r(23, 0);
  const double alpha = 4.0, beta = 2.0;
  const int n = 1000000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = sample_inverse_gaussian(r, alpha, beta);
    CHECK_UNARY(z > 0.0);
    s += z;
    s2 += z * z;
  }
  const double mean = s / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::fabs(mean - 1.0 / beta) < 3 * se);
  CHECK_THROWS_AS(sample_inverse_gaussian(r, 0.0, 1.0), DomainError);
}

TEST_CASE("categorical sampler") {
  RngStream r(24, 0);
  for (int i = 0; i < 1000; ++i) CHECK(sample_categorical(r, {1.0, 0.0, 0.0}) == 0);
  std::vector<int> counts(3, 0);
  for (int i = 0; i < 30000; ++i) ++counts[sample_categorical(r, {0.2, 0.3, 0.5})];
  CHECK(counts[0] / 30000.0 == doctest::Approx(0.2).epsilon(0.05));
  CHECK(counts[2] / 30000.0 == doctest::Approx(0.5).epsilon(0.03));
  CHECK_THROWS_AS(sample_categorical(r, {0.5, 0.6}), DomainError);
}

TEST_CASE("normal sampler moments") {
  RngStream r(25, 0);
  const Vec v = sample_std_normal(r, 400000);
  CHECK(std::fabs(v.mean()) < 3.0 / std::sqrt(400000.0));
  CHECK(v.squaredNorm() / 400000.0 == doctest::Approx(1.0).epsilon(0.01));
}
