#include "checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>

#include <Eigen/Dense>

#include "iblr/families.hpp"
#include "iblr/linalg.hpp"
#include "iblr/manifold.hpp"
#include "iblr/models.hpp"
#include "iblr/optimizers.hpp"
#include "iblr/rng.hpp"
#include "iblr/special.hpp"

namespace iblr::checks {

namespace {

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

CheckRow make_row(const char* suite, std::string name, bool pass, std::string detail) {
  return CheckRow{suite, std::move(name), pass, std::move(detail)};
}

double rel_err(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); }

Mat random_matrix(RngStream& rng, long r, long c) {
  Mat m(r, c);
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

Vec random_vector(RngStream& rng, long n) {
  Vec v(n);
  for (long i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

Mat random_spd(RngStream& rng, long d, double eps) {
  const Mat a = random_matrix(rng, d, d);
  return a.transpose() * a + eps * Mat::Identity(d, d);
}

// Random orthogonal frame with at least one eigenvalue of each sign.
Mat random_indefinite(RngStream& rng, long d) {
  const Mat q = Eigen::HouseholderQR<Mat>(random_matrix(rng, d, d)).householderQ();
  Vec ev = random_vector(rng, d);
  ev(0) = -std::fabs(ev(0)) - 0.1;
  ev(1) = std::fabs(ev(1)) + 0.1;
  return symmetrize(q * ev.asDiagonal() * q.transpose());
}

Mat column(const Vec& v) { return Mat(v); }

// ---- brute-force special-function oracles ----

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

// Truncated alternating asymptotic series (1/x) sum_n (-1)^n n! / x^n.
double exp_e1_series(double x, int terms) {
  double s = 1.0, term = 1.0;
  for (int n = 1; n <= terms; ++n) {
    term *= -n / x;
    s += term;
  }
  return s / x;
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

// Worst error of f against an oracle over 20 points.
struct Sweep {
  double worst = 0.0;
  double at = 0.0;
};

Sweep sweep(const std::function<double(int)>& point, const std::function<double(double)>& f,
            const std::function<double(double)>& oracle, bool relative) {
  Sweep s;
  for (int i = 0; i < 20; ++i) {
    const double x = point(i);
    const double a = f(x), b = oracle(x);
    const double e = relative ? rel_err(a, b) : std::fabs(a - b);
    if (!(e <= s.worst)) {
      s.worst = e;
      s.at = x;
    }
  }
  return s;
}

CheckRow sweep_row(const char* suite, const char* name, const Sweep& s, double tol, bool relative) {
  return make_row(suite, name, s.worst <= tol,
                  fmt("20 points, max %s error %.3g at x = %.6g (tol %.0e)", relative ? "relative" : "absolute",
                      s.worst, s.at, tol));
}

// ---- Gaussian geometry oracles built on Eigen's symmetric eigensolver ----

Mat eigen_apply(const Mat& m, double (*fn)(double)) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  const Vec v = es.eigenvalues().unaryExpr(fn);
  return es.eigenvectors() * v.asDiagonal() * es.eigenvectors().transpose();
}

double exp_fn(double x) { return std::exp(x); }
double sqrt_fn(double x) { return std::sqrt(x); }

// U Exp(-t U^{-1} G U^{-1}) U with U = S^{1/2}.
Mat geodesic_oracle(const Mat& S, const Mat& G, double t) {
  const Mat U = eigen_apply(S, sqrt_fn);
  const Mat Ui = U.inverse();
  return U * eigen_apply(symmetrize(-t * Ui * G * Ui), exp_fn) * U;
}

}  // namespace

Rows special_functions() {
  const char* suite = "special-functions";
  Rows rows;
  auto poly_point = [](int i) { return 0.05 + 1.7 * i + 0.013 * i * i; };
  rows.push_back(sweep_row(suite, "digamma", sweep(poly_point, digamma, digamma_oracle, false), 1e-10, false));
  rows.push_back(sweep_row(suite, "trigamma", sweep(poly_point, trigamma, trigamma_oracle, false), 1e-10, false));
  rows.push_back(
      sweep_row(suite, "tetragamma", sweep(poly_point, tetragamma, tetragamma_oracle, false), 1e-10, false));
  rows.push_back(sweep_row(suite, "log_gamma",
                           sweep([](int i) { return 0.01 + 3.3 * i; }, log_gamma,
                                 [](double x) { return std::lgamma(x); }, false),
                           1e-10, false));
  rows.push_back(sweep_row(suite, "exp_e1",
                           sweep([](int i) { return 0.02 * std::pow(1.45, i); }, exp_e1, exp_e1_oracle, true), 1e-9,
                           true));
  const double e150 = rel_err(exp_e1(150.0), exp_e1_series(150.0, 5));
  rows.push_back(make_row(suite, "exp_e1_asymptotic", e150 <= 1e-6,
                          fmt("x = 150 against the 5-term series, relative error %.3g (tol 1e-06)", e150)));
  rows.push_back(sweep_row(suite, "log_mills_ratio",
                           sweep([](int i) { return -40.0 + 80.0 * i / 19.0; }, log_mills_ratio, log_mills_oracle,
                                 true),
                           1e-9, true));
  return rows;
}

Rows christoffel_agreement() {
  const char* suite = "christoffel";
  struct Case {
    std::string label;
    std::shared_ptr<Family> f;
    std::size_t block;
  };
  std::vector<Case> cases;
  std::shared_ptr<Family> gamma = make_gamma(2.0, 3.0);
  std::shared_ptr<Family> expo = make_exponential(2.0);
  std::shared_ptr<Family> ig = make_inverse_gaussian(4.0, 2.0);
  std::shared_ptr<Family> gauss = make_gaussian_full(Vec::Zero(1), Mat::Identity(1, 1));
  cases.push_back({"gamma(2,3) block 1", gamma, 0});
  cases.push_back({"gamma(2,3) block 2", gamma, 1});
  cases.push_back({"exponential(2)", expo, 0});
  cases.push_back({"inverse_gaussian(4,2) block 1", ig, 0});
  cases.push_back({"inverse_gaussian(4,2) block 2", ig, 1});
  cases.push_back({"gaussian(0,1) mean", gauss, 0});
  cases.push_back({"gaussian(0,1) precision", gauss, 1});

  Rows rows;
  RngStream rng(2024, 0);
  for (const Case& c : cases) {
    const BlockedPoint p = c.f->blocked_point();
    const double analytic = c.f->christoffel_first_kind(c.block)(0, 0, 0);

    // Gamma_{1,11} = (1/2) dF/dlambda for a one-coordinate block.
    const double lam = p.values[c.block](0, 0);
    const double h = 1e-5 * std::max(1.0, std::fabs(lam));
    BlockedPoint up = p, dn = p;
    up.values[c.block](0, 0) += h;
    dn.values[c.block](0, 0) -= h;
    const double fd =
        0.25 * (c.f->with_point(up)->fim_block(c.block)(0, 0) - c.f->with_point(dn)->fim_block(c.block)(0, 0)) / h;
    const double diff = std::fabs(analytic - fd);
    rows.push_back(make_row(suite, c.label + " vs fisher differences", diff <= 1e-6 * std::fabs(fd),
                            fmt("analytic %.10g, differences %.10g, relative gap %.3g (tol 1e-06)", analytic, fd,
                                diff / std::max(std::fabs(fd), 1e-300))));

    Vec theta(static_cast<long>(p.size()));
    for (std::size_t b = 0; b < p.size(); ++b) theta(static_cast<long>(b)) = p.values[b](0, 0);
    const ChristoffelEstimate e = christoffel_mc(c.f->parametric_density(), theta, {c.block}, 1000000, rng);
    const double mc = e.value(0, 0, 0), se = e.se(0, 0, 0);
    const double z = std::fabs(analytic - mc) / se;
    rows.push_back(make_row(suite, c.label + " vs monte carlo", std::fabs(analytic - mc) <= 3.0 * se,
                            fmt("analytic %.6g, estimate %.6g, se %.2g, |gap| / se = %.2f (tol 3)", analytic, mc, se,
                                z)));
  }
  return rows;
}

Rows pd_preservation() {
  const char* suite = "retraction";
  RngStream rng(101, 0);
  Rows rows;
  for (long d : {2L, 5L, 10L}) {
    std::size_t trials = 0, failures = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (double t : {0.1, 0.5, 1.0, 2.0}) {
      for (int k = 0; k < 1000; ++k) {
        const Mat S = random_spd(rng, d, std::exp(rng.normal()));
        const Mat G = std::exp(rng.normal()) * random_indefinite(rng, d);
        auto f = make_gaussian_full(random_vector(rng, d), S);
        const BlockedTangent g{{column(random_vector(rng, d)), G}};
        const StepResult r = try_retraction_step(f->blocked_point(), g, t, f->christoffel_contraction());
        const double lmin = min_eigenvalue(r.point.values[1]);
        ++trials;
        if (!r.feasible || !(lmin > 0.0)) ++failures;
        worst = std::min(worst, lmin / min_eigenvalue(S));
      }
    }
    rows.push_back(make_row(suite, fmt("pd_preservation d=%ld", d), failures == 0,
                            fmt("%zu trials over t in {0.1, 0.5, 1, 2}, %zu not positive definite, "
                                "min lambda_min(S_new) / lambda_min(S) = %.3g",
                                trials, failures, worst)));
  }
  return rows;
}

Rows half_s_identity() {
  const char* suite = "theorems";
  RngStream rng(102, 0);
  double worst = 0.0;
  std::size_t trials = 0;
  for (long d : {2L, 5L, 10L}) {
    for (double t : {0.1, 0.5, 1.0, 2.0}) {
      for (int k = 0; k < 250; ++k) {
        const Mat S = random_spd(rng, d, 0.1);
        const Mat G = 3.0 * symmetrize(random_matrix(rng, d, d));
        auto f = make_gaussian_full(Vec::Zero(d), S);
        const BlockedTangent g{{Mat::Zero(d, 1), G}};
        const Mat updated = retraction_step(f->blocked_point(), g, t, f->christoffel_contraction()).values[1];
        const Mat L = Eigen::LLT<Mat>(S).matrixL();
        const Mat U = L.transpose() - t * L.triangularView<Eigen::Lower>().solve(G);
        const Mat half = 0.5 * (S + U.transpose() * U);
        worst = std::max(worst, (updated - half).cwiseAbs().maxCoeff() / std::max(1.0, half.cwiseAbs().maxCoeff()));
        ++trials;
      }
    }
  }
  return {make_row(suite, "half_s_plus_utu", worst <= 1e-10,
                   fmt("%zu trials, max scaled gap %.3g (tol 1e-10)", trials, worst))};
}

Rows positivity() {
  const char* suite = "retraction";
  RngStream rng(103, 0);
  using Maker = std::function<std::unique_ptr<Family>(RngStream&)>;
  auto lognormal = [](RngStream& r) { return std::exp(2.0 * r.normal()); };
  const std::vector<std::pair<std::string, Maker>> makers = {
      {"gamma", [&](RngStream& r) { return make_gamma(lognormal(r), lognormal(r)); }},
      {"exponential", [&](RngStream& r) { return make_exponential(lognormal(r)); }},
      {"inverse_gaussian", [&](RngStream& r) { return make_inverse_gaussian(lognormal(r), lognormal(r)); }},
      {"gaussian_diag",
       [&](RngStream& r) {
         Vec s(3);
         for (long i = 0; i < 3; ++i) s(i) = lognormal(r);
         return make_gaussian_diag(random_vector(r, 3), s);
       }},
  };
  Rows rows;
  for (const auto& [name, make] : makers) {
    std::size_t failures = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 1000; ++k) {
      auto f = make(rng);
      const BlockedPoint p = f->blocked_point();
      const double t = 2.0 * (1.0 - rng.uniform());
      BlockedTangent g;
      for (std::size_t b = 0; b < p.size(); ++b) {
        g.blocks.push_back(std::exp(2.0 * rng.normal()) * random_matrix(rng, p.values[b].rows(), p.values[b].cols()));
      }
      const StepResult r = try_retraction_step(p, g, t, f->christoffel_contraction());
      bool ok = r.feasible;
      for (std::size_t b = 0; b < p.size(); ++b) {
        if (p.constraints[b].kind != BlockKind::PositiveScalar) continue;
        const double v = r.point.values[b](0, 0);
        ok = ok && v > 0.0;
        worst = std::min(worst, v / p.values[b](0, 0));
      }
      if (!ok) ++failures;
    }
    rows.push_back(make_row(suite, "positivity " + name, failures == 0,
                            fmt("1000 trials, %zu with a non-positive block, min new / old = %.3g", failures, worst)));
  }
  return rows;
}

Rows geodesic_order() {
  const char* suite = "retraction";
  RngStream rng(104, 0);
  double r2_lo = 1e300, r2_hi = 0.0, r1_lo = 1e300, r1_hi = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Mat S = random_spd(rng, 3, 1.0);
    // Unit spectral norm in the frame where S is the identity, so t sets the scale.
    const Mat Ui = eigen_apply(S, sqrt_fn).inverse();
    Mat G = symmetrize(random_matrix(rng, 3, 3));
    const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(symmetrize(Ui * G * Ui)).eigenvalues();
    G /= std::max(std::fabs(ev(0)), std::fabs(ev(2)));
    auto f = make_gaussian_full(Vec::Zero(3), S);
    const BlockedPoint p = f->blocked_point();
    const BlockedTangent g{{Mat::Zero(3, 1), G}};
    auto gaps = [&](double t) {
      const Mat exact = geodesic_oracle(S, G, t);
      const Mat second = try_retraction_step(p, g, t, f->christoffel_contraction()).point.values[1];
      const Mat first = ngd_step(p, g, t).point.values[1];
      return std::pair<double, double>{(second - exact).cwiseAbs().maxCoeff(), (first - exact).cwiseAbs().maxCoeff()};
    };
    for (double t : {0.4, 0.2}) {
      const auto [s_full, f_full] = gaps(t);
      const auto [s_half, f_half] = gaps(t / 2);
      r2_lo = std::min(r2_lo, s_full / s_half);
      r2_hi = std::max(r2_hi, s_full / s_half);
      r1_lo = std::min(r1_lo, f_full / f_half);
      r1_hi = std::max(r1_hi, f_full / f_half);
    }
  }
  Rows rows;
  rows.push_back(make_row(suite, "retraction_cubic_order", r2_lo >= 6.5 && r2_hi <= 9.5,
                          fmt("d = 3, 20 tangents, t in {0.4, 0.2}: error ratio t vs t/2 in [%.3f, %.3f] "
                              "(required [6.5, 9.5])",
                              r2_lo, r2_hi)));
  rows.push_back(make_row(suite, "ngd_quadratic_order", r1_lo >= 3.4 && r1_hi <= 4.6,
                          fmt("d = 3, 20 tangents, t in {0.4, 0.2}: error ratio t vs t/2 in [%.3f, %.3f] "
                              "(required [3.4, 4.6])",
                              r1_lo, r1_hi)));
  return rows;
}

Rows bonnet_price() {
  const char* suite = "theorems";
  RngStream rng(105, 0);
  const long d = 4;
  const Mat A = random_spd(rng, d, 0.5);
  const Vec b = random_vector(rng, d);
  const auto model = quadratic_model(A, b);
  const Vec mu = random_vector(rng, d);
  const Mat S = random_spd(rng, d, 0.5);
  const Vec exact_mu = A * mu + b;
  const Mat exact_sigma = 0.5 * A;
  Rows rows;
  for (Estimator est : {Estimator::Rep, Estimator::Hess}) {
    const GaussianLossGradients lg = gaussian_loss_gradients(mu, SPDMatrix(S), *model, rng, 100000, est);
    bool ok = true;
    const bool hess = est == Estimator::Hess;
    double worst_mu = 0.0, worst_sigma = 0.0;
    auto within = [](double est_v, double exact_v, double se) {
      return std::fabs(est_v - exact_v) <= 3.0 * se + 1e-10 * std::max(1.0, std::fabs(exact_v));
    };
    for (long i = 0; i < d; ++i) {
      ok = ok && within(lg.grad_mu(i), exact_mu(i), lg.se_mu(i));
      worst_mu = std::max(worst_mu, std::fabs(lg.grad_mu(i) - exact_mu(i)) / lg.se_mu(i));
      for (long j = 0; j < d; ++j) {
        ok = ok && within(lg.grad_sigma(i, j), exact_sigma(i, j), lg.se_sigma(i, j));
        const double gap = std::fabs(lg.grad_sigma(i, j) - exact_sigma(i, j));
        worst_sigma = std::max(worst_sigma, hess ? gap : gap / lg.se_sigma(i, j));
      }
    }
    rows.push_back(make_row(suite, std::string("bonnet_price ") + estimator_name(est), ok,
                            fmt("d = 4, 1e5 draws: max |gap| / se = %.2f for the mean, %s %.3g for the covariance",
                                worst_mu, hess ? "max |gap| (constant Hessian) =" : "max |gap| / se =", worst_sigma)));
  }
  return rows;
}

Rows adam_positivity() {
  const char* suite = "theorems";
  RngStream rng(106, 0);
  std::size_t nonpositive = 0;
  double worst = 0.0;
  const long d = 4;
  for (int k = 0; k < 100000; ++k) {
    const double r2 = rng.uniform();
    const double a = 1.0 - r2;
    Vec s(d), gs(d);
    for (long i = 0; i < d; ++i) s(i) = std::exp(2.0 * rng.normal());
    // Random, exactly cancelling, and overwhelming negative directions.
    gs(0) = std::exp(2.0 * rng.normal()) * rng.normal();
    gs(1) = -s(1) / a;
    gs(2) = -1e6 * s(2) / a;
    gs(3) = -std::exp(3.0 * rng.normal()) * s(3) / a;
    const Vec out = adam_like_s_update(s, gs, r2, true);
    for (long i = 0; i < d; ++i) {
      const double u = s(i) + a * gs(i);
      const double oracle = (s(i) * s(i) + u * u) / (2.0 * s(i));
      if (!(out(i) > 0.0)) ++nonpositive;
      worst = std::max(worst, rel_err(out(i), oracle));
    }
  }
  return {make_row(suite, "adam_s_positivity", nonpositive == 0 && worst <= 1e-12,
                   fmt("1e5 steps x 4 coordinates, %zu non-positive, max relative gap to (s^2 + (s + a g)^2) / (2 s) "
                       "= %.3g (tol 1e-12)",
                       nonpositive, worst))};
}

Rows counterexample() {
  const char* suite = "counterexample";
  Rows rows;
  const UnivariateStep song = song_step_univariate(0.0, 1.0, 3.0, 0.0, 1.0, UnivariateParam::MeanStd);
  const UnivariateStep ours = blockwise_step_univariate(0.0, 1.0, 3.0, 0.0, 1.0, UnivariateParam::MeanStd);
  rows.push_back(make_row(suite, "pinned (mu, sigma) = (0, 1), g = (3, 0), t = 1",
                          std::fabs(song.scale + 1.25) <= 1e-14 && !song.feasible && ours.scale == 1.0 && ours.feasible,
                          fmt("full second-order sigma = %.6g, block-wise sigma = %.6g", song.scale, ours.scale)));
  RngStream rng(107, 0);
  for (UnivariateParam kind : {UnivariateParam::MeanStd, UnivariateParam::MeanVariance}) {
    std::size_t song_bad = 0, ours_bad = 0;
    for (int k = 0; k < 100; ++k) {
      const double mu = rng.normal(), scale = std::exp(rng.normal());
      const double gm = 3.0 * rng.normal(), gs = 3.0 * rng.normal(), t = 2.0 * (1.0 - rng.uniform());
      if (!song_step_univariate(mu, scale, gm, gs, t, kind).feasible) ++song_bad;
      const UnivariateStep b = blockwise_step_univariate(mu, scale, gm, gs, t, kind);
      if (!b.feasible || !(b.scale > 0.0)) ++ours_bad;
    }
    const char* label = kind == UnivariateParam::MeanStd ? "(mu, sigma)" : "(mu, v)";
    rows.push_back(make_row(suite, fmt("random draws %s", label), song_bad >= 1 && ours_bad == 0,
                            fmt("100 draws: full second-order update infeasible %zu times, block-wise %zu times",
                                song_bad, ours_bad)));
  }
  return rows;
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"special-functions", "christoffel", "retraction", "theorems",
                                                  "counterexample"};
  return names;
}

bool is_suite(const std::string& name) {
  if (name == "all") return true;
  const auto& n = suite_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

Rows run_suite(const std::string& name) {
  auto append = [](Rows& out, Rows more) { out.insert(out.end(), more.begin(), more.end()); };
  Rows rows;
  if (name == "special-functions") return special_functions();
  if (name == "christoffel") return christoffel_agreement();
  if (name == "retraction") {
    append(rows, pd_preservation());
    append(rows, positivity());
    append(rows, geodesic_order());
    return rows;
  }
  if (name == "theorems") {
    append(rows, half_s_identity());
    append(rows, bonnet_price());
    append(rows, adam_positivity());
    return rows;
  }
  if (name == "counterexample") return counterexample();
  if (name == "all") {
    for (const std::string& s : suite_names()) append(rows, run_suite(s));
    return rows;
  }
  throw std::invalid_argument("unknown suite '" + name + "'");
}

bool all_pass(const Rows& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
}

std::string format_table(const Rows& rows) {
  std::size_t ws = 5, wn = 5;
  for (const CheckRow& r : rows) {
    ws = std::max(ws, r.suite.size());
    wn = std::max(wn, r.name.size());
  }
  auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w - s.size(), ' '); };
  std::string out = pad("suite", ws) + "  " + pad("check", wn) + "  result  detail\n";
  out += std::string(ws, '-') + "  " + std::string(wn, '-') + "  ------  ------\n";
  std::size_t passed = 0;
  for (const CheckRow& r : rows) {
    out += pad(r.suite, ws) + "  " + pad(r.name, wn) + "  " + (r.pass ? "PASS  " : "FAIL  ") + "  " + r.detail + "\n";
    passed += r.pass ? 1 : 0;
  }
  out += fmt("%zu of %zu checks passed\n", passed, rows.size());
  return out;
}

}  // namespace iblr::checks
