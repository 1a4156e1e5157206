#include <doctest.h>

#include <cmath>
#include <vector>

#include "iblr/errors.hpp"
#include "iblr/families.hpp"
#include "iblr/linalg.hpp"
#include "iblr/manifold.hpp"
#include "iblr/special.hpp"
#include "test_util.hpp"

using namespace iblr;
using namespace iblr::test;

namespace {

Mat scalar_mat(double v) { return Mat::Constant(1, 1, v); }

// Closed forms at integer arguments: trigamma(2) = pi^2/6 - 1, tetragamma(2) = -2 (zeta(3) - 1).
constexpr double kPi = 3.14159265358979323846;
constexpr double kZeta3 = 1.2020569031595942854;
const double kTrigamma2 = kPi * kPi / 6.0 - 1.0;
const double kTetragamma2 = -2.0 * (kZeta3 - 1.0);

BlockedTangent tangent_of(std::vector<Mat> blocks) { return BlockedTangent{std::move(blocks)}; }

// Gaussian point (mu, S) with the given tangent on the S block only.
BlockedPoint gaussian_point(const Vec& mu, const Mat& S) { return make_gaussian_full(mu, S)->blocked_point(); }

double geodesic_gap(const Mat& S, const Mat& G, double t, bool second_order) {
  const Mat exact = gaussian_geodesic_exact(S, G, t);
  Mat approx = S - t * G;
  if (second_order) approx -= 0.5 * t * t * spd_contraction(S, G);
  return max_abs(approx - exact);
}

}  // namespace

TEST_CASE("block constraints report shapes and coordinate counts") {
  CHECK(BlockConstraint::real_vector(3).coordinate_count() == 3);
  CHECK(BlockConstraint::positive_scalar().coordinate_count() == 1);
  CHECK(BlockConstraint::spd(3).coordinate_count() == 6);
  CHECK(BlockConstraint::spd(3).cols() == 3);
  CHECK(BlockConstraint::real_vector(3).cols() == 1);
  CHECK_THROWS_AS(BlockConstraint::spd(0), ShapeMismatch);
  CHECK(std::string(block_kind_name(BlockKind::SPD)) == "spd");

  BlockedPoint p;
  p.push(BlockConstraint::spd(2), Mat::Identity(3, 3));
  CHECK_THROWS_AS(p.check_shapes(), ShapeMismatch);
}

TEST_CASE("block coordinates round trip through the upper triangle") {
  RngStream rng(11, 0);
  BlockedPoint p = gaussian_point(random_vector(rng, 3), random_spd(rng, 3));
  const Vec c = block_coordinates(p, 1);
  CHECK(c.size() == 6);
  CHECK(c(1) == p.values[1](0, 1));
  const BlockedPoint q = with_block_coordinates(p, 1, c);
  CHECK(max_abs(q.values[1] - p.values[1]) == 0.0);
}

TEST_CASE("retraction step examples") {
  SUBCASE("gamma second block") {
    auto g = make_gamma(1.0, 2.0);  // lambda = (1, 2)
    const BlockedPoint p = g->blocked_point();
    REQUIRE(p.values[1](0, 0) == doctest::Approx(2.0));
    const BlockedPoint r =
        retraction_step(p, tangent_of({scalar_mat(0.0), scalar_mat(1.0)}), 1.0, g->christoffel_contraction());
    CHECK(r.values[1](0, 0) == doctest::Approx(1.25).epsilon(1e-14));
    CHECK(r.values[0](0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("zero tangent leaves the point unchanged") {
    RngStream rng(3, 0);
    auto f = make_gaussian_full(random_vector(rng, 3), random_spd(rng, 3));
    const BlockedPoint p = f->blocked_point();
    const BlockedPoint r =
        retraction_step(p, tangent_of({Mat::Zero(3, 1), Mat::Zero(3, 3)}), 0.7, f->christoffel_contraction());
    CHECK(max_abs(r.values[0] - p.values[0]) == 0.0);
    CHECK(max_abs(r.values[1] - p.values[1]) == 0.0);
  }
  SUBCASE("one-dimensional Gaussian precision") {
    auto f = make_gaussian_full(Vec::Zero(1), Mat::Identity(1, 1));
    const BlockedPoint r = retraction_step(f->blocked_point(), tangent_of({Mat::Zero(1, 1), scalar_mat(2.0)}), 1.0,
                                           f->christoffel_contraction());
    CHECK(r.values[1](0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("an unsafe contraction is reported") {
    auto g = make_gamma(1.0, 2.0);
    const BlockedTangent tan = tangent_of({scalar_mat(0.0), scalar_mat(3.0)});
    const ChristoffelContraction none = [](const BlockedPoint&, std::size_t, const Mat& m) -> Mat {
      return Mat::Zero(m.rows(), m.cols());
    };
    CHECK_THROWS_AS(retraction_step(g->blocked_point(), tan, 1.0, none), InfeasibleResult);
    const StepResult s = try_retraction_step(g->blocked_point(), tan, 1.0, none);
    CHECK_FALSE(s.feasible);
    CHECK(s.first_infeasible_block == 1);
  }
  SUBCASE("mismatched tangent") {
    auto g = make_gamma(1.0, 2.0);
    CHECK_THROWS_AS(ngd_step(g->blocked_point(), tangent_of({scalar_mat(0.0)}), 1.0), ShapeMismatch);
  }
}

TEST_CASE("ngd step examples") {
  auto g = make_gamma(1.0, 2.0);
  const StepResult bad = ngd_step(g->blocked_point(), tangent_of({scalar_mat(0.0), scalar_mat(3.0)}), 1.0);
  CHECK(bad.point.values[1](0, 0) == doctest::Approx(-1.0));
  CHECK_FALSE(bad.feasible);

  const StepResult same = ngd_step(g->blocked_point(), tangent_of({scalar_mat(0.0), scalar_mat(0.0)}), 1.0);
  CHECK(same.feasible);
  CHECK(same.point.values[1](0, 0) == doctest::Approx(2.0));

  Mat G(2, 2);
  G << 2.0, 1.0, 1.0, 2.0;  // eigenvalues 1 and 3
  const StepResult spd = ngd_step(gaussian_point(Vec::Zero(2), Mat::Identity(2, 2)),
                                  tangent_of({Mat::Zero(2, 1), G}), 1.0);
  CHECK_FALSE(spd.feasible);
  CHECK(min_eigenvalue(spd.point.values[1]) == doctest::Approx(-2.0).epsilon(1e-10));
}

TEST_CASE("finite-difference Fisher matrix examples") {
  auto g = make_gamma(2.0, 6.0);  // lambda = (2, 3)
  const LogPartition A = g->log_partition();
  const BlockedPoint p = g->blocked_point();
  CHECK(fim_fd(A, p, 0)(0, 0) == doctest::Approx(kTrigamma2 - 0.5).epsilon(1e-6));
  CHECK(fim_fd(A, p, 1)(0, 0) == doctest::Approx(2.0 / 9.0).epsilon(1e-6));

  auto ig = make_inverse_gaussian(2.0, 2.0);  // lambda = (beta^2, alpha) = (4, 2)
  CHECK(fim_fd(ig->log_partition(), ig->blocked_point(), 0)(0, 0) == doctest::Approx(1.0 / 16.0).epsilon(1e-6));

  RngStream rng(5, 0);
  auto f = make_gaussian_full(random_vector(rng, 2), random_spd(rng, 2, 1.0));
  const Mat F = fim_fd(f->log_partition(), f->blocked_point(), 1);
  CHECK(max_abs(F - F.transpose()) <= 1e-6);
  CHECK(max_abs(F - f->fim_block(1)) <= 1e-6 * std::max(1.0, max_abs(F)));

  auto tiny = make_exponential(1e-6);
  CHECK_THROWS_AS(fim_fd(tiny->log_partition(), tiny->blocked_point(), 0), StepTooLarge);
}

TEST_CASE("third-derivative Christoffel symbols match closed forms") {
  SUBCASE("gamma first block") {
    auto g = make_gamma(2.0, 6.0);
    const BlockedPoint p = g->blocked_point();
    const Tensor3 first = christoffel_a3_fd(g->log_partition(), p, 0);
    const Tensor3 second = raise_index(first, fim_fd(g->log_partition(), p, 0));
    const double expected = (kTetragamma2 + 0.25) / (2.0 * (kTrigamma2 - 0.5));
    CHECK(second(0, 0, 0) == doctest::Approx(expected).epsilon(1e-5));
    // The contraction used by the update carries the same symbol.
    const Mat c = g->christoffel_contraction()(p, 0, scalar_mat(1.0));
    CHECK(c(0, 0) == doctest::Approx(expected).epsilon(1e-10));
  }
  SUBCASE("inverse Gaussian first block") {
    auto ig = make_inverse_gaussian(2.0, 2.0);
    const BlockedPoint p = ig->blocked_point();
    const Tensor3 second = raise_index(christoffel_a3_fd(ig->log_partition(), p, 0), fim_fd(ig->log_partition(), p, 0));
    CHECK(second(0, 0, 0) == doctest::Approx(-0.1875).epsilon(1e-5));
  }
  SUBCASE("Gaussian mean block vanishes") {
    RngStream rng(8, 0);
    auto f = make_gaussian_full(random_vector(rng, 3), random_spd(rng, 3, 1.0));
    const Tensor3 t = christoffel_a3_fd(f->log_partition(), f->blocked_point(), 0);
    for (std::size_t d = 0; d < 3; ++d)
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) CHECK(std::fabs(t(d, a, b)) <= 1e-6);
    const Mat c = f->christoffel_contraction()(f->blocked_point(), 0, random_vector(rng, 3));
    CHECK(max_abs(c) == 0.0);
  }
  SUBCASE("analytic symbols agree with differences of the analytic Fisher matrix") {
    // Gamma_{1,11} = (1/2) dF/dlambda for one-coordinate blocks.
    struct Case {
      std::unique_ptr<Family> f;
      std::size_t block;
    };
    std::vector<Case> cases;
    cases.push_back({make_gamma(2.0, 6.0), 0});
    cases.push_back({make_gamma(2.0, 6.0), 1});
    cases.push_back({make_exponential(2.0), 0});
    cases.push_back({make_inverse_gaussian(2.0, 2.0), 0});
    cases.push_back({make_inverse_gaussian(2.0, 2.0), 1});
    for (const Case& c : cases) {
      const BlockedPoint p = c.f->blocked_point();
      const double lam = p.values[c.block](0, 0);
      const double h = 1e-5 * lam;
      BlockedPoint up = p, dn = p;
      up.values[c.block](0, 0) += h;
      dn.values[c.block](0, 0) -= h;
      const double dF = (c.f->with_point(up)->fim_block(c.block)(0, 0) - c.f->with_point(dn)->fim_block(c.block)(0, 0)) /
                        (2.0 * h);
      CHECK(c.f->christoffel_first_kind(c.block)(0, 0, 0) == doctest::Approx(0.5 * dF).epsilon(1e-6));
    }
  }
}

TEST_CASE("Monte-Carlo Christoffel oracle") {
  SUBCASE("gamma second block") {
    auto g = make_gamma(2.0, 6.0);
    RngStream rng(21, 0);
    Vec theta(2);
    theta << 2.0, 3.0;
    const ChristoffelEstimate e = christoffel_mc(g->parametric_density(), theta, {1}, 200000, rng);
    CHECK(std::fabs(e.value(0, 0, 0) - (-2.0 / 27.0)) <= 3.0 * e.se(0, 0, 0));
    CHECK(e.se(0, 0, 0) < 0.01);
  }
  SUBCASE("exponential") {
    auto x = make_exponential(2.0);
    RngStream rng(22, 0);
    const ChristoffelEstimate e = christoffel_mc(x->parametric_density(), Vec::Constant(1, 2.0), {0}, 200000, rng);
    CHECK(std::fabs(e.value(0, 0, 0) - (-0.125)) <= 3.0 * e.se(0, 0, 0));
  }
  SUBCASE("univariate Gaussian in (mu, sigma)") {
    RngStream rng(23, 0);
    Vec theta(2);
    theta << 0.0, 1.0;
    const ChristoffelEstimate e =
        christoffel_mc(univariate_gaussian_density(UnivariateParam::MeanStd), theta, {0, 1}, 200000, rng);
    const Mat F = univariate_gaussian_fim(1.0, UnivariateParam::MeanStd);
    const Tensor3 raised = raise_index(e.value, F);
    const Tensor3 expected = univariate_gaussian_christoffel(1.0, UnivariateParam::MeanStd);
    CHECK(expected(1, 1, 1) == -1.0);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = 0; b < 2; ++b) {
          // F is diagonal, so raising scales each standard error by 1 / F_cc.
          const double se = e.se(c, a, b) / F(static_cast<long>(c), static_cast<long>(c));
          CHECK(std::fabs(raised(c, a, b) - expected(c, a, b)) <= 3.0 * se + 1e-12);
        }
  }
  SUBCASE("rejects degenerate requests") {
    RngStream rng(1, 0);
    CHECK_THROWS_AS(christoffel_mc(univariate_gaussian_density(UnivariateParam::MeanStd), Vec::Ones(2), {}, 10, rng),
                    DomainError);
  }
}

TEST_CASE("exact Gaussian geodesic") {
  RngStream rng(31, 0);
  const Mat S = random_spd(rng, 3);
  const Mat G = random_symmetric(rng, 3);
  CHECK(max_abs(gaussian_geodesic_exact(S, G, 0.0) - S) <= 1e-12 * max_abs(S));
  CHECK(gaussian_geodesic_exact(Mat::Identity(1, 1), scalar_mat(2.0), 1.0)(0, 0) ==
        doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
  CHECK(min_eigenvalue(gaussian_geodesic_exact(S, 3.0 * G, 1.0)) > 0.0);

  // Commuting case: S = I gives Exp(-t G) directly.
  const SymmetricEigen e = jacobi_eigen(G);
  const Mat oracle = e.vectors * (-0.7 * e.values).array().exp().matrix().asDiagonal() * e.vectors.transpose();
  CHECK(max_abs(gaussian_geodesic_exact(Mat::Identity(3, 3), G, 0.7) - oracle) <= 1e-12);
}

TEST_CASE("retraction is a second-order truncation of the geodesic") {
  RngStream rng(32, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat S = random_spd(rng, 3, 1.0);
    // Unit spectral norm in the frame where S is the identity, so t sets the scale.
    const Mat Uinv = SPDMatrix(sym_sqrt(S)).inverse();
    Mat G = random_symmetric(rng, 3);
    const Vec ev = jacobi_eigen(symmetrize(Uinv * G * Uinv)).values;
    G /= std::max(std::fabs(ev(0)), std::fabs(ev(ev.size() - 1)));
    for (double t : {0.4, 0.2, 0.1}) {
      const double r2 = geodesic_gap(S, G, t, true) / geodesic_gap(S, G, t / 2, true);
      const double r1 = geodesic_gap(S, G, t, false) / geodesic_gap(S, G, t / 2, false);
      CHECK(r2 >= 6.5);
      CHECK(r2 <= 9.5);
      CHECK(r1 >= 3.4);
      CHECK(r1 <= 4.6);
    }
  }
}

TEST_CASE("positive-definite update equals half of S plus U^T U") {
  RngStream rng(33, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const long d = 1 + trial % 6;
    const Mat S = random_spd(rng, d, 0.1);
    const Mat G = random_symmetric(rng, d, 3.0);
    const double t = 2.0 * rng.uniform();
    const Mat L = cholesky(S);
    const Mat U = L.transpose() - t * forward_substitute(L, G);
    const Mat rhs = 0.5 * (S + U.transpose() * U);
    const Mat lhs = S - t * G + 0.5 * t * t * G * SPDMatrix(S).solve(G);
    CHECK(max_abs(lhs - rhs) <= 1e-10 * std::max(1.0, max_abs(lhs)));
    const Mat updated = S - t * G - 0.5 * t * t * spd_contraction(S, G);
    CHECK(min_eigenvalue(updated) > 0.0);
  }
}

TEST_CASE("retraction axioms") {
  RngStream rng(34, 0);
  std::vector<std::unique_ptr<Family>> fams;
  fams.push_back(make_gaussian_full(random_vector(rng, 3), random_spd(rng, 3)));
  fams.push_back(make_gaussian_diag(random_vector(rng, 2), Vec::Constant(2, 1.5)));
  fams.push_back(make_gamma(2.5, 1.5));
  fams.push_back(make_exponential(0.8));
  fams.push_back(make_inverse_gaussian(3.0, 0.7));
  fams.push_back(make_mog({}, {random_vector(rng, 2), random_vector(rng, 2)}, {random_spd(rng, 2), random_spd(rng, 2)}));
  fams.push_back(make_skew_gaussian(random_vector(rng, 2), random_vector(rng, 2), random_spd(rng, 2)));
  for (const auto& f : fams) {
    CAPTURE(f->name());
    const BlockedPoint p = f->blocked_point();
    BlockedTangent g;
    for (std::size_t i = 0; i < p.size(); ++i) {
      Mat b = random_matrix(rng, p.values[i].rows(), p.values[i].cols());
      if (p.constraints[i].kind == BlockKind::SPD) b = symmetrize(b);
      g.blocks.push_back(b);
    }
    const ChristoffelContraction gam = f->christoffel_contraction();
    const BlockedPoint at0 = retraction_step(p, g, 0.0, gam);
    const double h = 1e-5;
    const BlockedPoint up = retraction_step(p, g, h, gam);
    const BlockedPoint dn = retraction_step(p, g, -h, gam);
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(max_abs(at0.values[i] - p.values[i]) == 0.0);
      const Mat deriv = (up.values[i] - dn.values[i]) / (2.0 * h);
      CHECK(max_abs(deriv + g.blocks[i]) <= 1e-6 * std::max(1.0, max_abs(g.blocks[i])));
    }
  }
}

TEST_CASE("retraction keeps every built-in family feasible") {
  RngStream rng(35, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double t = 2.0 * (1.0 - rng.uniform());
    std::vector<std::unique_ptr<Family>> fams;
    fams.push_back(make_gaussian_full(random_vector(rng, 3), random_spd(rng, 3, 0.1)));
    fams.push_back(make_gaussian_diag(random_vector(rng, 2), (random_vector(rng, 2).array().exp()).matrix()));
    fams.push_back(make_gamma(std::exp(2.0 * rng.normal()), std::exp(2.0 * rng.normal())));
    fams.push_back(make_exponential(std::exp(2.0 * rng.normal())));
    fams.push_back(make_inverse_gaussian(std::exp(2.0 * rng.normal()), std::exp(2.0 * rng.normal())));
    fams.push_back(make_mog({}, {random_vector(rng, 2), random_vector(rng, 2)},
                            {random_spd(rng, 2, 0.1), random_spd(rng, 2, 0.1)}));
    fams.push_back(make_skew_gaussian(random_vector(rng, 2), random_vector(rng, 2), random_spd(rng, 2, 0.1)));
    for (const auto& f : fams) {
      const BlockedPoint p = f->blocked_point();
      BlockedTangent g;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double scale = std::exp(2.0 * rng.normal());
        Mat b = scale * random_matrix(rng, p.values[i].rows(), p.values[i].cols());
        if (p.constraints[i].kind == BlockKind::SPD) b = symmetrize(b);
        g.blocks.push_back(b);
      }
      const StepResult r = try_retraction_step(p, g, t, f->christoffel_contraction());
      if (!r.feasible) {
        CAPTURE(f->name());
        CAPTURE(t);
        CHECK(r.feasible);
      }
    }
  }
}

TEST_CASE("univariate counterexample") {
  const UnivariateStep song = song_step_univariate(0.0, 1.0, 3.0, 0.0, 1.0, UnivariateParam::MeanStd);
  CHECK(song.scale == doctest::Approx(-1.25).epsilon(1e-14));
  CHECK_FALSE(song.feasible);
  const UnivariateStep ours = blockwise_step_univariate(0.0, 1.0, 3.0, 0.0, 1.0, UnivariateParam::MeanStd);
  CHECK(ours.scale == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ours.feasible);

  const UnivariateStep song_v = song_step_univariate(0.0, 1.0, 2.0, 0.0, 1.0, UnivariateParam::MeanVariance);
  CHECK(song_v.scale == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK_FALSE(song_v.feasible);

  // The block-wise rule keeps the scale positive for every input.
  RngStream rng(36, 0);
  for (int i = 0; i < 1000; ++i) {
    const double scale = std::exp(rng.normal());
    const UnivariateStep s = blockwise_step_univariate(rng.normal(), scale, 3.0 * rng.normal(), 3.0 * rng.normal(),
                                                       2.0 * rng.uniform(), i % 2 ? UnivariateParam::MeanStd
                                                                                  : UnivariateParam::MeanVariance);
    CHECK(s.feasible);
  }
}

TEST_CASE("univariate Gaussian symbols follow from the full update") {
  // The full second-order update is lambda - t g - (t^2/2) Gamma^c_ab g^a g^b.
  for (UnivariateParam kind : {UnivariateParam::MeanStd, UnivariateParam::MeanVariance}) {
    const double scale = 1.7, gm = 0.4, gs = -0.9, t = 0.6;
    const Tensor3 G = univariate_gaussian_christoffel(scale, kind);
    const double g[2] = {gm, gs};
    double c[2] = {0.0, 0.0};
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = 0; b < 2; ++b) c[k] += G(k, a, b) * g[a] * g[b];
    const UnivariateStep s = song_step_univariate(0.2, scale, gm, gs, t, kind);
    CHECK(s.mu == doctest::Approx(0.2 - t * gm - 0.5 * t * t * c[0]).epsilon(1e-14));
    CHECK(s.scale == doctest::Approx(scale - t * gs - 0.5 * t * t * c[1]).epsilon(1e-14));
  }
}
