#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

#include "families_internal.hpp"
#include "iblr/special.hpp"

namespace iblr {

using namespace detail;

namespace {

double model_slope(const TargetModel& model, double z) {
  Vec v(1);
  v(0) = z;
  if (!model.in_support(v)) throw SupportError(model.name() + ": draw outside the model support");
  return model.grad(v)(0);
}

double scalar_of(const BlockedPoint& p, std::size_t b) { return p.values[b](0, 0); }

Mat positive_contraction(double coeff, const Mat& g) { return scalar(coeff * g(0, 0) * g(0, 0)); }

// q(z) = Gamma(z | alpha, beta) with lam1 = alpha, lam2 = beta / alpha.
class GammaFamily final : public Family {
 public:
  GammaFamily(double lam1, double lam2) : lam1_(lam1), lam2_(lam2) {
    if (!(lam1 > 0.0) || !(lam2 > 0.0)) throw DomainError("gamma: parameters must be positive");
  }

  FamilyKind kind() const override { return FamilyKind::Gamma; }
  std::size_t dim() const override { return 1; }
  double alpha() const { return lam1_; }
  double beta() const { return lam1_ * lam2_; }

  BlockedPoint blocked_point() const override {
    BlockedPoint p;
    p.push(BlockConstraint::positive_scalar(), scalar(lam1_));
    p.push(BlockConstraint::positive_scalar(), scalar(lam2_));
    return p;
  }
  std::unique_ptr<Family> with_point(const BlockedPoint& p) const override {
    return from_blocked(FamilyKind::Gamma, p, options_);
  }

  Mat sample(RngStream& rng, std::size_t n) const override {
    Mat out(static_cast<long>(n), 1);
    for (long i = 0; i < out.rows(); ++i) out(i, 0) = sample_gamma(rng, alpha(), beta());
    return out;
  }
  bool in_support(const Vec& z) const override { return z.size() == 1 && z(0) > 0.0 && std::isfinite(z(0)); }
  double log_density(const Vec& z) const override {
    if (!in_support(z)) throw SupportError("gamma.log_density: z must be a positive scalar");
    const double a = alpha(), b = beta();
    return a * std::log(b) - log_gamma(a) + (a - 1.0) * std::log(z(0)) - b * z(0);
  }
  std::optional<double> entropy() const override {
    const double a = alpha();
    return a - std::log(beta()) + log_gamma(a) + (1.0 - a) * digamma(a);
  }
  Vec mean() const override { return Vec::Constant(1, alpha() / beta()); }

  // Per-sample Euclidean gradients of L with respect to (alpha, beta).
  std::pair<double, double> euclid_alpha_beta(const TargetModel& model, double z) const {
    const double a = alpha(), b = beta();
    const double slope = model_slope(model, z);
    const double dH_da = 1.0 + (1.0 - a) * trigamma(a);
    const double dH_db = -1.0 / b;
    return {slope * gamma_dz_dalpha(z, a, b) - dH_da, slope * (-z / b) - dH_db};
  }

  NaturalGradientEstimate natural_gradient(const TargetModel& model, RngStream& rng, std::size_t n,
                                           Estimator est) const override {
    require_model_dim(model, 1, name());
    if (est != Estimator::ImplicitRep && est != Estimator::Rep) {
      throw EstimatorUnavailable(std::string(estimator_name(est)) + " is not defined for " + name());
    }
    require_samples(n);
    const double a = alpha(), b = beta();
    const double f11 = trigamma(lam1_) - 1.0 / lam1_;
    const double f22 = lam1_ / (lam2_ * lam2_);
    TangentAccumulator acc;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = sample_gamma(rng, a, b);
      const auto [ea, eb] = euclid_alpha_beta(model, z);
      const double e1 = ea + (b / a) * eb;
      const double e2 = a * eb;
      acc.add({scalar(e1 / f11), scalar(e2 / f22)});
    }
    return acc.finish(Estimator::ImplicitRep);
  }

  ChristoffelContraction christoffel_contraction() const override {
    return [](const BlockedPoint& p, std::size_t block, const Mat& g) -> Mat {
      const double l1 = scalar_of(p, 0);
      if (block == 0) {
        const double gamma111 = (tetragamma(l1) + 1.0 / (l1 * l1)) / (2.0 * (trigamma(l1) - 1.0 / l1));
        return positive_contraction(gamma111, g);
      }
      return positive_contraction(-1.0 / scalar_of(p, 1), g);
    };
  }

  // The original rule runs NGD on the natural parameters (alpha, beta).
  LegacyDirection legacy_blr_natural_gradient(const TargetModel& model, RngStream& rng, std::size_t n,
                                              Estimator est) const override {
    require_model_dim(model, 1, name());
    if (est != Estimator::ImplicitRep && est != Estimator::Rep) {
      throw EstimatorUnavailable(std::string(estimator_name(est)) + " is not defined for " + name());
    }
    require_samples(n);
    const double a = alpha(), b = beta();
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto [ea, eb] = euclid_alpha_beta(model, sample_gamma(rng, a, b));
      sa += ea;
      sb += eb;
    }
    sa /= static_cast<double>(n);
    sb /= static_cast<double>(n);
    Mat F(2, 2);
    F << trigamma(a), -1.0 / b, -1.0 / b, a / (b * b);
    Vec e(2);
    e << sa, sb;
    const Vec g = SPDMatrix(F).solve(e);
    LegacyDirection dir;
    dir.point.push(BlockConstraint::positive_scalar(), scalar(a));
    dir.point.push(BlockConstraint::positive_scalar(), scalar(b));
    dir.tangent.blocks = {scalar(g(0)), scalar(g(1))};
    return dir;
  }

  StepResult legacy_step(const LegacyDirection& dir, double t) const override {
    const StepResult nat = ngd_step(dir.point, dir.tangent, t);
    StepResult r;
    r.feasible = nat.feasible;
    r.first_infeasible_block = nat.first_infeasible_block;
    const double a = scalar_of(nat.point, 0), b = scalar_of(nat.point, 1);
    r.point = blocked_point();
    r.point.values[0] = scalar(a);
    r.point.values[1] = scalar(nat.feasible ? b / a : b);
    return r;
  }

  LogPartition log_partition() const override {
    return [](const BlockedPoint& p) {
      const double l1 = scalar_of(p, 0), l2 = scalar_of(p, 1);
      return log_gamma(l1) - l1 * (std::log(l1) + std::log(l2));
    };
  }
  Mat fim_block(std::size_t block) const override {
    return block == 0 ? scalar(trigamma(lam1_) - 1.0 / lam1_) : scalar(lam1_ / (lam2_ * lam2_));
  }
  Tensor3 christoffel_first_kind(std::size_t block) const override {
    Tensor3 t(1);
    t(0, 0, 0) = block == 0 ? 0.5 * (tetragamma(lam1_) + 1.0 / (lam1_ * lam1_)) : -lam1_ / (lam2_ * lam2_ * lam2_);
    return t;
  }
  ParametricDensity parametric_density() const override {
    ParametricDensity q;
    q.n_params = 2;
    q.log_q = [](const Vec& th, const Vec& z) {
      const double a = th(0), b = th(0) * th(1);
      return a * std::log(b) - log_gamma(a) + (a - 1.0) * std::log(z(0)) - b * z(0);
    };
    q.sample = [](const Vec& th, RngStream& rng) { return Vec::Constant(1, sample_gamma(rng, th(0), th(0) * th(1))); };
    return q;
  }

 private:
  double lam1_, lam2_;
};

// q(z) = lam exp(-lam z).
class ExponentialFamily final : public Family {
 public:
  explicit ExponentialFamily(double lam) : lam_(lam) {
    if (!(lam > 0.0)) throw DomainError("exponential: rate must be positive");
  }

  FamilyKind kind() const override { return FamilyKind::Exponential; }
  std::size_t dim() const override { return 1; }

  BlockedPoint blocked_point() const override {
    BlockedPoint p;
    p.push(BlockConstraint::positive_scalar(), scalar(lam_));
    return p;
  }
  std::unique_ptr<Family> with_point(const BlockedPoint& p) const override {
    return from_blocked(FamilyKind::Exponential, p, options_);
  }

  Mat sample(RngStream& rng, std::size_t n) const override {
    Mat out(static_cast<long>(n), 1);
    for (long i = 0; i < out.rows(); ++i) out(i, 0) = draw(rng, lam_);
    return out;
  }
  bool in_support(const Vec& z) const override { return z.size() == 1 && z(0) > 0.0 && std::isfinite(z(0)); }
  double log_density(const Vec& z) const override {
    if (!in_support(z)) throw SupportError("exponential.log_density: z must be a positive scalar");
    return std::log(lam_) - lam_ * z(0);
  }
  std::optional<double> entropy() const override { return 1.0 - std::log(lam_); }
  Vec mean() const override { return Vec::Constant(1, 1.0 / lam_); }

  NaturalGradientEstimate natural_gradient(const TargetModel& model, RngStream& rng, std::size_t n,
                                           Estimator est) const override {
    require_model_dim(model, 1, name());
    if (est != Estimator::ImplicitRep && est != Estimator::Rep) {
      throw EstimatorUnavailable(std::string(estimator_name(est)) + " is not defined for " + name());
    }
    require_samples(n);
    TangentAccumulator acc;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = draw(rng, lam_);
      // dz/dlam = -z / lam; the entropy 1 - log lam contributes +1 / lam.
      const double e = model_slope(model, z) * (-z / lam_) + 1.0 / lam_;
      acc.add({scalar(lam_ * lam_ * e)});
    }
    return acc.finish(Estimator::ImplicitRep);
  }

  ChristoffelContraction christoffel_contraction() const override {
    return [](const BlockedPoint& p, std::size_t, const Mat& g) -> Mat {
      return positive_contraction(-1.0 / scalar_of(p, 0), g);
    };
  }

  LogPartition log_partition() const override {
    return [](const BlockedPoint& p) { return -std::log(scalar_of(p, 0)); };
  }
  Mat fim_block(std::size_t) const override { return scalar(1.0 / (lam_ * lam_)); }
  Tensor3 christoffel_first_kind(std::size_t) const override {
    Tensor3 t(1);
    t(0, 0, 0) = -1.0 / (lam_ * lam_ * lam_);
    return t;
  }
  ParametricDensity parametric_density() const override {
    ParametricDensity q;
    q.n_params = 1;
    q.log_q = [](const Vec& th, const Vec& z) { return std::log(th(0)) - th(0) * z(0); };
    q.sample = [](const Vec& th, RngStream& rng) { return Vec::Constant(1, draw(rng, th(0))); };
    return q;
  }

 private:
  static double draw(RngStream& rng, double lam) { return -std::log(rng.uniform()) / lam; }
  double lam_;
};

// Inverse Gaussian with shape alpha and mean 1 / beta; lam1 = beta^2, lam2 = alpha.
class InverseGaussianFamily final : public Family {
 public:
  InverseGaussianFamily(double lam1, double lam2) : lam1_(lam1), lam2_(lam2) {
    if (!(lam1 > 0.0) || !(lam2 > 0.0)) throw DomainError("inverse_gaussian: parameters must be positive");
  }

  FamilyKind kind() const override { return FamilyKind::InverseGaussian; }
  std::size_t dim() const override { return 1; }
  double alpha() const { return lam2_; }
  double beta() const { return std::sqrt(lam1_); }

  BlockedPoint blocked_point() const override {
    BlockedPoint p;
    p.push(BlockConstraint::positive_scalar(), scalar(lam1_));
    p.push(BlockConstraint::positive_scalar(), scalar(lam2_));
    return p;
  }
  std::unique_ptr<Family> with_point(const BlockedPoint& p) const override {
    return from_blocked(FamilyKind::InverseGaussian, p, options_);
  }

  Mat sample(RngStream& rng, std::size_t n) const override {
    Mat out(static_cast<long>(n), 1);
    for (long i = 0; i < out.rows(); ++i) out(i, 0) = sample_inverse_gaussian(rng, alpha(), beta());
    return out;
  }
  bool in_support(const Vec& z) const override { return z.size() == 1 && z(0) > 0.0 && std::isfinite(z(0)); }
  double log_density(const Vec& z) const override {
    if (!in_support(z)) throw SupportError("inverse_gaussian.log_density: z must be a positive scalar");
    return log_pdf(z(0), alpha(), beta());
  }
  std::optional<double> entropy() const override { return inverse_gaussian_entropy(alpha(), beta()); }
  Vec mean() const override { return Vec::Constant(1, 1.0 / beta()); }

  NaturalGradientEstimate natural_gradient(const TargetModel& model, RngStream& rng, std::size_t n,
                                           Estimator est) const override {
    require_model_dim(model, 1, name());
    if (est != Estimator::ImplicitRep && est != Estimator::Rep) {
      throw EstimatorUnavailable(std::string(estimator_name(est)) + " is not defined for " + name());
    }
    require_samples(n);
    const double a = alpha(), b = beta();
    const double ee1 = exp_e1(2.0 * a * b);
    const double dH_da = 1.0 / a - 3.0 * b * ee1;
    const double dH_db = -3.0 * a * ee1;
    TangentAccumulator acc;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = sample_inverse_gaussian(rng, a, b);
      const double slope = model_slope(model, z);
      const double ea = slope * inverse_gaussian_dz_dalpha(z, a, b) - dH_da;
      const double eb = slope * inverse_gaussian_dz_dbeta(z, a, b) - dH_db;
      const double e1 = eb / (2.0 * b);
      const double e2 = ea;
      acc.add({scalar(4.0 * std::pow(lam1_, 1.5) / lam2_ * e1), scalar(2.0 * lam2_ * lam2_ * e2)});
    }
    return acc.finish(Estimator::ImplicitRep);
  }

  ChristoffelContraction christoffel_contraction() const override {
    return [](const BlockedPoint& p, std::size_t block, const Mat& g) -> Mat {
      if (block == 0) return positive_contraction(-3.0 / (4.0 * scalar_of(p, 0)), g);
      return positive_contraction(-1.0 / scalar_of(p, 1), g);
    };
  }

  LogPartition log_partition() const override {
    return [](const BlockedPoint& p) {
      const double l1 = scalar_of(p, 0), l2 = scalar_of(p, 1);
      return -0.5 * std::log(l2) - l2 * std::sqrt(l1);
    };
  }
  Mat fim_block(std::size_t block) const override {
    return block == 0 ? scalar(lam2_ / (4.0 * std::pow(lam1_, 1.5))) : scalar(0.5 / (lam2_ * lam2_));
  }
  Tensor3 christoffel_first_kind(std::size_t block) const override {
    Tensor3 t(1);
    t(0, 0, 0) = block == 0 ? -3.0 / 16.0 * lam2_ * std::pow(lam1_, -2.5) : -0.5 / (lam2_ * lam2_ * lam2_);
    return t;
  }
  ParametricDensity parametric_density() const override {
    ParametricDensity q;
    q.n_params = 2;
    q.log_q = [](const Vec& th, const Vec& z) { return log_pdf(z(0), th(1), std::sqrt(th(0))); };
    q.sample = [](const Vec& th, RngStream& rng) {
      return Vec::Constant(1, sample_inverse_gaussian(rng, th(1), std::sqrt(th(0))));
    };
    return q;
  }

 private:
  static double log_pdf(double z, double a, double b) {
    const double r = b * z - 1.0;
    return -0.5 * kLog2Pi - 1.5 * std::log(z) + 0.5 * std::log(a) - a * r * r / (2.0 * z);
  }
  double lam1_, lam2_;
};

}  // namespace

namespace detail {

std::unique_ptr<Family> make_gamma_lambda(double lam1, double lam2) {
  return std::make_unique<GammaFamily>(lam1, lam2);
}
std::unique_ptr<Family> make_exponential_impl(double rate) { return std::make_unique<ExponentialFamily>(rate); }
std::unique_ptr<Family> make_inverse_gaussian_lambda(double lam1, double lam2) {
  return std::make_unique<InverseGaussianFamily>(lam1, lam2);
}

}  // namespace detail

double gamma_dz_dalpha(double z, double alpha, double beta) {
  if (!(z > 0.0) || !(alpha > 0.0) || !(beta > 0.0)) throw DomainError("gamma_dz_dalpha: arguments must be positive");
  namespace bm = boost::math;
  // Differentiate the inverse CDF at the draw's fixed quantile.
  const double x = beta * z;
  const double h = 1e-5 * alpha;
  const double p = bm::gamma_p(alpha, x);
  double xp, xm;
  if (p <= 0.5) {
    xp = bm::gamma_p_inv(alpha + h, p);
    xm = bm::gamma_p_inv(alpha - h, p);
  } else {
    const double q = bm::gamma_q(alpha, x);
    xp = bm::gamma_q_inv(alpha + h, q);
    xm = bm::gamma_q_inv(alpha - h, q);
  }
  return (xp - xm) / (2.0 * h) / beta;
}

double inverse_gaussian_dz_dalpha(double z, double alpha, double beta) {
  const double r = -std::sqrt(alpha / z) * (z * beta + 1.0);
  const double delta = std::exp(log_mills_ratio(r));
  return z / alpha - 2.0 * beta * std::pow(z, 1.5) / std::sqrt(alpha) * delta;
}

double inverse_gaussian_dz_dbeta(double z, double alpha, double beta) {
  const double r = -std::sqrt(alpha / z) * (z * beta + 1.0);
  const double delta = std::exp(log_mills_ratio(r));
  return -2.0 * std::pow(z, 1.5) * std::sqrt(alpha) * delta;
}

double inverse_gaussian_entropy(double alpha, double beta) {
  const double x = 2.0 * alpha * beta;
  return 0.5 * (-std::log(alpha) - 3.0 * (std::log(beta) + exp_e1(x)) + 1.0 + kLog2Pi);
}

GammaParams gamma_params(const Family& f) {
  if (f.kind() != FamilyKind::Gamma) throw DomainError("gamma_params: not a gamma family");
  const auto& g = static_cast<const GammaFamily&>(f);
  return {g.alpha(), g.beta()};
}

InverseGaussianParams inverse_gaussian_params(const Family& f) {
  if (f.kind() != FamilyKind::InverseGaussian) throw DomainError("inverse_gaussian_params: wrong family");
  const auto& g = static_cast<const InverseGaussianFamily&>(f);
  return {g.alpha(), g.beta()};
}

}  // namespace iblr
