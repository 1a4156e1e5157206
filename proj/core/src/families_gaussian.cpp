#include <cmath>

#include "families_internal.hpp"

namespace iblr {

using namespace detail;

namespace {

class GaussianFull final : public Family {
 public:
  GaussianFull(Vec mu, const Mat& S) : mu_(std::move(mu)), S_(S) {
    if (static_cast<long>(S_.dim()) != mu_.size()) throw ShapeMismatch("gaussian_full: mu and S sizes differ");
    if (mu_.size() == 0) throw ShapeMismatch("gaussian_full: zero dimension");
  }

  FamilyKind kind() const override { return FamilyKind::GaussianFull; }
  std::size_t dim() const override { return static_cast<std::size_t>(mu_.size()); }

  BlockedPoint blocked_point() const override {
    BlockedPoint p;
    p.push(BlockConstraint::real_vector(dim()), column(mu_));
    p.push(BlockConstraint::spd(dim()), S_.data());
    return p;
  }

  std::unique_ptr<Family> with_point(const BlockedPoint& p) const override {
    return from_blocked(FamilyKind::GaussianFull, p, options_);
  }

  Mat sample(RngStream& rng, std::size_t n) const override {
    Mat out(static_cast<long>(n), mu_.size());
    for (long i = 0; i < out.rows(); ++i) out.row(i) = gaussian_draw(rng, mu_, S_).transpose();
    return out;
  }

  double log_density(const Vec& z) const override {
    if (z.size() != mu_.size()) throw DimensionMismatch("gaussian_full.log_density: wrong dimension");
    return gaussian_log_pdf(z, mu_, S_);
  }

  std::optional<double> entropy() const override {
    const double d = static_cast<double>(dim());
    return 0.5 * d * (1.0 + kLog2Pi) - 0.5 * S_.log_det();
  }

  Vec mean() const override { return mu_; }

  NaturalGradientEstimate natural_gradient(const TargetModel& model, RngStream& rng, std::size_t n,
                                           Estimator est) const override {
    require_model_dim(model, dim(), name());
    const Mat& S = S_.data();
    if (est == Estimator::ExactAtMean) {
      require_hessian(model);
      NaturalGradientEstimate out;
      out.estimator = est;
      out.blocks.blocks = {column(S_.solve(model.grad(mu_))), S - symmetrize(model.hess(mu_))};
      out.se = zero_se(out.blocks);
      out.aux = {Mat(), out.blocks.blocks[1]};
      return out;
    }
    if (est != Estimator::Rep && est != Estimator::Hess) {
      throw EstimatorUnavailable(std::string(estimator_name(est)) + " is not defined for " + name());
    }
    if (est == Estimator::Hess) require_hessian(model);
    require_samples(n);
    TangentAccumulator acc;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec z = gaussian_draw(rng, mu_, S_);
      const Vec g = model.grad(z);
      Mat G;
      if (est == Estimator::Rep) {
        G = S - symmetrize(S * (z - mu_) * g.transpose());
      } else {
        G = S - symmetrize(model.hess(z));
      }
      acc.add({column(S_.solve(g)), G});
    }
    NaturalGradientEstimate out = acc.finish(est);
    out.aux = {Mat(), out.blocks.blocks[1]};
    return out;
  }

  ChristoffelContraction christoffel_contraction() const override {
    return [](const BlockedPoint& p, std::size_t block, const Mat& g) -> Mat {
      if (block == 0) return Mat::Zero(g.rows(), g.cols());
      return spd_contraction(p.values[1], g);
    };
  }

  LegacyDirection legacy_blr_natural_gradient(const TargetModel& model, RngStream& rng, std::size_t n,
                                              Estimator est) const override {
    const NaturalGradientEstimate ng = natural_gradient(model, rng, n, est);
    LegacyDirection dir;
    dir.point = blocked_point();
    // Keep the Euclidean mean gradient: the original rule preconditions it with the updated S.
    dir.tangent.blocks = {S_.data() * ng.blocks.blocks[0], ng.blocks.blocks[1]};
    return dir;
  }

  StepResult legacy_step(const LegacyDirection& dir, double t) const override {
    StepResult r;
    r.point = dir.point;
    const Mat S_new = symmetrize(dir.point.values[1] - t * dir.tangent.blocks[1]);
    r.point.values[1] = S_new;
    if (!spd_feasible(S_new)) {
      r.feasible = false;
      r.first_infeasible_block = 1;
      return r;
    }
    const SPDMatrix Sn(S_new);
    r.point.values[0] = dir.point.values[0] - t * column(Sn.solve(as_vec(dir.tangent.blocks[0])));
    return r;
  }

  LogPartition log_partition() const override {
    return [](const BlockedPoint& p) {
      const Vec mu = as_vec(p.values[0]);
      const SPDMatrix S(p.values[1]);
      const double d = static_cast<double>(mu.size());
      return 0.5 * mu.dot(S.data() * mu) - 0.5 * S.log_det() + 0.5 * d * kLog2Pi;
    };
  }

  Mat fim_block(std::size_t block) const override {
    if (block == 0) return S_.data();
    if (block != 1) throw DomainError("gaussian_full: block out of range");
    // d^2/dS_a dS_b of -1/2 log|S| = 1/2 tr(Sigma E_a Sigma E_b).
    const Mat sigma = S_.inverse();
    const std::size_t m = BlockConstraint::spd(dim()).coordinate_count();
    std::vector<Mat> se(m);
    for (std::size_t a = 0; a < m; ++a) se[a] = sigma * spd_basis(dim(), a);
    Mat F(static_cast<long>(m), static_cast<long>(m));
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) F(static_cast<long>(a), static_cast<long>(b)) = 0.5 * (se[a] * se[b]).trace();
    }
    return F;
  }

  Tensor3 christoffel_first_kind(std::size_t block) const override {
    if (block == 0) return Tensor3(dim());
    if (block != 1) throw DomainError("gaussian_full: block out of range");
    const Mat sigma = S_.inverse();
    const std::size_t m = BlockConstraint::spd(dim()).coordinate_count();
    std::vector<Mat> se(m);
    for (std::size_t a = 0; a < m; ++a) se[a] = sigma * spd_basis(dim(), a);
    Tensor3 out(m);
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        for (std::size_t c = 0; c < m; ++c) {
          const double third = -0.5 * ((se[c] * se[a] * se[b]).trace() + (se[a] * se[c] * se[b]).trace());
          out(a, b, c) = 0.5 * third;
        }
      }
    }
    return out;
  }

  ParametricDensity parametric_density() const override {
    if (dim() != 1) return Family::parametric_density();
    // theta = (mu, S) for the univariate case.
    ParametricDensity q;
    q.n_params = 2;
    q.log_q = [](const Vec& th, const Vec& z) {
      const double r = z(0) - th(0);
      return -0.5 * kLog2Pi + 0.5 * std::log(th(1)) - 0.5 * th(1) * r * r;
    };
    q.sample = [](const Vec& th, RngStream& rng) {
      Vec z(1);
      z(0) = th(0) + rng.normal() / std::sqrt(th(1));
      return z;
    };
    return q;
  }

 private:
  Vec mu_;
  SPDMatrix S_;
};

class GaussianDiag final : public Family {
 public:
  GaussianDiag(Vec mu, Vec s) : mu_(std::move(mu)), s_(std::move(s)) {
    if (mu_.size() != s_.size() || mu_.size() == 0) throw ShapeMismatch("gaussian_diag: mu and s sizes differ");
    if (!(s_.array() > 0.0).all()) throw DomainError("gaussian_diag: precisions must be positive");
  }

  FamilyKind kind() const override { return FamilyKind::GaussianDiag; }
  std::size_t dim() const override { return static_cast<std::size_t>(mu_.size()); }

  BlockedPoint blocked_point() const override {
    BlockedPoint p;
    p.push(BlockConstraint::real_vector(dim()), column(mu_));
    for (long i = 0; i < s_.size(); ++i) p.push(BlockConstraint::positive_scalar(), scalar(s_(i)));
    return p;
  }

  std::unique_ptr<Family> with_point(const BlockedPoint& p) const override {
    return from_blocked(FamilyKind::GaussianDiag, p, options_);
  }

  Mat sample(RngStream& rng, std::size_t n) const override {
    Mat out(static_cast<long>(n), mu_.size());
    for (long i = 0; i < out.rows(); ++i) out.row(i) = draw(rng).transpose();
    return out;
  }

  double log_density(const Vec& z) const override {
    if (z.size() != mu_.size()) throw DimensionMismatch("gaussian_diag.log_density: wrong dimension");
    const Vec r = z - mu_;
    return -0.5 * static_cast<double>(dim()) * kLog2Pi + 0.5 * s_.array().log().sum() -
           0.5 * (s_.array() * r.array().square()).sum();
  }

  std::optional<double> entropy() const override {
    return 0.5 * static_cast<double>(dim()) * (1.0 + kLog2Pi) - 0.5 * s_.array().log().sum();
  }

  Vec mean() const override { return mu_; }

  NaturalGradientEstimate natural_gradient(const TargetModel& model, RngStream& rng, std::size_t n,
                                           Estimator est) const override {
    require_model_dim(model, dim(), name());
    const long d = mu_.size();
    auto pack = [&](const Vec& g, const Vec& gs) {
      std::vector<Mat> blocks{column(g.cwiseQuotient(s_))};
      for (long i = 0; i < d; ++i) blocks.push_back(scalar(gs(i)));
      return blocks;
    };
    if (est == Estimator::ExactAtMean) {
      require_hessian(model);
      NaturalGradientEstimate out;
      out.estimator = est;
      out.blocks.blocks = pack(model.grad(mu_), s_ - model.hess(mu_).diagonal());
      out.se = zero_se(out.blocks);
      return out;
    }
    if (est != Estimator::Rep && est != Estimator::Hess) {
      throw EstimatorUnavailable(std::string(estimator_name(est)) + " is not defined for " + name());
    }
    if (est == Estimator::Hess) require_hessian(model);
    require_samples(n);
    TangentAccumulator acc;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec z = draw(rng);
      const Vec g = model.grad(z);
      Vec gs;
      if (est == Estimator::Rep) {
        gs = s_ - (s_.array() * (z - mu_).array() * g.array()).matrix();
      } else {
        gs = s_ - model.hess(z).diagonal();
      }
      acc.add(pack(g, gs));
    }
    return acc.finish(est);
  }

  ChristoffelContraction christoffel_contraction() const override {
    return [](const BlockedPoint& p, std::size_t block, const Mat& g) -> Mat {
      if (block == 0) return Mat::Zero(g.rows(), g.cols());
      return scalar(-g(0, 0) * g(0, 0) / p.values[block](0, 0));
    };
  }

  LogPartition log_partition() const override {
    return [](const BlockedPoint& p) {
      const Vec mu = as_vec(p.values[0]);
      double a = 0.0;
      for (long i = 0; i < mu.size(); ++i) {
        const double s = p.values[static_cast<std::size_t>(i) + 1](0, 0);
        a += 0.5 * (mu(i) * mu(i) * s - std::log(s) + kLog2Pi);
      }
      return a;
    };
  }

  Mat fim_block(std::size_t block) const override {
    if (block == 0) return Mat(s_.asDiagonal());
    const double s = s_(static_cast<long>(block) - 1);
    return scalar(0.5 / (s * s));
  }

  Tensor3 christoffel_first_kind(std::size_t block) const override {
    if (block == 0) return Tensor3(dim());
    const double s = s_(static_cast<long>(block) - 1);
    Tensor3 t(1);
    t(0, 0, 0) = -0.5 / (s * s * s);
    return t;
  }

 private:
  Vec draw(RngStream& rng) const {
    const Vec eps = sample_std_normal(rng, dim());
    return mu_ + eps.cwiseQuotient(s_.cwiseSqrt());
  }

  Vec mu_;
  Vec s_;
};

}  // namespace

namespace detail {

std::unique_ptr<Family> make_gaussian_full_impl(const Vec& mu, const Mat& S) {
  return std::make_unique<GaussianFull>(mu, S);
}

std::unique_ptr<Family> make_gaussian_diag_impl(const Vec& mu, const Vec& s) {
  return std::make_unique<GaussianDiag>(mu, s);
}

}  // namespace detail

GaussianLossGradients gaussian_loss_gradients(const Vec& mu, const SPDMatrix& S, const TargetModel& model,
                                              RngStream& rng, std::size_t n, Estimator est) {
  if (est != Estimator::Rep && est != Estimator::Hess) {
    throw EstimatorUnavailable("gaussian_loss_gradients: only rep and hess estimators apply");
  }
  if (est == Estimator::Hess) require_hessian(model);
  require_samples(n);
  require_model_dim(model, static_cast<std::size_t>(mu.size()), "gaussian_loss_gradients");
  TangentAccumulator acc;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec z = gaussian_draw(rng, mu, S);
    const Vec g = model.grad(z);
    const Mat gs = est == Estimator::Rep ? Mat(0.5 * symmetrize(S.data() * (z - mu) * g.transpose()))
                                         : Mat(0.5 * symmetrize(model.hess(z)));
    acc.add({column(g), gs});
  }
  const NaturalGradientEstimate e = acc.finish(est);
  GaussianLossGradients out;
  out.grad_mu = as_vec(e.blocks.blocks[0]);
  out.se_mu = as_vec(e.se.blocks[0]);
  out.grad_sigma = e.blocks.blocks[1];
  out.se_sigma = e.se.blocks[1];
  out.samples = n;
  return out;
}

}  // namespace iblr
