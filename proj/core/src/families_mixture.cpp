#include <algorithm>
#include <cmath>

#include "families_internal.hpp"
#include "iblr/special.hpp"

namespace iblr {

using namespace detail;

namespace {

// Weights are stored as normalized log-probabilities; lam_w is derived with
// component K as the reference.
class MixtureOfGaussians final : public Family {
 public:
  MixtureOfGaussians(std::vector<double> log_w, std::vector<Vec> mus, const std::vector<Mat>& Ss,
                     const FamilyOptions& opts)
      : mus_(std::move(mus)) {
    options_ = opts;
    if (mus_.empty() || mus_.size() != Ss.size() || log_w.size() != mus_.size()) {
      throw ShapeMismatch("mog: weights, means and precisions must have K entries each");
    }
    const long d = mus_.front().size();
    if (d == 0) throw ShapeMismatch("mog: zero dimension");
    for (std::size_t c = 0; c < mus_.size(); ++c) {
      if (mus_[c].size() != d || Ss[c].rows() != d || Ss[c].cols() != d) {
        throw ShapeMismatch("mog: component shapes disagree");
      }
      S_.emplace_back(Ss[c]);
    }
    const double norm = log_sum_exp(log_w);
    if (!std::isfinite(norm)) throw DomainError("mog: weights must not all be zero");
    for (double& v : log_w) v -= norm;
    log_w_ = std::move(log_w);
    double total = 0.0;
    for (double v : log_w_) total += std::exp(v);
    if (std::fabs(total - 1.0) > 1e-12) throw DomainError("mog: weights do not normalize");
  }

  FamilyKind kind() const override { return FamilyKind::MixtureOfGaussians; }
  std::size_t dim() const override { return static_cast<std::size_t>(mus_.front().size()); }
  std::size_t components() const { return mus_.size(); }

  std::vector<double> weights() const {
    std::vector<double> w(log_w_.size());
    for (std::size_t c = 0; c < w.size(); ++c) w[c] = std::exp(log_w_[c]);
    return w;
  }

  BlockedPoint blocked_point() const override {
    BlockedPoint p;
    const std::size_t K = components();
    if (K > 1) {
      Vec lw(static_cast<long>(K - 1));
      for (std::size_t c = 0; c + 1 < K; ++c) lw(static_cast<long>(c)) = log_w_[c] - log_w_[K - 1];
      p.push(BlockConstraint::real_vector(K - 1), column(lw));
    }
    for (std::size_t c = 0; c < K; ++c) {
      p.push(BlockConstraint::real_vector(dim()), column(mus_[c]));
      p.push(BlockConstraint::spd(dim()), S_[c].data());
    }
    return p;
  }

  std::unique_ptr<Family> with_point(const BlockedPoint& p) const override {
    return from_blocked(FamilyKind::MixtureOfGaussians, p, options_);
  }

  Mat sample(RngStream& rng, std::size_t n) const override {
    Mat out(static_cast<long>(n), static_cast<long>(dim()));
    const std::vector<double> w = weights();
    for (long i = 0; i < out.rows(); ++i) out.row(i) = draw(rng, w).transpose();
    return out;
  }

  double log_density(const Vec& z) const override {
    if (static_cast<std::size_t>(z.size()) != dim()) throw DimensionMismatch("mog.log_density: wrong dimension");
    return log_sum_exp(weighted_log_components(z));
  }

  Vec mean() const override {
    Vec m = Vec::Zero(static_cast<long>(dim()));
    for (std::size_t c = 0; c < components(); ++c) m += std::exp(log_w_[c]) * mus_[c];
    return m;
  }

  std::vector<double> deltas(const Vec& z) const {
    std::vector<double> lc(components());
    std::vector<double> wl(components());
    for (std::size_t c = 0; c < components(); ++c) {
      lc[c] = gaussian_log_pdf(z, mus_[c], S_[c]);
      wl[c] = log_w_[c] + lc[c];
    }
    const double lq = log_sum_exp(wl);
    std::vector<double> d(components());
    for (std::size_t c = 0; c < components(); ++c) d[c] = std::exp(lc[c] - lq);
    return d;
  }

  Vec grad_log_density(const Vec& z, const std::vector<double>& delta) const {
    Vec g = Vec::Zero(z.size());
    for (std::size_t c = 0; c < components(); ++c) {
      const double r = std::exp(log_w_[c]) * delta[c];
      if (r != 0.0) g -= r * (S_[c].data() * (z - mus_[c]));
    }
    return g;
  }

  Mat hess_log_density(const Vec& z, const std::vector<double>& delta) const {
    if (components() == 1) return -S_.front().data();
    const Vec g = grad_log_density(z, delta);
    Mat h = -g * g.transpose();
    for (std::size_t c = 0; c < components(); ++c) {
      const double r = std::exp(log_w_[c]) * delta[c];
      if (r == 0.0) continue;
      const Vec gc = -(S_[c].data() * (z - mus_[c]));
      h += r * (gc * gc.transpose() - S_[c].data());
    }
    return symmetrize(h);
  }

  NaturalGradientEstimate natural_gradient(const TargetModel& model, RngStream& rng, std::size_t n,
                                           Estimator est) const override {
    require_model_dim(model, dim(), name());
    Estimator kind = est;
    if (kind == Estimator::Rep) kind = Estimator::ImportanceRep;
    if (kind == Estimator::Hess) kind = Estimator::ImportanceHess;
    if (kind != Estimator::ImportanceRep && kind != Estimator::ImportanceHess) {
      throw EstimatorUnavailable(std::string(estimator_name(est)) + " is not defined for " + name());
    }
    if (kind == Estimator::ImportanceHess) require_hessian(model);
    require_samples(n);

    const std::size_t K = components();
    const std::vector<double> w = weights();
    TangentAccumulator acc;
    std::vector<Mat> tangent;
    for (std::size_t s = 0; s < n; ++s) {
      const Vec z = draw(rng, w);
      const std::vector<double> delta = deltas(z);
      const Vec glq = grad_log_density(z, delta);
      const Mat hlq = hess_log_density(z, delta);
      const Vec g = model.grad(z);
      tangent.clear();
      if (K > 1) {
        Vec gw = Vec::Zero(static_cast<long>(K - 1));
        if (!options_.weights_frozen) {
          const double b = model.loss(z) + log_sum_exp(weighted_log_components(z));
          for (std::size_t c = 0; c + 1 < K; ++c) gw(static_cast<long>(c)) = (delta[c] - delta[K - 1]) * b;
        }
        tangent.push_back(column(gw));
      }
      const Mat H = kind == Estimator::ImportanceHess ? symmetrize(model.hess(z)) : Mat();
      for (std::size_t c = 0; c < K; ++c) {
        const Mat& Sc = S_[c].data();
        const Vec grad_log_nc = -(Sc * (z - mus_[c]));
        // The entropy part E[delta_c grad log q] is written as E[delta_c (grad log q - grad log N_c)],
        // which has the same mean and vanishes identically for a single component.
        const Vec mean_dir = delta[c] * (g + (glq - grad_log_nc));
        tangent.push_back(column(S_[c].solve(mean_dir)));
        const Mat curv = kind == Estimator::ImportanceRep ? symmetrize(Sc * (z - mus_[c]) * g.transpose()) : H;
        tangent.push_back(delta[c] * (-curv - hlq));
      }
      acc.add(tangent);
    }
    NaturalGradientEstimate out = acc.finish(kind);
    out.aux.assign(out.blocks.blocks.size(), Mat());
    const std::size_t first = K > 1 ? 1 : 0;
    for (std::size_t c = 0; c < K; ++c) out.aux[first + 2 * c + 1] = out.blocks.blocks[first + 2 * c + 1];
    return out;
  }

  ChristoffelContraction christoffel_contraction() const override {
    const bool has_weights = components() > 1;
    return [has_weights](const BlockedPoint& p, std::size_t block, const Mat& g) -> Mat {
      const std::size_t first = has_weights ? 1 : 0;
      if (block < first || (block - first) % 2 == 0) return Mat::Zero(g.rows(), g.cols());
      return spd_contraction(p.values[block], g);
    };
  }

  std::vector<double> weighted_log_components(const Vec& z) const {
    std::vector<double> wl(components());
    for (std::size_t c = 0; c < components(); ++c) wl[c] = log_w_[c] + gaussian_log_pdf(z, mus_[c], S_[c]);
    return wl;
  }

 private:
  Vec draw(RngStream& rng, const std::vector<double>& w) const {
    const std::size_t c = components() == 1 ? 0 : sample_categorical(rng, w);
    return gaussian_draw(rng, mus_[c], S_[c]);
  }

  std::vector<double> log_w_;
  std::vector<Vec> mus_;
  std::vector<SPDMatrix> S_;
};

constexpr double kSqrt2OverPi = 0.79788456080286535588;

// z | w ~ N(mu + |w| alpha, S^{-1}), w ~ N(0, 1).
class SkewGaussian final : public Family {
 public:
  SkewGaussian(Vec mu, Vec alpha, const Mat& S, const FamilyOptions& opts)
      : mu_(std::move(mu)), alpha_(std::move(alpha)), S_(S), sigma_(S_.inverse()) {
    options_ = opts;
    if (mu_.size() == 0 || alpha_.size() != mu_.size() || static_cast<long>(S_.dim()) != mu_.size()) {
      throw ShapeMismatch("skew_gaussian: mu, alpha and S sizes differ");
    }
    s_alpha_ = S_.data() * alpha_;
  }

  FamilyKind kind() const override { return FamilyKind::SkewGaussian; }
  std::size_t dim() const override { return static_cast<std::size_t>(mu_.size()); }

  BlockedPoint blocked_point() const override {
    BlockedPoint p;
    Vec l1(2 * mu_.size());
    l1 << mu_, alpha_;
    p.push(BlockConstraint::real_vector(2 * dim()), column(l1));
    p.push(BlockConstraint::spd(dim()), S_.data());
    return p;
  }

  std::unique_ptr<Family> with_point(const BlockedPoint& p) const override {
    return from_blocked(FamilyKind::SkewGaussian, p, options_);
  }

  Mat sample(RngStream& rng, std::size_t n) const override {
    Mat out(static_cast<long>(n), mu_.size());
    for (long i = 0; i < out.rows(); ++i) {
      double w;
      out.row(i) = draw(rng, w).transpose();
    }
    return out;
  }

  double log_density(const Vec& z) const override {
    if (z.size() != mu_.size()) throw DimensionMismatch("skew_gaussian.log_density: wrong dimension");
    const Marginal m = marginal(z);
    return std::log(2.0) + gaussian_log_pdf(z, mu_, S_) + 0.5 * m.b * m.b * m.v + 0.5 * std::log(m.v) +
           log_ndtr(m.b * std::sqrt(m.v));
  }

  Vec grad_log_density(const Vec& z) const {
    const Marginal m = marginal(z);
    const double sv = std::sqrt(m.v);
    // d/db of log Phi(b sqrt(v)) is sqrt(v) N(tau) / Phi(tau).
    const double coef = m.b * m.v + sv * std::exp(-log_mills_ratio(m.b * sv));
    return -(S_.data() * (z - mu_)) + coef * s_alpha_;
  }

  Vec mean() const override { return mu_ + kSqrt2OverPi * alpha_; }

  NaturalGradientEstimate natural_gradient(const TargetModel& model, RngStream& rng, std::size_t n,
                                           Estimator est) const override {
    require_model_dim(model, dim(), name());
    if (est != Estimator::Rep && est != Estimator::ImportanceRep) {
      throw EstimatorUnavailable(std::string(estimator_name(est)) + " is not defined for " + name());
    }
    require_samples(n);
    const double c = kSqrt2OverPi;
    const long d = mu_.size();
    TangentAccumulator acc;
    for (std::size_t s = 0; s < n; ++s) {
      double w;
      const Vec z = draw(rng, w);
      const Vec gb = model.grad(z) + grad_log_density(z);
      const double aw = std::fabs(w);
      const Vec d_mu = gb;
      const Vec d_alpha = aw * gb;
      const Mat d_sigma = 0.5 * symmetrize(S_.data() * (z - mu_ - aw * alpha_) * gb.transpose());
      Vec l1(2 * d);
      if (options_.alpha_frozen) {
        l1 << sigma_ * d_mu, Vec::Zero(d);
      } else {
        l1 << sigma_ * (d_mu - c * d_alpha) / (1.0 - c * c), sigma_ * (d_alpha - c * d_mu) / (1.0 - c * c);
      }
      acc.add({column(l1), -2.0 * d_sigma});
    }
    NaturalGradientEstimate out = acc.finish(Estimator::Rep);
    out.aux = {Mat(), out.blocks.blocks[1]};
    return out;
  }

  ChristoffelContraction christoffel_contraction() const override {
    return [](const BlockedPoint& p, std::size_t block, const Mat& g) -> Mat {
      if (block == 0) return Mat::Zero(g.rows(), g.cols());
      return spd_contraction(p.values[1], g);
    };
  }

 private:
  Vec draw(RngStream& rng, double& w) const {
    w = rng.normal();
    return gaussian_draw(rng, mu_ + std::fabs(w) * alpha_, S_);
  }

  // The w-integral of N(w) N(z | mu + w alpha, Sigma) over w > 0 is Gaussian in w:
  // with b = alpha^T S (z - mu) and v = 1 / (1 + alpha^T S alpha) it equals
  // N(z | mu, Sigma) exp(b^2 v / 2) sqrt(v) Phi(b sqrt(v)).
  struct Marginal {
    double b, v;
  };
  Marginal marginal(const Vec& z) const { return {s_alpha_.dot(z - mu_), 1.0 / (1.0 + alpha_.dot(s_alpha_))}; }

  Vec mu_;
  Vec alpha_;
  SPDMatrix S_;
  Mat sigma_;
  Vec s_alpha_;
};

const MixtureOfGaussians& as_mog(const Family& f) {
  if (f.kind() != FamilyKind::MixtureOfGaussians) throw DomainError("expected a mixture of Gaussians");
  return static_cast<const MixtureOfGaussians&>(f);
}

}  // namespace

namespace detail {

std::unique_ptr<Family> make_mog_impl(const std::vector<double>& log_weights, const std::vector<Vec>& mus,
                                      const std::vector<Mat>& Ss, const FamilyOptions& opts) {
  return std::make_unique<MixtureOfGaussians>(log_weights, mus, Ss, opts);
}

std::unique_ptr<Family> make_skew_impl(const Vec& mu, const Vec& alpha, const Mat& S, const FamilyOptions& opts) {
  return std::make_unique<SkewGaussian>(mu, alpha, S, opts);
}

}  // namespace detail

std::vector<double> mog_deltas(const Family& mog, const Vec& z) { return as_mog(mog).deltas(z); }

std::vector<double> mog_weights(const Family& mog) { return as_mog(mog).weights(); }

Vec mog_grad_log_density(const Family& mog, const Vec& z) {
  const auto& m = as_mog(mog);
  return m.grad_log_density(z, m.deltas(z));
}

Mat mog_hess_log_density(const Family& mog, const Vec& z) {
  const auto& m = as_mog(mog);
  return m.hess_log_density(z, m.deltas(z));
}

Vec skew_grad_log_density(const Family& skew, const Vec& z) {
  if (skew.kind() != FamilyKind::SkewGaussian) throw DomainError("expected a skew Gaussian");
  return static_cast<const SkewGaussian&>(skew).grad_log_density(z);
}

}  // namespace iblr
