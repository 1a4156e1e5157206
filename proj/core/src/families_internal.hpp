#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "iblr/errors.hpp"
#include "iblr/families.hpp"

namespace iblr::detail {

inline constexpr double kLog2Pi = 1.8378770664093454836;

inline Mat column(const Vec& v) {
  Mat m(v.size(), 1);
  m.col(0) = v;
  return m;
}

inline Vec as_vec(const Mat& m) {
  Vec v(m.size());
  for (long i = 0; i < m.rows(); ++i) {
    for (long j = 0; j < m.cols(); ++j) v(i * m.cols() + j) = m(i, j);
  }
  return v;
}

inline Mat scalar(double x) {
  Mat m(1, 1);
  m(0, 0) = x;
  return m;
}

inline void require_samples(std::size_t n) {
  if (n == 0) throw DomainError("natural_gradient: n_samples must be at least 1");
}

inline void require_model_dim(const TargetModel& model, std::size_t d, const std::string& family) {
  if (model.dim() != d) {
    throw DimensionMismatch(family + ": model dimension " + std::to_string(model.dim()) +
                            " does not match family dimension " + std::to_string(d));
  }
}

inline void require_hessian(const TargetModel& model) {
  if (!model.has_hessian()) throw EstimatorUnavailable(model.name() + ": estimator needs the model Hessian");
}

// Running sums of per-sample tangents; the estimate is their mean.
class TangentAccumulator {
 public:
  void add(const std::vector<Mat>& sample) {
    if (sum_.empty()) {
      for (const Mat& m : sample) {
        sum_.push_back(Mat::Zero(m.rows(), m.cols()));
        sum_sq_.push_back(Mat::Zero(m.rows(), m.cols()));
      }
    }
    for (std::size_t b = 0; b < sample.size(); ++b) {
      sum_[b] += sample[b];
      sum_sq_[b] += sample[b].cwiseProduct(sample[b]);
    }
    ++n_;
  }

  std::size_t count() const { return n_; }

  NaturalGradientEstimate finish(Estimator est) const {
    NaturalGradientEstimate out;
    out.estimator = est;
    out.samples = n_;
    const double n = static_cast<double>(n_);
    for (std::size_t b = 0; b < sum_.size(); ++b) {
      const Mat mean = sum_[b] / n;
      Mat se(mean.rows(), mean.cols());
      for (long i = 0; i < se.rows(); ++i) {
        for (long j = 0; j < se.cols(); ++j) {
          if (n_ < 2) {
            se(i, j) = std::numeric_limits<double>::infinity();
          } else {
            const double var = std::max(0.0, (sum_sq_[b](i, j) - n * mean(i, j) * mean(i, j)) / (n - 1.0));
            se(i, j) = std::sqrt(var / n);
          }
        }
      }
      out.blocks.blocks.push_back(mean);
      out.se.blocks.push_back(se);
    }
    return out;
  }

 private:
  std::vector<Mat> sum_, sum_sq_;
  std::size_t n_ = 0;
};

inline BlockedTangent zero_se(const BlockedTangent& t) {
  BlockedTangent z;
  for (const Mat& m : t.blocks) z.blocks.push_back(Mat::Zero(m.rows(), m.cols()));
  return z;
}

// Concatenated block coordinates and the inverse map.
inline Vec flat_coordinates(const BlockedPoint& p) {
  std::vector<Vec> parts;
  long total = 0;
  for (std::size_t b = 0; b < p.size(); ++b) {
    parts.push_back(block_coordinates(p, b));
    total += parts.back().size();
  }
  Vec out(total);
  long at = 0;
  for (const Vec& v : parts) {
    out.segment(at, v.size()) = v;
    at += v.size();
  }
  return out;
}

inline BlockedPoint with_flat_coordinates(const BlockedPoint& p, const Vec& theta) {
  BlockedPoint out = p;
  long at = 0;
  for (std::size_t b = 0; b < p.size(); ++b) {
    const long n = static_cast<long>(p.constraints[b].coordinate_count());
    out = with_block_coordinates(out, b, theta.segment(at, n));
    at += n;
  }
  return out;
}

inline double gaussian_log_pdf(const Vec& z, const Vec& mu, const SPDMatrix& S) {
  const Vec r = z - mu;
  const double d = static_cast<double>(z.size());
  return -0.5 * d * kLog2Pi + 0.5 * S.log_det() - 0.5 * r.dot(S.data() * r);
}

// mu + L^{-T} eps for S = L L^T.
inline Vec gaussian_draw(RngStream& rng, const Vec& mu, const SPDMatrix& S) {
  const Vec eps = sample_std_normal(rng, static_cast<std::size_t>(mu.size()));
  return mu + back_substitute_transposed(S.chol(), eps);
}

inline double log_sum_exp(const std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

// Symmetric basis matrix for the k-th upper-triangle coordinate of a d x d block.
inline Mat spd_basis(std::size_t d, std::size_t k) {
  Mat e = Mat::Zero(static_cast<long>(d), static_cast<long>(d));
  std::size_t idx = 0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j, ++idx) {
      if (idx == k) {
        e(static_cast<long>(i), static_cast<long>(j)) = 1.0;
        e(static_cast<long>(j), static_cast<long>(i)) = 1.0;
        return e;
      }
    }
  }
  throw DomainError("spd_basis: coordinate out of range");
}

std::unique_ptr<Family> make_gaussian_full_impl(const Vec& mu, const Mat& S);
std::unique_ptr<Family> make_gaussian_diag_impl(const Vec& mu, const Vec& s);
std::unique_ptr<Family> make_gamma_lambda(double lam1, double lam2);
std::unique_ptr<Family> make_exponential_impl(double rate);
std::unique_ptr<Family> make_inverse_gaussian_lambda(double lam1, double lam2);
std::unique_ptr<Family> make_mog_impl(const std::vector<double>& log_weights, const std::vector<Vec>& mus,
                                      const std::vector<Mat>& Ss, const FamilyOptions& opts);
std::unique_ptr<Family> make_skew_impl(const Vec& mu, const Vec& alpha, const Mat& S, const FamilyOptions& opts);

}  // namespace iblr::detail
