#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iblr/linalg.hpp"
#include "iblr/manifold.hpp"
#include "iblr/models.hpp"
#include "iblr/rng.hpp"

namespace iblr {

enum class FamilyKind { GaussianFull, GaussianDiag, Gamma, Exponential, InverseGaussian, MixtureOfGaussians, SkewGaussian };

// rep/hess: reparameterization and Hessian tricks. ExactAtMean replaces the
// expectations by gradient and Hessian evaluated at the mean (Gaussians only).
enum class Estimator { Rep, Hess, ImplicitRep, ImportanceRep, ImportanceHess, ExactAtMean };

const char* family_kind_name(FamilyKind kind);
FamilyKind parse_family_kind(const std::string& name);
const char* estimator_name(Estimator e);
Estimator parse_estimator(const std::string& name);

struct NaturalGradientEstimate {
  BlockedTangent blocks;
  Estimator estimator = Estimator::Rep;
  std::size_t samples = 0;
  // G = S - E[hess lbar] for each SPD block; empty matrices elsewhere.
  std::vector<Mat> aux;
  // Elementwise standard errors; infinite with a single sample, zero for exact modes.
  BlockedTangent se;
};

// Direction for the original (unimproved) rule, expressed in the
// parameterization that rule uses. `point` holds those coordinates.
struct LegacyDirection {
  BlockedPoint point;
  BlockedTangent tangent;
};

struct FamilyOptions {
  bool weights_frozen = false;  // mixtures: keep the weights fixed
  bool alpha_frozen = false;    // skew Gaussian: keep the skew vector fixed
};

class Family {
 public:
  virtual ~Family() = default;

  virtual FamilyKind kind() const = 0;
  std::string name() const { return family_kind_name(kind()); }
  // Dimension of z.
  virtual std::size_t dim() const = 0;
  virtual const FamilyOptions& options() const { return options_; }

  virtual BlockedPoint blocked_point() const = 0;
  // Same kind and options at a new point. Throws ShapeMismatch on bad shapes.
  virtual std::unique_ptr<Family> with_point(const BlockedPoint& p) const = 0;
  std::unique_ptr<Family> clone() const { return with_point(blocked_point()); }

  // n x dim matrix of draws.
  virtual Mat sample(RngStream& rng, std::size_t n) const = 0;
  virtual double log_density(const Vec& z) const = 0;
  virtual bool in_support(const Vec& z) const { return z.allFinite(); }
  virtual std::optional<double> entropy() const { return std::nullopt; }
  virtual Vec mean() const = 0;

  virtual NaturalGradientEstimate natural_gradient(const TargetModel& model, RngStream& rng, std::size_t n,
                                                   Estimator est) const = 0;
  virtual ChristoffelContraction christoffel_contraction() const = 0;

  virtual LegacyDirection legacy_blr_natural_gradient(const TargetModel& model, RngStream& rng, std::size_t n,
                                                      Estimator est) const;
  // One step of the original rule; the result is in this family's own blocks.
  virtual StepResult legacy_step(const LegacyDirection& dir, double t) const;

  // Closed-form geometry. Families without a log-partition in closed form
  // throw DimensionUnsupported.
  virtual LogPartition log_partition() const;
  virtual Mat fim_block(std::size_t block) const;
  virtual Tensor3 christoffel_first_kind(std::size_t block) const;
  // Density over the concatenated block coordinates, for the Monte-Carlo oracle.
  virtual ParametricDensity parametric_density() const;

 protected:
  FamilyOptions options_;
};

std::unique_ptr<Family> from_blocked(FamilyKind kind, const BlockedPoint& point, const FamilyOptions& opts = {});

// Convenience constructors.
std::unique_ptr<Family> make_gaussian_full(const Vec& mu, const Mat& S);
std::unique_ptr<Family> make_gaussian_diag(const Vec& mu, const Vec& s);
std::unique_ptr<Family> make_gamma(double alpha, double beta);  // shape, rate
std::unique_ptr<Family> make_exponential(double rate);
std::unique_ptr<Family> make_inverse_gaussian(double alpha, double beta);  // shape, 1 / mean
// weights: K probabilities; pass an empty vector for uniform.
std::unique_ptr<Family> make_mog(const std::vector<double>& weights, const std::vector<Vec>& mus,
                                 const std::vector<Mat>& Ss, const FamilyOptions& opts = {});
std::unique_ptr<Family> make_skew_gaussian(const Vec& mu, const Vec& alpha, const Mat& S, const FamilyOptions& opts = {});

// Mean and covariance gradients of E_q[lbar] for a full Gaussian (Bonnet and
// Price identities), with elementwise standard errors.
struct GaussianLossGradients {
  Vec grad_mu;
  Mat grad_sigma;
  Vec se_mu;
  Mat se_sigma;
  std::size_t samples = 0;
};
GaussianLossGradients gaussian_loss_gradients(const Vec& mu, const SPDMatrix& S, const TargetModel& model,
                                              RngStream& rng, std::size_t n, Estimator est);

// Typed accessors for the scalar families' parameters.
struct GammaParams {
  double alpha, beta;
};
GammaParams gamma_params(const Family& f);
struct InverseGaussianParams {
  double alpha, beta;
};
InverseGaussianParams inverse_gaussian_params(const Family& f);

// Natural gradient from the Euclidean gradient of L over the family's flat
// block coordinates, using the closed-form FIM (scalar families only).
Vec natural_from_euclidean(const Family& f, const Vec& euclid);

// Implicit reparameterization derivatives at a draw z.
double gamma_dz_dalpha(double z, double alpha, double beta);
double inverse_gaussian_dz_dalpha(double z, double alpha, double beta);
double inverse_gaussian_dz_dbeta(double z, double alpha, double beta);
// Entropy of the inverse Gaussian and its partial derivatives.
double inverse_gaussian_entropy(double alpha, double beta);

// Mixture responsibilities delta_c(z) = N(z | mu_c, S_c) / q(z).
std::vector<double> mog_deltas(const Family& mog, const Vec& z);
std::vector<double> mog_weights(const Family& mog);
Vec mog_grad_log_density(const Family& mog, const Vec& z);
Mat mog_hess_log_density(const Family& mog, const Vec& z);

Vec skew_grad_log_density(const Family& skew, const Vec& z);

// JSON: {"family": name, "options": {...}, "blocks": [{"kind": ..., "value": ...}]}.
std::string family_to_json(const Family& f);
std::unique_ptr<Family> family_from_json(const std::string& text);

}  // namespace iblr
