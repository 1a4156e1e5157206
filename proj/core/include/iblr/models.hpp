#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iblr/linalg.hpp"
#include "iblr/rng.hpp"

namespace iblr {

struct Minibatch {
  std::vector<std::size_t> indices;
};

// Gaussian posterior N(mu, S^{-1}) and the optimal negative ELBO.
struct ExactSolution {
  Vec mu;
  Mat S;
  double neg_elbo = 0.0;
};

// The problem side: lbar(z) = -log p(D, z) up to a stated constant.
// Passing a minibatch rescales the data term by N / M.
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;

  virtual double loss(const Vec& z, const Minibatch* batch) const = 0;
  virtual Vec grad(const Vec& z, const Minibatch* batch) const = 0;
  virtual bool has_hessian() const { return false; }
  virtual Mat hess(const Vec& z, const Minibatch* batch) const;

  double loss(const Vec& z) const { return loss(z, nullptr); }
  Vec grad(const Vec& z) const { return grad(z, nullptr); }
  Mat hess(const Vec& z) const { return hess(z, nullptr); }

  virtual bool in_support(const Vec& z) const { return z.allFinite(); }

  // Per-example access. The data term is sum_i l_i(z); the prior is
  // isotropic Gaussian with precision prior_precision().
  virtual std::size_t num_examples() const { return 0; }
  virtual bool has_per_example() const { return false; }
  virtual std::vector<Vec> per_example_grads(const Vec& z, const Minibatch& batch) const;
  // Mean of per-example data-term gradients over the batch.
  virtual Vec mean_example_grad(const Vec& z, const Minibatch& batch) const;
  virtual double prior_precision() const { return 0.0; }
  Minibatch minibatch(RngStream& rng, std::size_t size) const;

  virtual std::optional<ExactSolution> exact_solution() const { return std::nullopt; }
  // E_{N(mu, S^{-1})}[lbar] when it has a closed form.
  virtual std::optional<double> gaussian_expected_loss(const Vec& mu, const SPDMatrix& S) const {
    (void)mu;
    (void)S;
    return std::nullopt;
  }

  // log p(y | x, z) for predictive models.
  virtual bool has_predictive() const { return false; }
  virtual double log_predictive(const Vec& z, const Vec& x, double y) const;
};

struct Dataset {
  Mat X;
  Vec y;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(X.cols()); }
  // Rows listed in `idx`, with train covering all of them.
  Dataset subset(const std::vector<std::size_t>& idx) const;
  Dataset train_set() const { return subset(train); }
  Dataset test_set() const { return subset(test); }
};

enum class DatasetFormat { Csv, Libsvm };

struct LoadOptions {
  DatasetFormat format = DatasetFormat::Csv;
  std::optional<bool> header;      // CSV: autodetect when unset
  bool label_first = false;        // CSV: label column position
  std::size_t n_features = 0;      // libsvm: 0 means the largest index seen
  bool standardize = false;        // zero mean, unit variance per column
  std::size_t n_train = 0;         // 0 means every row is training data
  std::optional<std::uint64_t> shuffle_seed;
};

Dataset load_dataset(const std::string& path, const LoadOptions& opts);
Dataset parse_dataset(const std::string& text, const LoadOptions& opts);
// Splits the first n_train rows (after an optional seeded shuffle) from the rest.
void split_dataset(Dataset& ds, std::size_t n_train, std::optional<std::uint64_t> shuffle_seed);
void standardize_columns(Dataset& ds);

// 1/2 z^T A z + b^T z + c.
std::unique_ptr<TargetModel> quadratic_model(const Mat& A, const Vec& b, double c = 0.0);

// y = X z + noise with N(0, sigma2) noise and N(0, 1/prior) prior, all
// normalizing constants kept so the optimum equals -log p(D).
std::unique_ptr<TargetModel> bayes_linreg(const Dataset& data, double noise_var, double prior_precision);

// sum_i log(1 + exp(-y_i x_i^T z)) + (lambda / 2) |z|^2, labels in {-1, +1}.
std::unique_ptr<TargetModel> bayes_logreg(const Dataset& data, double prior_precision);

// Counts Y (N x d) ~ Poisson(H W^T) with H entries ~ Gamma(a0, b0); the
// latent vector is H in row-major order, W is held fixed.
struct GammaFactorData {
  Mat W;  // d x k, positive
  Mat Y;  // N x d counts
  Mat H_true;
  double a0 = 1.0;
  double b0 = 1.0;
};
GammaFactorData gamma_factor_generate(RngStream& rng, std::size_t N, std::size_t d, std::size_t k,
                                      double a0 = 1.0, double b0 = 1.0);
std::unique_ptr<TargetModel> gamma_factor_model(const GammaFactorData& data);
std::unique_ptr<TargetModel> gamma_factor_synthetic(RngStream& rng, std::size_t N, std::size_t d, std::size_t k);

// Restricts a model to one coordinate with the others held at `at`.
std::unique_ptr<TargetModel> coordinate_slice(std::shared_ptr<const TargetModel> model, const Vec& at,
                                              std::size_t coord);

// Synthetic two-class data: x ~ N(0, I) scaled, y drawn from a logistic link
// with weights w_true. A constant feature is not added.
Dataset synthetic_logistic(RngStream& rng, std::size_t N, const Vec& w_true, double feature_scale = 1.0);
Dataset synthetic_linear(RngStream& rng, std::size_t N, std::size_t d, double noise_sd);

// ---- toy densities ----

using CatalogEntry = std::map<std::string, std::string>;
using Catalog = std::map<std::string, CatalogEntry>;

// Reads an INI-style catalog: one [section] per density name.
Catalog load_catalog(const std::string& path);
// Default catalog location: $IBLR_CATALOG, else the source-tree copy, else the installed one.
std::string default_catalog_path();

class StudentTMixture;

std::unique_ptr<TargetModel> toy_density(const std::string& name, const CatalogEntry& params);
std::unique_ptr<TargetModel> toy_density(const std::string& name);  // default catalog
std::vector<std::string> toy_density_names();

// -lbar on an nx by ny grid over a 2-D box; entry (i, j) is at (xs(i), ys(j)).
struct DensityGrid {
  Vec xs;
  Vec ys;
  Mat log_density;
};
DensityGrid density_grid(const TargetModel& model, double x_lo, double x_hi, double y_lo, double y_hi,
                         std::size_t nx, std::size_t ny);

// Equal-weight mixture of multivariate Student-t densities.
class StudentTMixture : public TargetModel {
 public:
  struct Component {
    Vec u;
    Mat V;  // shape matrix
  };
  StudentTMixture(std::vector<Component> comps, double dof);
  // u entries iid uniform(-s, s); V = A^T A + I with A entries N(0, (0.1 d)^2).
  static StudentTMixture generate(RngStream& rng, std::size_t C, std::size_t d, double s, double dof);

  std::string name() const override { return "student_t_mixture"; }
  std::size_t dim() const override { return static_cast<std::size_t>(comps_.front().u.size()); }
  using TargetModel::grad;
  using TargetModel::loss;
  double loss(const Vec& z, const Minibatch* batch) const override;
  Vec grad(const Vec& z, const Minibatch* batch) const override;

  Mat sample(RngStream& rng, std::size_t n) const;
  const std::vector<Component>& components() const { return comps_; }
  double dof() const { return dof_; }

 private:
  std::vector<Component> comps_;
  std::vector<SPDMatrix> shape_;
  std::vector<double> log_norm_;
  double dof_;
};

// Generated Student-t mixture from catalog parameters (C, d, s, dof, seed).
StudentTMixture student_t_mixture_from(const CatalogEntry& params);

}  // namespace iblr
