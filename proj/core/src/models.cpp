#include "iblr/models.hpp"

#include <cmath>
#include <optional>

#include "iblr/errors.hpp"
#include "iblr/special.hpp"

namespace iblr {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_dim(const Vec& z, std::size_t d, const char* who) {
  if (static_cast<std::size_t>(z.size()) != d) {
    throw DimensionMismatch(std::string(who) + ": expected dimension " + std::to_string(d) + ", got " +
                            std::to_string(z.size()));
  }
}

// Indices and the N / M factor that rescales a minibatch sum to the full data term.
struct BatchView {
  std::vector<std::size_t> idx;
  double scale = 1.0;
};

BatchView batch_view(const Minibatch* batch, std::size_t n) {
  BatchView v;
  if (batch == nullptr) {
    v.idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) v.idx[i] = i;
    return v;
  }
  if (batch->indices.empty()) throw DomainError("empty minibatch");
  for (std::size_t i : batch->indices) {
    if (i >= n) throw DomainError("minibatch index out of range");
  }
  v.idx = batch->indices;
  v.scale = static_cast<double>(n) / static_cast<double>(batch->indices.size());
  return v;
}

// Poisson draw; large rates are split using additivity.
double sample_poisson(RngStream& rng, double rate) {
  double count = 0.0;
  while (rate > 0.0) {
    const double r = std::min(rate, 20.0);
    rate -= r;
    const double limit = std::exp(-r);
    double prod = rng.uniform();
    while (prod > limit) {
      count += 1.0;
      prod *= rng.uniform();
    }
  }
  return count;
}

class QuadraticModel final : public TargetModel {
 public:
  QuadraticModel(const Mat& A, const Vec& b, double c) : A_(symmetrize(A)), b_(b), c_(c) {
    if (b_.size() != A_.rows()) throw DimensionMismatch("quadratic_model: b does not match A");
    try {
      chol_.emplace(A_);
    } catch (const NotPositiveDefinite&) {
      // Linear or indefinite losses are valid targets without a closed-form optimum.
    }
  }

  std::string name() const override { return "quadratic"; }
  std::size_t dim() const override { return static_cast<std::size_t>(b_.size()); }

  double loss(const Vec& z, const Minibatch*) const override {
    check_dim(z, dim(), "quadratic.loss");
    return 0.5 * z.dot(A_ * z) + b_.dot(z) + c_;
  }
  Vec grad(const Vec& z, const Minibatch*) const override {
    check_dim(z, dim(), "quadratic.grad");
    return A_ * z + b_;
  }
  bool has_hessian() const override { return true; }
  Mat hess(const Vec& z, const Minibatch*) const override {
    check_dim(z, dim(), "quadratic.hess");
    return A_;
  }

  std::optional<ExactSolution> exact_solution() const override {
    if (!chol_) return std::nullopt;
    ExactSolution s;
    s.mu = -chol_->solve(b_);
    s.S = A_;
    const double d = static_cast<double>(dim());
    s.neg_elbo = loss(s.mu, nullptr) - 0.5 * d * kLog2Pi + 0.5 * chol_->log_det();
    return s;
  }

  std::optional<double> gaussian_expected_loss(const Vec& mu, const SPDMatrix& S) const override {
    return loss(mu, nullptr) + 0.5 * (S.solve(A_)).trace();
  }

 private:
  Mat A_;
  Vec b_;
  double c_;
  std::optional<SPDMatrix> chol_;
};

class BayesLinReg final : public TargetModel {
 public:
  BayesLinReg(const Dataset& data, double noise_var, double prior)
      : X_(data.X), y_(data.y), noise_var_(noise_var), prior_(prior) {
    if (!(noise_var > 0.0)) throw DomainError("bayes_linreg: noise variance must be positive");
    if (!(prior > 0.0)) throw DomainError("bayes_linreg: prior precision must be positive");
    if (X_.rows() != y_.size()) throw ShapeError("bayes_linreg: X and y row counts differ");
    if (X_.rows() == 0) throw ShapeError("bayes_linreg: empty dataset");
    const long d = X_.cols();
    H_ = X_.transpose() * X_ / noise_var_;
    H_ += prior_ * Mat::Identity(d, d);
    Xty_ = X_.transpose() * y_ / noise_var_;
  }

  std::string name() const override { return "bayes_linreg"; }
  std::size_t dim() const override { return static_cast<std::size_t>(X_.cols()); }

  double loss(const Vec& z, const Minibatch* batch) const override {
    check_dim(z, dim(), "bayes_linreg.loss");
    const BatchView v = batch_view(batch, num_examples());
    double data = 0.0;
    for (std::size_t i : v.idx) data += example_loss(z, i);
    return v.scale * data + 0.5 * prior_ * z.squaredNorm() -
           0.5 * static_cast<double>(dim()) * (std::log(prior_) - kLog2Pi);
  }

  Vec grad(const Vec& z, const Minibatch* batch) const override {
    check_dim(z, dim(), "bayes_linreg.grad");
    if (batch == nullptr) return H_ * z - Xty_;
    const BatchView v = batch_view(batch, num_examples());
    Vec g = Vec::Zero(z.size());
    for (std::size_t i : v.idx) g += example_grad(z, i);
    return v.scale * g + prior_ * z;
  }

  bool has_hessian() const override { return true; }
  Mat hess(const Vec& z, const Minibatch* batch) const override {
    check_dim(z, dim(), "bayes_linreg.hess");
    if (batch == nullptr) return H_;
    const BatchView v = batch_view(batch, num_examples());
    const long d = X_.cols();
    Mat h = Mat::Zero(d, d);
    for (std::size_t i : v.idx) {
      const auto x = X_.row(static_cast<long>(i));
      h += x.transpose() * x;
    }
    return v.scale * h / noise_var_ + prior_ * Mat::Identity(d, d);
  }

  std::size_t num_examples() const override { return static_cast<std::size_t>(X_.rows()); }
  bool has_per_example() const override { return true; }
  std::vector<Vec> per_example_grads(const Vec& z, const Minibatch& batch) const override {
    check_dim(z, dim(), "bayes_linreg.per_example_grads");
    const BatchView v = batch_view(&batch, num_examples());
    std::vector<Vec> out;
    out.reserve(v.idx.size());
    for (std::size_t i : v.idx) out.push_back(example_grad(z, i));
    return out;
  }
  double prior_precision() const override { return prior_; }

  std::optional<ExactSolution> exact_solution() const override {
    const SPDMatrix S(H_);
    ExactSolution s;
    s.mu = S.solve(Xty_);
    s.S = H_;
    s.neg_elbo = loss(s.mu, nullptr) - 0.5 * static_cast<double>(dim()) * kLog2Pi + 0.5 * S.log_det();
    return s;
  }

  std::optional<double> gaussian_expected_loss(const Vec& mu, const SPDMatrix& S) const override {
    return loss(mu, nullptr) + 0.5 * S.solve(H_).trace();
  }

  bool has_predictive() const override { return true; }
  double log_predictive(const Vec& z, const Vec& x, double y) const override {
    const double r = y - x.dot(z);
    return -0.5 * (kLog2Pi + std::log(noise_var_)) - 0.5 * r * r / noise_var_;
  }

 private:
  double example_loss(const Vec& z, std::size_t i) const {
    const long r = static_cast<long>(i);
    const double res = y_(r) - X_.row(r).dot(z);
    return 0.5 * res * res / noise_var_ + 0.5 * (kLog2Pi + std::log(noise_var_));
  }
  Vec example_grad(const Vec& z, std::size_t i) const {
    const long r = static_cast<long>(i);
    const double res = y_(r) - X_.row(r).dot(z);
    return -(res / noise_var_) * X_.row(r).transpose();
  }

  Mat X_;
  Vec y_;
  double noise_var_;
  double prior_;
  Mat H_;
  Vec Xty_;
};

class BayesLogReg final : public TargetModel {
 public:
  BayesLogReg(const Dataset& data, double prior) : X_(data.X), y_(data.y), prior_(prior) {
    if (!(prior > 0.0)) throw DomainError("bayes_logreg: prior precision must be positive");
    if (X_.rows() != y_.size()) throw ShapeError("bayes_logreg: X and y row counts differ");
    if (X_.rows() == 0) throw ShapeError("bayes_logreg: empty dataset");
    for (long i = 0; i < y_.size(); ++i) {
      if (y_(i) != 1.0 && y_(i) != -1.0) throw DomainError("bayes_logreg: labels must be -1 or +1");
    }
  }

  std::string name() const override { return "bayes_logreg"; }
  std::size_t dim() const override { return static_cast<std::size_t>(X_.cols()); }

  double loss(const Vec& z, const Minibatch* batch) const override {
    check_dim(z, dim(), "bayes_logreg.loss");
    const BatchView v = batch_view(batch, num_examples());
    double data = 0.0;
    for (std::size_t i : v.idx) {
      const long r = static_cast<long>(i);
      data += softplus(-y_(r) * X_.row(r).dot(z));
    }
    return v.scale * data + 0.5 * prior_ * z.squaredNorm();
  }

  Vec grad(const Vec& z, const Minibatch* batch) const override {
    check_dim(z, dim(), "bayes_logreg.grad");
    const BatchView v = batch_view(batch, num_examples());
    Vec g = Vec::Zero(z.size());
    for (std::size_t i : v.idx) g += example_grad(z, i);
    return v.scale * g + prior_ * z;
  }

  bool has_hessian() const override { return true; }
  Mat hess(const Vec& z, const Minibatch* batch) const override {
    check_dim(z, dim(), "bayes_logreg.hess");
    const BatchView v = batch_view(batch, num_examples());
    const long d = X_.cols();
    Mat h = Mat::Zero(d, d);
    for (std::size_t i : v.idx) {
      const long r = static_cast<long>(i);
      const double p = sigmoid(X_.row(r).dot(z));
      h += (p * (1.0 - p)) * (X_.row(r).transpose() * X_.row(r));
    }
    return v.scale * h + prior_ * Mat::Identity(d, d);
  }

  std::size_t num_examples() const override { return static_cast<std::size_t>(X_.rows()); }
  bool has_per_example() const override { return true; }
  std::vector<Vec> per_example_grads(const Vec& z, const Minibatch& batch) const override {
    check_dim(z, dim(), "bayes_logreg.per_example_grads");
    const BatchView v = batch_view(&batch, num_examples());
    std::vector<Vec> out;
    out.reserve(v.idx.size());
    for (std::size_t i : v.idx) out.push_back(example_grad(z, i));
    return out;
  }
  double prior_precision() const override { return prior_; }

  bool has_predictive() const override { return true; }
  double log_predictive(const Vec& z, const Vec& x, double y) const override {
    return -softplus(-y * x.dot(z));
  }

 private:
  Vec example_grad(const Vec& z, std::size_t i) const {
    const long r = static_cast<long>(i);
    const double m = y_(r) * X_.row(r).dot(z);
    return (-y_(r) * sigmoid(-m)) * X_.row(r).transpose();
  }

  Mat X_;
  Vec y_;
  double prior_;
};

// lbar(H) = sum_nj [r_nj - Y_nj log r_nj + log Y_nj!] + sum_nk [b0 h - (a0 - 1) log h + const]
// with r = H W^T.
class GammaFactor final : public TargetModel {
 public:
  explicit GammaFactor(const GammaFactorData& data) : d_(data) {
    if (d_.W.cols() == 0 || d_.W.rows() != d_.Y.cols()) throw ShapeError("gamma_factor: W and Y shapes disagree");
    if ((d_.W.array() <= 0.0).any()) throw DomainError("gamma_factor: W must be positive");
    if (!(d_.a0 > 0.0) || !(d_.b0 > 0.0)) throw DomainError("gamma_factor: prior shape and rate must be positive");
    const_ = 0.0;
    for (long n = 0; n < d_.Y.rows(); ++n) {
      for (long j = 0; j < d_.Y.cols(); ++j) const_ += log_gamma(d_.Y(n, j) + 1.0);
    }
    const_ += static_cast<double>(d_.Y.rows() * d_.W.cols()) * (log_gamma(d_.a0) - d_.a0 * std::log(d_.b0));
  }

  std::string name() const override { return "gamma_factor"; }
  std::size_t dim() const override { return static_cast<std::size_t>(d_.Y.rows() * d_.W.cols()); }
  bool in_support(const Vec& z) const override { return z.allFinite() && (z.array() > 0.0).all(); }

  double loss(const Vec& z, const Minibatch*) const override {
    check_dim(z, dim(), "gamma_factor.loss");
    if (!in_support(z)) throw SupportError("gamma_factor: latents must be positive");
    const Mat H = as_matrix(z);
    const Mat rate = H * d_.W.transpose();
    double total = const_;
    for (long n = 0; n < rate.rows(); ++n) {
      for (long j = 0; j < rate.cols(); ++j) total += rate(n, j) - d_.Y(n, j) * std::log(rate(n, j));
    }
    for (long i = 0; i < z.size(); ++i) total += d_.b0 * z(i) - (d_.a0 - 1.0) * std::log(z(i));
    return total;
  }

  Vec grad(const Vec& z, const Minibatch*) const override {
    check_dim(z, dim(), "gamma_factor.grad");
    if (!in_support(z)) throw SupportError("gamma_factor: latents must be positive");
    const Mat H = as_matrix(z);
    const Mat rate = H * d_.W.transpose();
    const Mat resid = (1.0 - d_.Y.array() / rate.array()).matrix();
    const Mat G = resid * d_.W;
    Vec g(z.size());
    const long k = d_.W.cols();
    for (long n = 0; n < H.rows(); ++n) {
      for (long c = 0; c < k; ++c) {
        const long i = n * k + c;
        g(i) = G(n, c) + d_.b0 - (d_.a0 - 1.0) / z(i);
      }
    }
    return g;
  }

  bool has_hessian() const override { return true; }
  Mat hess(const Vec& z, const Minibatch*) const override {
    check_dim(z, dim(), "gamma_factor.hess");
    if (!in_support(z)) throw SupportError("gamma_factor: latents must be positive");
    const Mat H = as_matrix(z);
    const Mat rate = H * d_.W.transpose();
    const long k = d_.W.cols();
    Mat h = Mat::Zero(z.size(), z.size());
    for (long n = 0; n < H.rows(); ++n) {
      for (long j = 0; j < rate.cols(); ++j) {
        const double w = d_.Y(n, j) / (rate(n, j) * rate(n, j));
        for (long a = 0; a < k; ++a) {
          for (long b = 0; b < k; ++b) h(n * k + a, n * k + b) += w * d_.W(j, a) * d_.W(j, b);
        }
      }
    }
    for (long i = 0; i < z.size(); ++i) h(i, i) += (d_.a0 - 1.0) / (z(i) * z(i));
    return h;
  }

 private:
  Mat as_matrix(const Vec& z) const {
    return Eigen::Map<const Mat>(z.data(), d_.Y.rows(), d_.W.cols());
  }

  GammaFactorData d_;
  double const_ = 0.0;
};

class CoordinateSlice final : public TargetModel {
 public:
  CoordinateSlice(std::shared_ptr<const TargetModel> model, const Vec& at, std::size_t coord)
      : model_(std::move(model)), at_(at), coord_(coord) {
    if (!model_) throw DomainError("coordinate_slice: null model");
    check_dim(at_, model_->dim(), "coordinate_slice");
    if (coord_ >= model_->dim()) throw DomainError("coordinate_slice: coordinate out of range");
  }

  std::string name() const override { return model_->name() + "[" + std::to_string(coord_) + "]"; }
  std::size_t dim() const override { return 1; }
  bool in_support(const Vec& z) const override { return z.size() == 1 && model_->in_support(lift(z)); }

  double loss(const Vec& z, const Minibatch* batch) const override {
    check_dim(z, 1, "coordinate_slice.loss");
    return model_->loss(lift(z), batch);
  }
  Vec grad(const Vec& z, const Minibatch* batch) const override {
    check_dim(z, 1, "coordinate_slice.grad");
    Vec g(1);
    g(0) = model_->grad(lift(z), batch)(static_cast<long>(coord_));
    return g;
  }
  bool has_hessian() const override { return model_->has_hessian(); }
  Mat hess(const Vec& z, const Minibatch* batch) const override {
    check_dim(z, 1, "coordinate_slice.hess");
    const long c = static_cast<long>(coord_);
    Mat h(1, 1);
    h(0, 0) = model_->hess(lift(z), batch)(c, c);
    return h;
  }

 private:
  Vec lift(const Vec& z) const {
    Vec full = at_;
    full(static_cast<long>(coord_)) = z(0);
    return full;
  }

  std::shared_ptr<const TargetModel> model_;
  Vec at_;
  std::size_t coord_;
};

}  // namespace

Mat TargetModel::hess(const Vec&, const Minibatch*) const {
  throw EstimatorUnavailable(name() + ": no Hessian available");
}

std::vector<Vec> TargetModel::per_example_grads(const Vec&, const Minibatch&) const {
  throw PerExampleUnavailable(name() + ": per-example gradients unavailable");
}

Vec TargetModel::mean_example_grad(const Vec& z, const Minibatch& batch) const {
  const std::vector<Vec> gs = per_example_grads(z, batch);
  Vec m = Vec::Zero(z.size());
  for (const Vec& g : gs) m += g;
  return m / static_cast<double>(gs.size());
}

Minibatch TargetModel::minibatch(RngStream& rng, std::size_t size) const {
  const std::size_t n = num_examples();
  if (n == 0) throw PerExampleUnavailable(name() + ": model has no examples to batch");
  if (size == 0) throw DomainError("minibatch size must be positive");
  Minibatch b;
  b.indices.resize(size);
  for (std::size_t& i : b.indices) {
    i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
    if (i >= n) i = n - 1;
  }
  return b;
}

double TargetModel::log_predictive(const Vec&, const Vec&, double) const {
  throw EstimatorUnavailable(name() + ": no predictive distribution");
}

std::unique_ptr<TargetModel> quadratic_model(const Mat& A, const Vec& b, double c) {
  return std::make_unique<QuadraticModel>(A, b, c);
}

std::unique_ptr<TargetModel> bayes_linreg(const Dataset& data, double noise_var, double prior_precision) {
  return std::make_unique<BayesLinReg>(data, noise_var, prior_precision);
}

std::unique_ptr<TargetModel> bayes_logreg(const Dataset& data, double prior_precision) {
  return std::make_unique<BayesLogReg>(data, prior_precision);
}

GammaFactorData gamma_factor_generate(RngStream& rng, std::size_t N, std::size_t d, std::size_t k, double a0,
                                      double b0) {
  if (N == 0 || d == 0 || k == 0) throw DomainError("gamma_factor_generate: sizes must be positive");
  GammaFactorData out;
  out.a0 = a0;
  out.b0 = b0;
  const long n = static_cast<long>(N), dd = static_cast<long>(d), kk = static_cast<long>(k);
  out.W.resize(dd, kk);
  for (long j = 0; j < dd; ++j) {
    for (long c = 0; c < kk; ++c) out.W(j, c) = sample_gamma(rng, 2.0, 2.0);
  }
  out.H_true.resize(n, kk);
  for (long i = 0; i < n; ++i) {
    for (long c = 0; c < kk; ++c) out.H_true(i, c) = sample_gamma(rng, a0, b0);
  }
  const Mat rate = out.H_true * out.W.transpose();
  out.Y.resize(n, dd);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < dd; ++j) out.Y(i, j) = sample_poisson(rng, rate(i, j));
  }
  return out;
}

std::unique_ptr<TargetModel> gamma_factor_model(const GammaFactorData& data) {
  return std::make_unique<GammaFactor>(data);
}

std::unique_ptr<TargetModel> gamma_factor_synthetic(RngStream& rng, std::size_t N, std::size_t d, std::size_t k) {
  return gamma_factor_model(gamma_factor_generate(rng, N, d, k));
}

std::unique_ptr<TargetModel> coordinate_slice(std::shared_ptr<const TargetModel> model, const Vec& at,
                                              std::size_t coord) {
  return std::make_unique<CoordinateSlice>(std::move(model), at, coord);
}

Dataset synthetic_logistic(RngStream& rng, std::size_t N, const Vec& w_true, double feature_scale) {
  if (N == 0 || w_true.size() == 0) throw DomainError("synthetic_logistic: sizes must be positive");
  Dataset ds;
  ds.X.resize(static_cast<long>(N), w_true.size());
  ds.y.resize(static_cast<long>(N));
  for (long i = 0; i < ds.X.rows(); ++i) {
    for (long j = 0; j < ds.X.cols(); ++j) ds.X(i, j) = feature_scale * rng.normal();
    const double p = sigmoid(ds.X.row(i).dot(w_true));
    ds.y(i) = rng.uniform() < p ? 1.0 : -1.0;
  }
  ds.train.resize(N);
  for (std::size_t i = 0; i < N; ++i) ds.train[i] = i;
  return ds;
}

Dataset synthetic_linear(RngStream& rng, std::size_t N, std::size_t d, double noise_sd) {
  if (N == 0 || d == 0) throw DomainError("synthetic_linear: sizes must be positive");
  const Vec w = sample_std_normal(rng, d);
  Dataset ds;
  ds.X.resize(static_cast<long>(N), static_cast<long>(d));
  ds.y.resize(static_cast<long>(N));
  for (long i = 0; i < ds.X.rows(); ++i) {
    for (long j = 0; j < ds.X.cols(); ++j) ds.X(i, j) = rng.normal();
    ds.y(i) = ds.X.row(i).dot(w) + noise_sd * rng.normal();
  }
  ds.train.resize(N);
  for (std::size_t i = 0; i < N; ++i) ds.train[i] = i;
  return ds;
}

}  // namespace iblr
