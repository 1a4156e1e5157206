#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "iblr/errors.hpp"
#include "iblr/models.hpp"
#include "iblr/special.hpp"

#ifndef IBLR_DATA_DIR
#define IBLR_DATA_DIR "."
#endif

namespace iblr {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double get_double(const CatalogEntry& p, const std::string& key, double fallback) {
  const auto it = p.find(key);
  if (it == p.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "not a number: '" + it->second + "'");
  }
}

std::vector<double> get_list(const CatalogEntry& p, const std::string& key) {
  const auto it = p.find(key);
  if (it == p.end()) throw ConfigError(key, "missing");
  std::vector<double> out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError(key, "bad list entry '" + item + "'");
    }
  }
  return out;
}

void check_dim(const Vec& z, std::size_t d, const std::string& who) {
  if (static_cast<std::size_t>(z.size()) != d) {
    throw DimensionMismatch(who + ": expected dimension " + std::to_string(d) + ", got " + std::to_string(z.size()));
  }
}

// Twisted Gaussian: u = z1 / a, v = a z2 + a b (z1^2 + a^2), (u, v) ~ N(0, I).
// The map has unit Jacobian, so the density is normalized.
class Banana final : public TargetModel {
 public:
  Banana(double a, double b) : a_(a), b_(b) {
    if (!(a > 0.0)) throw ConfigError("a", "must be positive");
  }
  std::string name() const override { return "banana"; }
  std::size_t dim() const override { return 2; }
  double loss(const Vec& z, const Minibatch*) const override {
    check_dim(z, 2, name());
    const double u = z(0) / a_;
    const double v = a_ * z(1) + a_ * b_ * (z(0) * z(0) + a_ * a_);
    return 0.5 * (u * u + v * v) + kLog2Pi;
  }
  Vec grad(const Vec& z, const Minibatch*) const override {
    check_dim(z, 2, name());
    const double u = z(0) / a_;
    const double v = a_ * z(1) + a_ * b_ * (z(0) * z(0) + a_ * a_);
    Vec g(2);
    g(0) = u / a_ + v * 2.0 * a_ * b_ * z(0);
    g(1) = v * a_;
    return g;
  }
  bool has_hessian() const override { return true; }
  Mat hess(const Vec& z, const Minibatch*) const override {
    check_dim(z, 2, name());
    const double v = a_ * z(1) + a_ * b_ * (z(0) * z(0) + a_ * a_);
    const double dv0 = 2.0 * a_ * b_ * z(0);
    Mat h(2, 2);
    h(0, 0) = 1.0 / (a_ * a_) + dv0 * dv0 + v * 2.0 * a_ * b_;
    h(0, 1) = h(1, 0) = a_ * dv0;
    h(1, 1) = a_ * a_;
    return h;
  }

 private:
  double a_, b_;
};

// Standard normal prior with a noisy observation of log f, f the Rosenbrock function.
class DoubleBanana final : public TargetModel {
 public:
  DoubleBanana(double obs, double sigma) : log_obs_(std::log(obs)), sigma_(sigma) {
    if (!(obs > 0.0)) throw ConfigError("obs", "must be positive");
    if (!(sigma > 0.0)) throw ConfigError("sigma", "must be positive");
  }
  std::string name() const override { return "double_banana"; }
  std::size_t dim() const override { return 2; }
  bool in_support(const Vec& z) const override { return z.allFinite() && rosen(z) > 0.0; }
  double loss(const Vec& z, const Minibatch*) const override {
    check_dim(z, 2, name());
    const double r = log_obs_ - std::log(rosen(z));
    return 0.5 * z.squaredNorm() + r * r / (2.0 * sigma_ * sigma_);
  }
  Vec grad(const Vec& z, const Minibatch*) const override {
    check_dim(z, 2, name());
    const double f = rosen(z);
    const double r = log_obs_ - std::log(f);
    const double t = z(1) - z(0) * z(0);
    Vec df(2);
    df(0) = -2.0 * (1.0 - z(0)) - 400.0 * z(0) * t;
    df(1) = 200.0 * t;
    return z - (r / (sigma_ * sigma_ * f)) * df;
  }

 private:
  static double rosen(const Vec& z) {
    const double t = z(1) - z(0) * z(0);
    return (1.0 - z(0)) * (1.0 - z(0)) + 100.0 * t * t;
  }
  double log_obs_, sigma_;
};

// Posterior p(z | y) for y ~ N(3 z1^2 (z1^2 - 1) + z2^2, sigma^2), z ~ N(0, I).
class ToyBnn final : public TargetModel {
 public:
  ToyBnn(double y, double sigma) : y_(y), sigma_(sigma) {
    if (!(sigma > 0.0)) throw ConfigError("sigma", "must be positive");
  }
  std::string name() const override { return "toy_bnn"; }
  std::size_t dim() const override { return 2; }
  double loss(const Vec& z, const Minibatch*) const override {
    check_dim(z, 2, name());
    const double r = y_ - f(z);
    return 0.5 * z.squaredNorm() + kLog2Pi + r * r / (2.0 * sigma_ * sigma_) + 0.5 * kLog2Pi + std::log(sigma_);
  }
  Vec grad(const Vec& z, const Minibatch*) const override {
    check_dim(z, 2, name());
    const double r = y_ - f(z);
    return z - (r / (sigma_ * sigma_)) * df(z);
  }
  bool has_hessian() const override { return true; }
  Mat hess(const Vec& z, const Minibatch*) const override {
    check_dim(z, 2, name());
    const double r = y_ - f(z);
    const Vec g = df(z);
    const double s2 = sigma_ * sigma_;
    Mat h = (g * g.transpose()) / s2;
    h(0, 0) += 1.0 - r * (36.0 * z(0) * z(0) - 6.0) / s2;
    h(1, 1) += 1.0 - r * 2.0 / s2;
    return h;
  }

 private:
  static double f(const Vec& z) {
    const double z1s = z(0) * z(0);
    return 3.0 * z1s * (z1s - 1.0) + z(1) * z(1);
  }
  static Vec df(const Vec& z) {
    Vec g(2);
    g(0) = 12.0 * z(0) * z(0) * z(0) - 6.0 * z(0);
    g(1) = 2.0 * z(1);
    return g;
  }
  double y_, sigma_;
};

// Lap(z1 | 0, 1) Lap(z2 | z1, 1); the subgradient at each kink is taken as 0.
class CorrelatedLaplace final : public TargetModel {
 public:
  std::string name() const override { return "laplace"; }
  std::size_t dim() const override { return 2; }
  double loss(const Vec& z, const Minibatch*) const override {
    check_dim(z, 2, name());
    return std::fabs(z(0)) + std::fabs(z(1) - z(0)) + 2.0 * std::log(2.0);
  }
  Vec grad(const Vec& z, const Minibatch*) const override {
    check_dim(z, 2, name());
    const double s2 = sign0(z(1) - z(0));
    Vec g(2);
    g(0) = sign0(z(0)) - s2;
    g(1) = s2;
    return g;
  }
  bool has_hessian() const override { return true; }
  Mat hess(const Vec& z, const Minibatch*) const override {
    check_dim(z, 2, name());
    return Mat::Zero(2, 2);
  }
};

// Beta-binomial counts with z = (logit m, log kappa), alpha = m kappa,
// beta = (1 - m) kappa, and an isotropic Gaussian prior on z.
class BetaBinomial final : public TargetModel {
 public:
  BetaBinomial(std::vector<double> n, std::vector<double> y, double prior_var)
      : n_(std::move(n)), y_(std::move(y)), prior_var_(prior_var) {
    if (n_.size() != y_.size() || n_.empty()) throw ConfigError("n", "n and y must be non-empty and equal length");
    if (!(prior_var > 0.0)) throw ConfigError("prior_var", "must be positive");
    for (std::size_t i = 0; i < n_.size(); ++i) {
      if (!(n_[i] >= y_[i]) || !(y_[i] >= 0.0)) throw ConfigError("y", "counts must satisfy 0 <= y <= n");
      log_choose_ += log_gamma(n_[i] + 1.0) - log_gamma(y_[i] + 1.0) - log_gamma(n_[i] - y_[i] + 1.0);
    }
  }
  std::string name() const override { return "beta_binomial"; }
  std::size_t dim() const override { return 2; }
  double loss(const Vec& z, const Minibatch*) const override {
    check_dim(z, 2, name());
    const auto [a, b] = shape(z);
    double ll = log_choose_;
    for (std::size_t i = 0; i < n_.size(); ++i) {
      ll += log_beta(y_[i] + a, n_[i] - y_[i] + b) - log_beta(a, b);
    }
    return -ll + z.squaredNorm() / (2.0 * prior_var_) + kLog2Pi + std::log(prior_var_);
  }
  Vec grad(const Vec& z, const Minibatch*) const override {
    check_dim(z, 2, name());
    const auto [a, b] = shape(z);
    double da = 0.0, db = 0.0;
    const double dab = digamma(a + b);
    for (std::size_t i = 0; i < n_.size(); ++i) {
      const double dn = digamma(n_[i] + a + b);
      da += digamma(y_[i] + a) - dn - digamma(a) + dab;
      db += digamma(n_[i] - y_[i] + b) - dn - digamma(b) + dab;
    }
    const double m = a / (a + b);
    const double kappa = a + b;
    Vec g(2);
    g(0) = -(da - db) * kappa * m * (1.0 - m);
    g(1) = -(da * a + db * b);
    return g + z / prior_var_;
  }

 private:
  static std::pair<double, double> shape(const Vec& z) {
    const double kappa = std::exp(z(1));
    // Logistic with both tails handled.
    const double m = z(0) >= 0.0 ? 1.0 / (1.0 + std::exp(-z(0))) : std::exp(z(0)) / (1.0 + std::exp(z(0)));
    return {m * kappa, (1.0 - m) * kappa};
  }
  static double log_beta(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

  std::vector<double> n_, y_;
  double prior_var_;
  double log_choose_ = 0.0;
};

std::string density_type(const std::string& name, const CatalogEntry& params) {
  const auto it = params.find("type");
  return it == params.end() ? name : it->second;
}

}  // namespace

StudentTMixture::StudentTMixture(std::vector<Component> comps, double dof) : comps_(std::move(comps)), dof_(dof) {
  if (comps_.empty()) throw DomainError("student_t_mixture: needs at least one component");
  if (!(dof > 0.0)) throw DomainError("student_t_mixture: degrees of freedom must be positive");
  const long d = comps_.front().u.size();
  if (d == 0) throw DomainError("student_t_mixture: zero dimension");
  const double dd = static_cast<double>(d);
  for (const Component& c : comps_) {
    if (c.u.size() != d || c.V.rows() != d || c.V.cols() != d) {
      throw DimensionMismatch("student_t_mixture: component shapes disagree");
    }
    shape_.emplace_back(c.V);
    log_norm_.push_back(log_gamma(0.5 * (dof + dd)) - log_gamma(0.5 * dof) - 0.5 * dd * std::log(dof * M_PI) -
                        0.5 * shape_.back().log_det());
  }
}

StudentTMixture StudentTMixture::generate(RngStream& rng, std::size_t C, std::size_t d, double s, double dof) {
  if (C == 0 || d == 0) throw DomainError("student_t_mixture: sizes must be positive");
  const long n = static_cast<long>(d);
  const double sd = 0.1 * static_cast<double>(d);
  std::vector<Component> comps;
  for (std::size_t k = 0; k < C; ++k) {
    Component c;
    c.u.resize(n);
    for (long i = 0; i < n; ++i) c.u(i) = s * (2.0 * rng.uniform() - 1.0);
    Mat A(n, n);
    for (long i = 0; i < n; ++i) {
      for (long j = 0; j < n; ++j) A(i, j) = sd * rng.normal();
    }
    c.V = A.transpose() * A + Mat::Identity(n, n);
    comps.push_back(std::move(c));
  }
  return StudentTMixture(std::move(comps), dof);
}

double StudentTMixture::loss(const Vec& z, const Minibatch*) const {
  check_dim(z, dim(), name());
  const double dd = static_cast<double>(dim());
  std::vector<double> lp(comps_.size());
  for (std::size_t k = 0; k < comps_.size(); ++k) {
    const Vec r = z - comps_[k].u;
    const double delta = r.dot(shape_[k].solve(r));
    lp[k] = log_norm_[k] - 0.5 * (dof_ + dd) * std::log1p(delta / dof_);
  }
  const double mx = *std::max_element(lp.begin(), lp.end());
  double acc = 0.0;
  for (double v : lp) acc += std::exp(v - mx);
  return -(mx + std::log(acc)) + std::log(static_cast<double>(comps_.size()));
}

Vec StudentTMixture::grad(const Vec& z, const Minibatch*) const {
  check_dim(z, dim(), name());
  const double dd = static_cast<double>(dim());
  std::vector<double> lp(comps_.size());
  std::vector<Vec> g(comps_.size());
  for (std::size_t k = 0; k < comps_.size(); ++k) {
    const Vec r = z - comps_[k].u;
    const Vec vr = shape_[k].solve(r);
    const double delta = r.dot(vr);
    lp[k] = log_norm_[k] - 0.5 * (dof_ + dd) * std::log1p(delta / dof_);
    g[k] = -((dof_ + dd) / (dof_ + delta)) * vr;
  }
  const double mx = *std::max_element(lp.begin(), lp.end());
  double total = 0.0;
  for (double& v : lp) {
    v = std::exp(v - mx);
    total += v;
  }
  Vec out = Vec::Zero(z.size());
  for (std::size_t k = 0; k < comps_.size(); ++k) out -= (lp[k] / total) * g[k];
  return out;
}

Mat StudentTMixture::sample(RngStream& rng, std::size_t n) const {
  const long d = static_cast<long>(dim());
  Mat out(static_cast<long>(n), d);
  const std::vector<double> probs(comps_.size(), 1.0 / static_cast<double>(comps_.size()));
  for (long i = 0; i < out.rows(); ++i) {
    const std::size_t k = comps_.size() == 1 ? 0 : sample_categorical(rng, probs);
    const Vec eps = sample_std_normal(rng, static_cast<std::size_t>(d));
    const double chi2 = sample_gamma(rng, 0.5 * dof_, 0.5);
    const Vec x = comps_[k].u + (shape_[k].chol() * eps) / std::sqrt(chi2 / dof_);
    out.row(i) = x.transpose();
  }
  return out;
}

StudentTMixture student_t_mixture_from(const CatalogEntry& params) {
  const double C = get_double(params, "C", 4.0);
  const double d = get_double(params, "d", 5.0);
  const double s = get_double(params, "s", 5.0);
  const double dof = get_double(params, "dof", 2.0);
  const double seed = get_double(params, "seed", 1.0);
  if (!(C >= 1.0) || !(d >= 1.0)) throw ConfigError("C", "component count and dimension must be positive");
  if (!(seed >= 0.0)) throw ConfigError("seed", "must be non-negative");
  RngStream rng(static_cast<std::uint64_t>(seed), 0x7374);
  return StudentTMixture::generate(rng, static_cast<std::size_t>(C), static_cast<std::size_t>(d), s, dof);
}

Catalog load_catalog(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(e.line(), e.message() + " in " + path);
  }
  Catalog out;
  for (const auto& [section, body] : tree) {
    CatalogEntry entry;
    for (const auto& [key, value] : body) entry[key] = value.get_value<std::string>();
    out[section] = std::move(entry);
  }
  return out;
}

std::string default_catalog_path() {
  if (const char* env = std::getenv("IBLR_CATALOG"); env != nullptr && *env != '\0') return env;
  const std::string build_tree = std::string(IBLR_DATA_DIR) + "/toy_densities.ini";
  if (std::ifstream(build_tree).good()) return build_tree;
  return std::string(IBLR_INSTALL_DATA_DIR) + "/toy_densities.ini";
}

std::unique_ptr<TargetModel> toy_density(const std::string& name, const CatalogEntry& params) {
  const std::string type = density_type(name, params);
  if (type == "banana") return std::make_unique<Banana>(get_double(params, "a", 1.0), get_double(params, "b", 0.5));
  if (type == "double_banana") {
    return std::make_unique<DoubleBanana>(get_double(params, "obs", 30.0), get_double(params, "sigma", 0.3));
  }
  if (type == "toy_bnn") return std::make_unique<ToyBnn>(get_double(params, "y", 1.0), get_double(params, "sigma", 0.5));
  if (type == "laplace") return std::make_unique<CorrelatedLaplace>();
  if (type == "beta_binomial") {
    return std::make_unique<BetaBinomial>(get_list(params, "n"), get_list(params, "y"),
                                          get_double(params, "prior_var", 10.0));
  }
  if (type == "student_t_mixture") return std::make_unique<StudentTMixture>(student_t_mixture_from(params));
  throw UnknownDensity(name);
}

std::unique_ptr<TargetModel> toy_density(const std::string& name) {
  const Catalog cat = load_catalog(default_catalog_path());
  const auto it = cat.find(name);
  if (it == cat.end()) throw UnknownDensity(name);
  return toy_density(name, it->second);
}

DensityGrid density_grid(const TargetModel& model, double x_lo, double x_hi, double y_lo, double y_hi,
                         std::size_t nx, std::size_t ny) {
  if (model.dim() != 2) throw DimensionMismatch("density_grid: model must be two-dimensional");
  if (nx < 2 || ny < 2) throw DomainError("density_grid: need at least two points per axis");
  if (!(x_hi > x_lo) || !(y_hi > y_lo)) throw DomainError("density_grid: empty box");
  DensityGrid g;
  g.xs = Vec::LinSpaced(static_cast<long>(nx), x_lo, x_hi);
  g.ys = Vec::LinSpaced(static_cast<long>(ny), y_lo, y_hi);
  g.log_density.resize(static_cast<long>(nx), static_cast<long>(ny));
  Vec z(2);
  for (long i = 0; i < g.xs.size(); ++i) {
    for (long j = 0; j < g.ys.size(); ++j) {
      z << g.xs(i), g.ys(j);
      g.log_density(i, j) =
          model.in_support(z) ? -model.loss(z) : -std::numeric_limits<double>::infinity();
    }
  }
  return g;
}

std::vector<std::string> toy_density_names() {
  return {"banana", "beta_binomial", "double_banana", "laplace", "student_t_mixture", "toy_bnn"};
}

}  // namespace iblr
