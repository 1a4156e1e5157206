#include <cmath>
#include <memory>

#include <json.hpp>

#include "families_internal.hpp"
#include "iblr/io.hpp"

namespace iblr {

using namespace detail;

namespace {

struct KindName {
  FamilyKind kind;
  const char* name;
};
constexpr KindName kKinds[] = {
    {FamilyKind::GaussianFull, "gaussian_full"},     {FamilyKind::GaussianDiag, "gaussian_diag"},
    {FamilyKind::Gamma, "gamma"},                    {FamilyKind::Exponential, "exponential"},
    {FamilyKind::InverseGaussian, "inverse_gaussian"}, {FamilyKind::MixtureOfGaussians, "mog"},
    {FamilyKind::SkewGaussian, "skew_gaussian"},
};

struct EstimatorName {
  Estimator est;
  const char* name;
};
constexpr EstimatorName kEstimators[] = {
    {Estimator::Rep, "rep"},
    {Estimator::Hess, "hess"},
    {Estimator::ImplicitRep, "implicit_rep"},
    {Estimator::ImportanceRep, "importance_rep"},
    {Estimator::ImportanceHess, "importance_hess"},
    {Estimator::ExactAtMean, "exact@mean"},
};

double positive_scalar_at(const BlockedPoint& p, std::size_t b) {
  if (p.constraints[b].kind != BlockKind::PositiveScalar) throw ShapeMismatch("expected a positive scalar block");
  return p.values[b](0, 0);
}

void require_blocks(const BlockedPoint& p, std::size_t n, const char* family) {
  if (p.size() != n) {
    throw ShapeMismatch(std::string(family) + ": expected " + std::to_string(n) + " blocks, got " +
                        std::to_string(p.size()));
  }
}

void require_kind(const BlockedPoint& p, std::size_t b, BlockKind kind, const char* family) {
  if (p.constraints[b].kind != kind) {
    throw ShapeMismatch(std::string(family) + ": block " + std::to_string(b) + " should be " + block_kind_name(kind));
  }
}

BlockKind parse_block_kind(const std::string& s) {
  for (BlockKind k : {BlockKind::RealVector, BlockKind::PositiveScalar, BlockKind::SPD}) {
    if (s == block_kind_name(k)) return k;
  }
  throw ParseError(0, "unknown block kind '" + s + "'");
}

}  // namespace

const char* family_kind_name(FamilyKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

FamilyKind parse_family_kind(const std::string& name) {
  for (const auto& k : kKinds) {
    if (name == k.name) return k.kind;
  }
  throw ConfigError("family", "unknown family '" + name + "'");
}

const char* estimator_name(Estimator e) {
  for (const auto& k : kEstimators) {
    if (k.est == e) return k.name;
  }
  return "unknown";
}

Estimator parse_estimator(const std::string& name) {
  for (const auto& k : kEstimators) {
    if (name == k.name) return k.est;
  }
  throw ConfigError("estimator", "unknown estimator '" + name + "'");
}

LegacyDirection Family::legacy_blr_natural_gradient(const TargetModel& model, RngStream& rng, std::size_t n,
                                                    Estimator est) const {
  LegacyDirection dir;
  dir.point = blocked_point();
  dir.tangent = natural_gradient(model, rng, n, est).blocks;
  return dir;
}

StepResult Family::legacy_step(const LegacyDirection& dir, double t) const {
  return ngd_step(dir.point, dir.tangent, t);
}

LogPartition Family::log_partition() const {
  throw DimensionUnsupported(name() + ": no closed-form log-partition");
}

Mat Family::fim_block(std::size_t) const { throw DimensionUnsupported(name() + ": no closed-form Fisher matrix"); }

Tensor3 Family::christoffel_first_kind(std::size_t) const {
  throw DimensionUnsupported(name() + ": no closed-form Christoffel symbols");
}

ParametricDensity Family::parametric_density() const {
  const BlockedPoint base = blocked_point();
  std::shared_ptr<const Family> self = clone();
  ParametricDensity q;
  q.n_params = static_cast<std::size_t>(flat_coordinates(base).size());
  q.log_q = [self, base](const Vec& th, const Vec& z) {
    return self->with_point(with_flat_coordinates(base, th))->log_density(z);
  };
  q.sample = [self, base](const Vec& th, RngStream& rng) -> Vec {
    return self->with_point(with_flat_coordinates(base, th))->sample(rng, 1).row(0).transpose();
  };
  return q;
}

std::unique_ptr<Family> from_blocked(FamilyKind kind, const BlockedPoint& p, const FamilyOptions& opts) {
  p.check_shapes();
  switch (kind) {
    case FamilyKind::GaussianFull:
      require_blocks(p, 2, "gaussian_full");
      require_kind(p, 0, BlockKind::RealVector, "gaussian_full");
      require_kind(p, 1, BlockKind::SPD, "gaussian_full");
      return make_gaussian_full_impl(as_vec(p.values[0]), p.values[1]);
    case FamilyKind::GaussianDiag: {
      if (p.size() < 2) throw ShapeMismatch("gaussian_diag: expected at least 2 blocks");
      require_kind(p, 0, BlockKind::RealVector, "gaussian_diag");
      require_blocks(p, p.constraints[0].dim + 1, "gaussian_diag");
      Vec s(static_cast<long>(p.size() - 1));
      for (std::size_t b = 1; b < p.size(); ++b) s(static_cast<long>(b - 1)) = positive_scalar_at(p, b);
      return make_gaussian_diag_impl(as_vec(p.values[0]), s);
    }
    case FamilyKind::Gamma:
      require_blocks(p, 2, "gamma");
      return make_gamma_lambda(positive_scalar_at(p, 0), positive_scalar_at(p, 1));
    case FamilyKind::Exponential:
      require_blocks(p, 1, "exponential");
      return make_exponential_impl(positive_scalar_at(p, 0));
    case FamilyKind::InverseGaussian:
      require_blocks(p, 2, "inverse_gaussian");
      return make_inverse_gaussian_lambda(positive_scalar_at(p, 0), positive_scalar_at(p, 1));
    case FamilyKind::MixtureOfGaussians: {
      // K = 1 has blocks (mu, S); K > 1 adds a leading weight block of size K - 1.
      const std::size_t n = p.size();
      if (n < 2 || (n != 2 && n % 2 == 0)) throw ShapeMismatch("mog: malformed block list");
      const std::size_t K = n == 2 ? 1 : (n - 1) / 2;
      const std::size_t first = K > 1 ? 1 : 0;
      std::vector<double> log_w(K, 0.0);
      if (K > 1) {
        require_kind(p, 0, BlockKind::RealVector, "mog");
        if (p.constraints[0].dim != K - 1) throw ShapeMismatch("mog: weight block should have K - 1 entries");
        for (std::size_t c = 0; c + 1 < K; ++c) log_w[c] = p.values[0](static_cast<long>(c), 0);
      }
      std::vector<Vec> mus;
      std::vector<Mat> Ss;
      for (std::size_t c = 0; c < K; ++c) {
        require_kind(p, first + 2 * c, BlockKind::RealVector, "mog");
        require_kind(p, first + 2 * c + 1, BlockKind::SPD, "mog");
        mus.push_back(as_vec(p.values[first + 2 * c]));
        Ss.push_back(p.values[first + 2 * c + 1]);
      }
      return make_mog_impl(log_w, mus, Ss, opts);
    }
    case FamilyKind::SkewGaussian: {
      require_blocks(p, 2, "skew_gaussian");
      require_kind(p, 0, BlockKind::RealVector, "skew_gaussian");
      require_kind(p, 1, BlockKind::SPD, "skew_gaussian");
      const long d = p.values[1].rows();
      if (p.values[0].rows() != 2 * d) throw ShapeMismatch("skew_gaussian: first block should hold mu and alpha");
      const Vec l1 = as_vec(p.values[0]);
      return make_skew_impl(l1.head(d), l1.tail(d), p.values[1], opts);
    }
  }
  throw DomainError("from_blocked: unknown family");
}

std::unique_ptr<Family> make_gaussian_full(const Vec& mu, const Mat& S) { return make_gaussian_full_impl(mu, S); }

std::unique_ptr<Family> make_gaussian_diag(const Vec& mu, const Vec& s) { return make_gaussian_diag_impl(mu, s); }

std::unique_ptr<Family> make_gamma(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("gamma: shape and rate must be positive");
  return make_gamma_lambda(alpha, beta / alpha);
}

std::unique_ptr<Family> make_exponential(double rate) { return make_exponential_impl(rate); }

std::unique_ptr<Family> make_inverse_gaussian(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("inverse_gaussian: alpha and beta must be positive");
  return make_inverse_gaussian_lambda(beta * beta, alpha);
}

std::unique_ptr<Family> make_mog(const std::vector<double>& weights, const std::vector<Vec>& mus,
                                 const std::vector<Mat>& Ss, const FamilyOptions& opts) {
  std::vector<double> log_w(mus.size(), 0.0);
  if (!weights.empty()) {
    if (weights.size() != mus.size()) throw ShapeMismatch("mog: need one weight per component");
    for (std::size_t c = 0; c < weights.size(); ++c) {
      if (!(weights[c] >= 0.0) || !std::isfinite(weights[c])) throw DomainError("mog: weights must be non-negative");
      log_w[c] = std::log(weights[c]);
    }
  }
  return make_mog_impl(log_w, mus, Ss, opts);
}

std::unique_ptr<Family> make_skew_gaussian(const Vec& mu, const Vec& alpha, const Mat& S, const FamilyOptions& opts) {
  return make_skew_impl(mu, alpha, S, opts);
}

Vec natural_from_euclidean(const Family& f, const Vec& euclid) {
  const BlockedPoint p = f.blocked_point();
  Vec out(euclid.size());
  long at = 0;
  for (std::size_t b = 0; b < p.size(); ++b) {
    const long n = static_cast<long>(p.constraints[b].coordinate_count());
    if (at + n > euclid.size()) throw DimensionMismatch("natural_from_euclidean: gradient too short");
    const SPDMatrix F(f.fim_block(b));
    out.segment(at, n) = F.solve(Vec(euclid.segment(at, n)));
    at += n;
  }
  if (at != euclid.size()) throw DimensionMismatch("natural_from_euclidean: gradient too long");
  return out;
}

std::string family_to_json(const Family& f) {
  const BlockedPoint p = f.blocked_point();
  JsonWriter w;
  w.begin_object();
  w.key("family").value(f.name());
  w.key("options").begin_object();
  w.key("weights_frozen").value(f.options().weights_frozen);
  w.key("alpha_frozen").value(f.options().alpha_frozen);
  w.end_object();
  w.key("blocks").begin_array();
  for (std::size_t b = 0; b < p.size(); ++b) {
    w.begin_object();
    w.key("kind").value(block_kind_name(p.constraints[b].kind));
    w.key("dim").value(static_cast<std::uint64_t>(p.constraints[b].dim));
    if (p.constraints[b].kind == BlockKind::SPD) {
      w.key("value").value(p.values[b]);
    } else if (p.constraints[b].kind == BlockKind::PositiveScalar) {
      w.key("value").value(p.values[b](0, 0));
    } else {
      w.key("value").value(as_vec(p.values[b]));
    }
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str();
}

std::unique_ptr<Family> family_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, e.what());
  }
  try {
    const FamilyKind kind = parse_family_kind(j.at("family").get<std::string>());
    FamilyOptions opts;
    if (j.contains("options")) {
      opts.weights_frozen = j["options"].value("weights_frozen", false);
      opts.alpha_frozen = j["options"].value("alpha_frozen", false);
    }
    BlockedPoint p;
    for (const auto& jb : j.at("blocks")) {
      const BlockKind bk = parse_block_kind(jb.at("kind").get<std::string>());
      const std::size_t d = jb.at("dim").get<std::size_t>();
      const auto& v = jb.at("value");
      if (bk == BlockKind::PositiveScalar) {
        p.push(BlockConstraint::positive_scalar(), scalar(v.get<double>()));
      } else if (bk == BlockKind::RealVector) {
        const auto xs = v.get<std::vector<double>>();
        if (xs.size() != d) throw ShapeMismatch("family_from_json: vector block has the wrong length");
        p.push(BlockConstraint::real_vector(d), column(Eigen::Map<const Vec>(xs.data(), static_cast<long>(d))));
      } else {
        const auto rows = v.get<std::vector<std::vector<double>>>();
        if (rows.size() != d) throw ShapeMismatch("family_from_json: matrix block has the wrong size");
        Mat m(static_cast<long>(d), static_cast<long>(d));
        for (std::size_t r = 0; r < d; ++r) {
          if (rows[r].size() != d) throw ShapeMismatch("family_from_json: matrix block is not square");
          for (std::size_t c = 0; c < d; ++c) m(static_cast<long>(r), static_cast<long>(c)) = rows[r][c];
        }
        p.push(BlockConstraint::spd(d), m);
      }
    }
    return from_blocked(kind, p, opts);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, e.what());
  }
}

}  // namespace iblr
