#include "iblr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "iblr/errors.hpp"

namespace iblr {

namespace {

constexpr std::uint64_t kEvalStreamBase = 1ULL << 32;

// Rows in lexicographic order so that results do not depend on input order.
Mat sorted_rows(const Mat& m) {
  std::vector<long> idx(static_cast<std::size_t>(m.rows()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<long>(i);
  std::sort(idx.begin(), idx.end(), [&](long x, long y) {
    for (long j = 0; j < m.cols(); ++j) {
      if (m(x, j) != m(y, j)) return m(x, j) < m(y, j);
    }
    return x < y;
  });
  Mat out(m.rows(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<long>(i)) = m.row(idx[i]);
  return out;
}

bool lex_less(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows();
  for (long i = 0; i < a.rows(); ++i) {
    for (long j = 0; j < a.cols(); ++j) {
      if (a(i, j) != b(i, j)) return a(i, j) < b(i, j);
    }
  }
  return false;
}

double sq_dist(const Mat& a, long i, const Mat& b, long j) {
  double s = 0.0;
  for (long c = 0; c < a.cols(); ++c) {
    const double d = a(i, c) - b(j, c);
    s += d * d;
  }
  return s;
}

// Sum of k over pairs i != j within one set, each unordered pair counted twice.
double within_sum(const Mat& x, double inv2h2) {
  double total = 0.0;
  for (long i = 0; i < x.rows(); ++i) {
    double row = 0.0;
    for (long j = i + 1; j < x.rows(); ++j) row += std::exp(-sq_dist(x, i, x, j) * inv2h2);
    total += row;
  }
  return 2.0 * total;
}

}  // namespace

MetricResult neg_elbo_mc(const Family& q, const TargetModel& model, RngStream& rng, std::size_t n) {
  if (n == 0) throw DomainError("neg_elbo_mc: need at least one sample");
  if (q.dim() != model.dim()) throw DimensionMismatch("neg_elbo_mc: family and model dimensions differ");
  const Mat z = q.sample(rng, n);
  double sum = 0.0, sum_sq = 0.0;
  for (long i = 0; i < z.rows(); ++i) {
    const Vec zi = z.row(i).transpose();
    if (!model.in_support(zi)) throw SupportError(model.name() + ": draw outside the model support");
    const double v = model.loss(zi) + q.log_density(zi);
    sum += v;
    sum_sq += v * v;
  }
  MetricResult r;
  r.name = "neg_elbo";
  r.n_samples = n;
  const double nn = static_cast<double>(n);
  r.value = sum / nn;
  if (n < 2) {
    r.std_error = std::numeric_limits<double>::infinity();
  } else {
    const double var = std::max(0.0, (sum_sq - nn * r.value * r.value) / (nn - 1.0));
    r.std_error = std::sqrt(var / nn);
  }
  return r;
}

std::optional<double> neg_elbo_exact(const Family& q, const TargetModel& model) {
  if (q.kind() != FamilyKind::GaussianFull && q.kind() != FamilyKind::GaussianDiag) return std::nullopt;
  const BlockedPoint p = q.blocked_point();
  const Vec mu = p.values[0].col(0);
  Mat S;
  if (q.kind() == FamilyKind::GaussianFull) {
    S = p.values[1];
  } else {
    S = Mat::Zero(mu.size(), mu.size());
    for (long i = 0; i < mu.size(); ++i) S(i, i) = p.values[static_cast<std::size_t>(i) + 1](0, 0);
  }
  const std::optional<double> el = model.gaussian_expected_loss(mu, SPDMatrix(S));
  if (!el) return std::nullopt;
  return *el - *q.entropy();
}

MetricResult elbo_gap(const Family& q, const TargetModel& model) {
  const std::optional<ExactSolution> sol = model.exact_solution();
  if (!sol) throw DomainError(model.name() + ": no closed-form optimum");
  const std::optional<double> l = neg_elbo_exact(q, model);
  if (!l) throw DomainError("elbo_gap: no closed-form objective for " + q.name());
  MetricResult r;
  r.name = "elbo_gap";
  r.value = *l - sol->neg_elbo;
  return r;
}

double median_pairwise_distance(const Mat& pooled) {
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (long i = 0; i < pooled.rows(); ++i) {
    for (long j = i + 1; j < pooled.rows(); ++j) d.push_back(std::sqrt(sq_dist(pooled, i, pooled, j)));
  }
  if (d.empty()) throw DomainError("median_pairwise_distance: need at least two points");
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<long>(mid), d.end());
  double med = d[mid];
  if (d.size() % 2 == 0) {
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<long>(mid));
    med = 0.5 * (med + lower);
  }
  return med;
}

MetricResult mmd_rbf(const Mat& a_in, const Mat& b_in, std::optional<double> bandwidth) {
  if (a_in.rows() < 2 || b_in.rows() < 2) throw DomainError("mmd_rbf: each sample set needs at least two rows");
  if (a_in.cols() != b_in.cols()) throw DimensionMismatch("mmd_rbf: sample dimensions differ");
  Mat x = sorted_rows(a_in);
  Mat y = sorted_rows(b_in);
  if (lex_less(y, x)) std::swap(x, y);

  double h;
  if (bandwidth) {
    h = *bandwidth;
  } else {
    Mat pooled(x.rows() + y.rows(), x.cols());
    pooled << x, y;
    h = median_pairwise_distance(sorted_rows(pooled));
  }
  if (!(h > 0.0)) throw DomainError("mmd_rbf: bandwidth must be positive");
  const double inv2h2 = 1.0 / (2.0 * h * h);

  const double m = static_cast<double>(x.rows());
  const double n = static_cast<double>(y.rows());
  const double kxx = within_sum(x, inv2h2);
  const double kyy = within_sum(y, inv2h2);
  MetricResult r;
  r.name = "mmd";
  r.n_samples = static_cast<std::size_t>(x.rows() + y.rows());
  if (x.rows() == y.rows()) {
    // Cross pairs with i != j only; identical sets then give exactly zero.
    double cross = 0.0;
    for (long i = 0; i < x.rows(); ++i) {
      double row = 0.0;
      for (long j = i + 1; j < x.rows(); ++j) {
        row += std::exp(-sq_dist(x, i, y, j) * inv2h2) + std::exp(-sq_dist(x, j, y, i) * inv2h2);
      }
      cross += row;
    }
    r.value = (kxx + kyy - 2.0 * cross) / (m * (m - 1.0));
  } else {
    double cross = 0.0;
    for (long i = 0; i < x.rows(); ++i) {
      double row = 0.0;
      for (long j = 0; j < y.rows(); ++j) row += std::exp(-sq_dist(x, i, y, j) * inv2h2);
      cross += row;
    }
    r.value = kxx / (m * (m - 1.0)) + kyy / (n * (n - 1.0)) - 2.0 * cross / (m * n);
  }
  return r;
}

MetricResult test_log_loss(const Family& q, const TargetModel& model, const Dataset& test, RngStream& rng,
                           std::size_t n) {
  if (!model.has_predictive()) throw EstimatorUnavailable(model.name() + ": no predictive distribution");
  if (n == 0) throw DomainError("test_log_loss: need at least one sample");
  if (test.rows() == 0) throw DomainError("test_log_loss: empty test set");
  const Mat z = q.sample(rng, n);
  double total = 0.0, var_total = 0.0;
  std::vector<double> lp(n);
  for (long i = 0; i < test.X.rows(); ++i) {
    const Vec x = test.X.row(i).transpose();
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < n; ++s) {
      lp[s] = model.log_predictive(z.row(static_cast<long>(s)).transpose(), x, test.y(i));
      mx = std::max(mx, lp[s]);
    }
    // log-mean-exp, with a delta-method variance of the log.
    double mean = 0.0, sq = 0.0;
    for (double v : lp) {
      const double w = std::exp(v - mx);
      mean += w;
      sq += w * w;
    }
    const double nn = static_cast<double>(n);
    mean /= nn;
    total += mx + std::log(mean);
    if (n >= 2) var_total += std::max(0.0, sq / nn - mean * mean) / (nn - 1.0) / (mean * mean);
  }
  const double N = static_cast<double>(test.rows());
  MetricResult r;
  r.name = "test_log_loss";
  r.value = -total / N;
  r.std_error = n >= 2 ? std::sqrt(var_total) / N : std::numeric_limits<double>::infinity();
  r.n_samples = n;
  return r;
}

TraceHook make_evaluator(const TargetModel& model, const EvaluatorConfig& cfg) {
  const bool gap = cfg.elbo_gap && model.exact_solution().has_value();
  return [&model, cfg, gap](const Family& q, TraceRecord& rec) {
    RngStream rng(cfg.seed, kEvalStreamBase + rec.iter);
    std::optional<double> exact;
    if (cfg.prefer_exact) exact = neg_elbo_exact(q, model);
    if (exact) {
      rec.neg_elbo = *exact;
      rec.neg_elbo_se = 0.0;
    } else {
      const MetricResult mc = neg_elbo_mc(q, model, rng, cfg.n_samples);
      rec.neg_elbo = mc.value;
      rec.neg_elbo_se = mc.std_error;
    }
    if (gap) rec.metrics["elbo_gap"] = elbo_gap(q, model).value;
    if (cfg.cadence == 0 || rec.iter % cfg.cadence != 0) return;
    if (cfg.test) rec.metrics["test_log_loss"] = test_log_loss(q, model, *cfg.test, rng, cfg.test_samples).value;
    if (cfg.reference) rec.metrics["mmd"] = mmd_rbf(q.sample(rng, cfg.mmd_samples), *cfg.reference).value;
  };
}

}  // namespace iblr
