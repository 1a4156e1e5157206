#include "grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "iblr/errors.hpp"
#include "iblr/io.hpp"
#include "iblr/special.hpp"

namespace iblr::cli {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::size_t kInnerPoints = 401;

Vec linspace(double lo, double hi, std::size_t n) {
  Vec v(static_cast<long>(n));
  for (std::size_t i = 0; i < n; ++i) v(static_cast<long>(i)) = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return v;
}

double trapezoid(const Vec& xs, const Vec& ys) {
  double s = 0.0;
  for (long i = 1; i < xs.size(); ++i) s += 0.5 * (ys(i) + ys(i - 1)) * (xs(i) - xs(i - 1));
  return s;
}

double neg_loss(const TargetModel& m, const Vec& z) {
  if (!m.in_support(z)) return -std::numeric_limits<double>::infinity();
  return -m.loss(z);
}

double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  const double f = pos - static_cast<double>(i);
  return i + 1 < v.size() ? v[i] * (1.0 - f) + v[i + 1] * f : v[i];
}

}  // namespace

std::string density_grid_csv(const TargetModel& target, const Family* approx, const std::array<double, 4>& box,
                             std::size_t res) {
  if (target.dim() != 2) {
    throw DimensionUnsupported("grid: density grids need a two-dimensional target, got dimension " +
                               std::to_string(target.dim()) + "; use --marginals");
  }
  if (approx && approx->dim() != 2) throw DimensionUnsupported("grid: the posterior is not two-dimensional");
  const DensityGrid g = density_grid(target, box[0], box[1], box[2], box[3], res, res);
  std::string out = csv_line({"x", "y", "target_logdensity", "approx_logdensity"});
  Vec z(2);
  for (long i = 0; i < g.xs.size(); ++i) {
    for (long j = 0; j < g.ys.size(); ++j) {
      z << g.xs(i), g.ys(j);
      std::string a;
      if (approx) {
        a = format_double(approx->in_support(z) ? approx->log_density(z) : -std::numeric_limits<double>::infinity());
      }
      out += csv_line({format_double(g.xs(i)), format_double(g.ys(j)), format_double(g.log_density(i, j)), a});
    }
  }
  return out;
}

double silverman_bandwidth(const Vec& s) {
  const double n = static_cast<double>(s.size());
  if (s.size() < 2) throw DomainError("silverman_bandwidth: need at least two samples");
  const double mean = s.mean();
  const double sd = std::sqrt((s.array() - mean).square().sum() / (n - 1.0));
  const std::vector<double> v(s.data(), s.data() + s.size());
  const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd > 0.0 ? sd : 1.0;
  return 0.9 * spread * std::pow(n, -0.2);
}

double kde(const Vec& s, double h, double x) {
  const double norm = 1.0 / (static_cast<double>(s.size()) * h * std::sqrt(2.0 * kPi));
  double acc = 0.0;
  for (long i = 0; i < s.size(); ++i) {
    const double u = (x - s(i)) / h;
    acc += std::exp(-0.5 * u * u);
  }
  return norm * acc;
}

Vec target_marginal(const TargetModel& target, std::size_t coord, const Vec& xs, const std::array<double, 4>& box) {
  if (coord >= target.dim()) throw DimensionMismatch("target_marginal: coordinate out of range");
  Vec out(xs.size());
  if (const auto* t = dynamic_cast<const StudentTMixture*>(&target)) {
    const double nu = t->dof();
    const double log_c = log_gamma(0.5 * (nu + 1.0)) - log_gamma(0.5 * nu) - 0.5 * std::log(nu * kPi);
    const long j = static_cast<long>(coord);
    const double w = 1.0 / static_cast<double>(t->components().size());
    for (long i = 0; i < xs.size(); ++i) {
      double acc = 0.0;
      for (const auto& c : t->components()) {
        const double scale = std::sqrt(c.V(j, j));
        const double r = (xs(i) - c.u(j)) / scale;
        acc += w * std::exp(log_c - std::log(scale) - 0.5 * (nu + 1.0) * std::log1p(r * r / nu));
      }
      out(i) = acc;
    }
    return out;
  }
  if (target.dim() == 1) {
    for (long i = 0; i < xs.size(); ++i) out(i) = neg_loss(target, Vec::Constant(1, xs(i)));
  } else if (target.dim() == 2) {
    const Vec inner = coord == 0 ? linspace(box[2], box[3], kInnerPoints) : linspace(box[0], box[1], kInnerPoints);
    Vec z(2), vals(inner.size());
    for (long i = 0; i < xs.size(); ++i) {
      for (long k = 0; k < inner.size(); ++k) {
        z(static_cast<long>(coord)) = xs(i);
        z(static_cast<long>(1 - coord)) = inner(k);
        vals(k) = neg_loss(target, z);
      }
      const double m = vals.maxCoeff();
      out(i) = std::isfinite(m) ? m + std::log(trapezoid(inner, (vals.array() - m).exp().matrix())) : m;
    }
  } else {
    throw DimensionUnsupported("grid: marginals of a " + std::to_string(target.dim()) +
                               "-dimensional target need a closed form (Student-t mixtures only)");
  }
  // out holds log values here; normalize over xs.
  const double m = out.maxCoeff();
  if (!std::isfinite(m)) throw DomainError("target_marginal: the target has no mass on this range");
  out = (out.array() - m).exp().matrix();
  return out / trapezoid(xs, out);
}

std::string marginal_grid_csv(const TargetModel& target, const Mat& samples, const MarginalOptions& opts) {
  if (samples.cols() != static_cast<long>(target.dim())) {
    throw DimensionMismatch("grid: sample columns do not match the target dimension");
  }
  if (opts.res < 2) throw DomainError("grid: resolution must be at least 2");
  std::string out = csv_line({"coord", "x", "target_marginal", "approx_marginal"});
  for (long j = 0; j < samples.cols(); ++j) {
    const Vec s = samples.col(j);
    double lo, hi;
    if (opts.range) {
      lo = (*opts.range)[0];
      hi = (*opts.range)[1];
    } else {
      const double mean = s.mean();
      const double sd = std::sqrt((s.array() - mean).square().sum() / std::max<double>(1.0, s.size() - 1.0));
      lo = mean - 4.0 * sd;
      hi = mean + 4.0 * sd;
    }
    const Vec xs = linspace(lo, hi, opts.res);
    const Vec tm = target_marginal(target, static_cast<std::size_t>(j), xs, opts.box);
    const double h = opts.bandwidth.value_or(silverman_bandwidth(s));
    for (long i = 0; i < xs.size(); ++i) {
      out += csv_line({std::to_string(j + 1), format_double(xs(i)), format_double(tm(i)),
                       format_double(kde(s, h, xs(i)))});
    }
  }
  return out;
}

}  // namespace iblr::cli
