#include "iblr/manifold.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "iblr/errors.hpp"

namespace iblr {

BlockConstraint BlockConstraint::real_vector(std::size_t d) {
  if (d == 0) throw ShapeMismatch("RealVector block needs a positive dimension");
  return {BlockKind::RealVector, d};
}

BlockConstraint BlockConstraint::positive_scalar() { return {BlockKind::PositiveScalar, 1}; }

BlockConstraint BlockConstraint::spd(std::size_t d) {
  if (d == 0) throw ShapeMismatch("SPD block needs a positive dimension");
  return {BlockKind::SPD, d};
}

std::size_t BlockConstraint::coordinate_count() const {
  return kind == BlockKind::SPD ? dim * (dim + 1) / 2 : dim;
}

const char* block_kind_name(BlockKind kind) {
  switch (kind) {
    case BlockKind::RealVector: return "real_vector";
    case BlockKind::PositiveScalar: return "positive_scalar";
    case BlockKind::SPD: return "spd";
  }
  return "?";
}

void BlockedPoint::push(BlockConstraint c, Mat value) {
  constraints.push_back(c);
  values.push_back(std::move(value));
}

void BlockedPoint::check_shapes() const {
  if (constraints.size() != values.size()) throw ShapeMismatch("constraint and value counts differ");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].rows() != constraints[i].rows() || values[i].cols() != constraints[i].cols()) {
      throw ShapeMismatch("block " + std::to_string(i) + " has shape " + std::to_string(values[i].rows()) + "x" +
                          std::to_string(values[i].cols()) + ", expected " + std::to_string(constraints[i].rows()) +
                          "x" + std::to_string(constraints[i].cols()));
    }
  }
}

bool block_feasible(const BlockConstraint& c, const Mat& value) {
  if (!value.allFinite()) return false;
  switch (c.kind) {
    case BlockKind::RealVector: return true;
    case BlockKind::PositiveScalar: return value(0, 0) > kPositiveFloor;
    case BlockKind::SPD: return spd_feasible(value);
  }
  return false;
}

bool is_feasible(const BlockedPoint& p) {
  for (std::size_t i = 0; i < p.size(); ++i)
    if (!block_feasible(p.constraints[i], p.values[i])) return false;
  return true;
}

namespace {

void check_congruent(const BlockedPoint& point, const BlockedTangent& g) {
  point.check_shapes();
  if (g.blocks.size() != point.size()) throw ShapeMismatch("tangent has a different block count than the point");
  for (std::size_t i = 0; i < point.size(); ++i) {
    if (g.blocks[i].rows() != point.values[i].rows() || g.blocks[i].cols() != point.values[i].cols()) {
      throw ShapeMismatch("tangent block " + std::to_string(i) + " does not match the point");
    }
  }
}

StepResult finish(BlockedPoint next) {
  StepResult r{std::move(next), true, 0};
  for (std::size_t i = 0; i < r.point.size(); ++i) {
    if (r.point.constraints[i].kind == BlockKind::SPD) r.point.values[i] = symmetrize(r.point.values[i]);
    if (r.feasible && !block_feasible(r.point.constraints[i], r.point.values[i])) {
      r.feasible = false;
      r.first_infeasible_block = i;
    }
  }
  return r;
}

}  // namespace

StepResult try_retraction_step(const BlockedPoint& point, const BlockedTangent& nat_grad, double t,
                               const ChristoffelContraction& gamma) {
  check_congruent(point, nat_grad);
  BlockedPoint next = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    Mat v = point.values[i] - t * nat_grad.blocks[i];
    if (gamma && t != 0.0) v -= 0.5 * t * t * gamma(point, i, nat_grad.blocks[i]);
    next.values[i] = std::move(v);
  }
  return finish(std::move(next));
}

BlockedPoint retraction_step(const BlockedPoint& point, const BlockedTangent& nat_grad, double t,
                             const ChristoffelContraction& gamma) {
  StepResult r = try_retraction_step(point, nat_grad, t, gamma);
  if (!r.feasible) throw InfeasibleResult(r.first_infeasible_block);
  return std::move(r.point);
}

StepResult ngd_step(const BlockedPoint& point, const BlockedTangent& nat_grad, double t) {
  check_congruent(point, nat_grad);
  BlockedPoint next = point;
  for (std::size_t i = 0; i < point.size(); ++i) next.values[i] = point.values[i] - t * nat_grad.blocks[i];
  return finish(std::move(next));
}

Mat spd_contraction(const Mat& S, const Mat& G) {
  const SPDMatrix s(S);
  return -symmetrize(G * s.solve(G));
}

Vec block_coordinates(const BlockedPoint& p, std::size_t block) {
  const BlockConstraint& c = p.constraints.at(block);
  const Mat& v = p.values.at(block);
  Vec out(static_cast<long>(c.coordinate_count()));
  if (c.kind != BlockKind::SPD) {
    for (long i = 0; i < out.size(); ++i) out(i) = v(i, 0);
    return out;
  }
  long k = 0;
  for (long i = 0; i < v.rows(); ++i)
    for (long j = i; j < v.cols(); ++j) out(k++) = v(i, j);
  return out;
}

BlockedPoint with_block_coordinates(const BlockedPoint& p, std::size_t block, const Vec& coords) {
  BlockedPoint q = p;
  const BlockConstraint& c = p.constraints.at(block);
  if (static_cast<std::size_t>(coords.size()) != c.coordinate_count()) {
    throw ShapeMismatch("coordinate vector has the wrong length");
  }
  Mat& v = q.values[block];
  if (c.kind != BlockKind::SPD) {
    for (long i = 0; i < coords.size(); ++i) v(i, 0) = coords(i);
    return q;
  }
  long k = 0;
  for (long i = 0; i < v.rows(); ++i)
    for (long j = i; j < v.cols(); ++j) {
      v(i, j) = coords(k);
      v(j, i) = coords(k);
      ++k;
    }
  return q;
}

Tensor3 raise_index(const Tensor3& first_kind, const Mat& fim) {
  const std::size_t n = first_kind.size();
  if (static_cast<std::size_t>(fim.rows()) != n) throw DimensionMismatch("raise_index: FIM size differs");
  const Mat inv = SPDMatrix(fim).inverse();
  Tensor3 out(n);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        double s = 0.0;
        for (std::size_t d = 0; d < n; ++d) s += inv(static_cast<long>(c), static_cast<long>(d)) * first_kind(d, a, b);
        out(c, a, b) = s;
      }
  return out;
}

namespace {

// A flat view over a chosen list of (block, coordinate) pairs.
struct FlatView {
  const BlockedPoint* base;
  std::vector<std::pair<std::size_t, std::size_t>> slots;

  double get(const BlockedPoint& p, std::size_t k) const {
    return block_coordinates(p, slots[k].first)(static_cast<long>(slots[k].second));
  }

  BlockedPoint shifted(const std::vector<std::pair<std::size_t, double>>& moves) const {
    BlockedPoint p = *base;
    for (const auto& [k, delta] : moves) {
      const std::size_t b = slots[k].first;
      Vec c = block_coordinates(p, b);
      c(static_cast<long>(slots[k].second)) += delta;
      p = with_block_coordinates(p, b, c);
    }
    return p;
  }

  double step(std::size_t k, double rel) const { return rel * std::max(1.0, std::fabs(get(*base, k))); }
};

FlatView view_of_block(const BlockedPoint& p, std::size_t block) {
  FlatView v{&p, {}};
  for (std::size_t i = 0; i < p.constraints.at(block).coordinate_count(); ++i) v.slots.emplace_back(block, i);
  return v;
}

double eval_checked(const LogPartition& A, const BlockedPoint& p) {
  if (!is_feasible(p)) throw StepTooLarge("finite-difference stencil leaves the feasible set");
  return A(p);
}

Mat hessian_fd(const LogPartition& A, const FlatView& v, double rel) {
  const std::size_t n = v.slots.size();
  Mat h(static_cast<long>(n), static_cast<long>(n));
  const double f0 = eval_checked(A, *v.base);
  for (std::size_t a = 0; a < n; ++a) {
    const double ha = v.step(a, rel);
    const double fp = eval_checked(A, v.shifted({{a, ha}}));
    const double fm = eval_checked(A, v.shifted({{a, -ha}}));
    h(static_cast<long>(a), static_cast<long>(a)) = (fp - 2.0 * f0 + fm) / (ha * ha);
    for (std::size_t b = a + 1; b < n; ++b) {
      const double hb = v.step(b, rel);
      const double fpp = eval_checked(A, v.shifted({{a, ha}, {b, hb}}));
      const double fpm = eval_checked(A, v.shifted({{a, ha}, {b, -hb}}));
      const double fmp = eval_checked(A, v.shifted({{a, -ha}, {b, hb}}));
      const double fmm = eval_checked(A, v.shifted({{a, -ha}, {b, -hb}}));
      const double val = (fpp - fpm - fmp + fmm) / (4.0 * ha * hb);
      h(static_cast<long>(a), static_cast<long>(b)) = val;
      h(static_cast<long>(b), static_cast<long>(a)) = val;
    }
  }
  return h;
}

}  // namespace

Mat fim_fd(const LogPartition& A, const BlockedPoint& point, std::size_t block, double rel_step) {
  return hessian_fd(A, view_of_block(point, block), rel_step);
}

Mat fim_fd_joint(const LogPartition& A, const BlockedPoint& point, double rel_step) {
  FlatView v{&point, {}};
  for (std::size_t b = 0; b < point.size(); ++b)
    for (std::size_t i = 0; i < point.constraints[b].coordinate_count(); ++i) v.slots.emplace_back(b, i);
  return hessian_fd(A, v, rel_step);
}

Tensor3 christoffel_a3_fd(const LogPartition& A, const BlockedPoint& point, std::size_t block, double rel_step) {
  const FlatView v = view_of_block(point, block);
  const std::size_t n = v.slots.size();
  Tensor3 out(n);
  // Differentiate the second-difference Hessian once more along each axis.
  for (std::size_t d = 0; d < n; ++d) {
    const double hd = v.step(d, rel_step);
    const BlockedPoint plus = v.shifted({{d, hd}});
    const BlockedPoint minus = v.shifted({{d, -hd}});
    FlatView vp{&plus, v.slots};
    FlatView vm{&minus, v.slots};
    const Mat hp = hessian_fd(A, vp, rel_step);
    const Mat hm = hessian_fd(A, vm, rel_step);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        out(d, a, b) = 0.25 * (hp(static_cast<long>(a), static_cast<long>(b)) - hm(static_cast<long>(a), static_cast<long>(b))) / hd;
  }
  return out;
}

ChristoffelEstimate christoffel_mc(const ParametricDensity& q, const Vec& theta,
                                   const std::vector<std::size_t>& coords, std::size_t n, RngStream& rng) {
  const std::size_t m = coords.size();
  if (m == 0 || n < 2) throw DomainError("christoffel_mc: need at least one coordinate and two samples");
  std::vector<double> h(m);
  for (std::size_t i = 0; i < m; ++i) h[i] = 1e-3 * std::max(1.0, std::fabs(theta(static_cast<long>(coords[i]))));

  std::vector<double> sum(m * m * m, 0.0), sum_sq(m * m * m, 0.0);
  std::vector<double> d1(m), d2(m * m), d3(m * m * m);

  for (std::size_t s = 0; s < n; ++s) {
    const Vec z = q.sample(theta, rng);
    auto f = [&](const std::vector<int>& steps) {
      Vec th = theta;
      for (std::size_t i = 0; i < m; ++i) th(static_cast<long>(coords[i])) += steps[i] * h[i];
      return q.log_q(th, z);
    };
    std::vector<int> st(m, 0);
    const double f0 = f(st);
    // Axis values at -2h, -h, +h, +2h.
    std::vector<double> fm2(m), fm1(m), fp1(m), fp2(m);
    for (std::size_t i = 0; i < m; ++i) {
      st.assign(m, 0);
      st[i] = -2; fm2[i] = f(st);
      st[i] = -1; fm1[i] = f(st);
      st[i] = 1; fp1[i] = f(st);
      st[i] = 2; fp2[i] = f(st);
      d1[i] = (fp1[i] - fm1[i]) / (2 * h[i]);
      d2[i * m + i] = (fp1[i] - 2 * f0 + fm1[i]) / (h[i] * h[i]);
      d3[(i * m + i) * m + i] = (fp2[i] - 2 * fp1[i] + 2 * fm1[i] - fm2[i]) / (2 * h[i] * h[i] * h[i]);
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        auto g = [&](int si, int sj) {
          st.assign(m, 0);
          st[i] = si;
          st[j] = sj;
          return f(st);
        };
        const double fpp = g(1, 1), fpm = g(1, -1), fmp = g(-1, 1), fmm = g(-1, -1);
        const double f0p = fp1[j], f0m = fm1[j], fp0 = fp1[i], fm0 = fm1[i];
        const double dij = (fpp - fpm - fmp + fmm) / (4 * h[i] * h[j]);
        d2[i * m + j] = d2[j * m + i] = dij;
        // d^3 / di di dj and d^3 / di dj dj
        const double iij = ((fpp - 2 * f0p + fmp) - (fpm - 2 * f0m + fmm)) / (2 * h[i] * h[i] * h[j]);
        const double ijj = ((fpp - 2 * fp0 + fpm) - (fmp - 2 * fm0 + fmm)) / (2 * h[i] * h[j] * h[j]);
        for (auto [a, b, c] : {std::array<std::size_t, 3>{i, i, j}, {i, j, i}, {j, i, i}}) d3[(a * m + b) * m + c] = iij;
        for (auto [a, b, c] : {std::array<std::size_t, 3>{i, j, j}, {j, i, j}, {j, j, i}}) d3[(a * m + b) * m + c] = ijj;
      }
    }
    if (m > 2) {
      // Fully mixed third derivatives for blocks with more than two coordinates.
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
          for (std::size_t k = j + 1; k < m; ++k) {
            double acc = 0.0;
            for (int si : {1, -1})
              for (int sj : {1, -1})
                for (int sk : {1, -1}) {
                  st.assign(m, 0);
                  st[i] = si;
                  st[j] = sj;
                  st[k] = sk;
                  acc += si * sj * sk * f(st);
                }
            const double v = acc / (8 * h[i] * h[j] * h[k]);
            for (auto [a, b, c] : {std::array<std::size_t, 3>{i, j, k}, {i, k, j}, {j, i, k}, {j, k, i}, {k, i, j}, {k, j, i}})
              d3[(a * m + b) * m + c] = v;
          }
    }
    for (std::size_t d = 0; d < m; ++d)
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b) {
          const double x = 0.5 * (d2[a * m + b] * d1[d] - d2[b * m + d] * d1[a] - d2[a * m + d] * d1[b] -
                                  d3[(a * m + b) * m + d]);
          sum[(d * m + a) * m + b] += x;
          sum_sq[(d * m + a) * m + b] += x * x;
        }
  }
  ChristoffelEstimate est{Tensor3(m), Tensor3(m), n};
  const double nn = static_cast<double>(n);
  for (std::size_t d = 0; d < m; ++d)
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) {
        const std::size_t k = (d * m + a) * m + b;
        const double mean = sum[k] / nn;
        const double var = std::max(0.0, (sum_sq[k] - nn * mean * mean) / (nn - 1.0));
        est.value(d, a, b) = mean;
        est.se(d, a, b) = std::sqrt(var / nn);
      }
  return est;
}

Mat gaussian_geodesic_exact(const Mat& S, const Mat& G, double t) {
  const SymmetricEigen eig = jacobi_eigen(S);
  if (!(eig.values(0) > 0.0)) throw NotPositiveDefinite(0);
  const Vec r = eig.values.cwiseSqrt();
  const Mat U = eig.vectors * r.asDiagonal() * eig.vectors.transpose();
  const Mat Uinv = eig.vectors * r.cwiseInverse().asDiagonal() * eig.vectors.transpose();
  const Mat inner = symmetrize(Uinv * (-G) * Uinv);
  return symmetrize(U * matrix_exponential(t * inner) * U);
}

UnivariateStep song_step_univariate(double mu, double scale, double g_mu, double g_scale, double t,
                                    UnivariateParam kind) {
  UnivariateStep s;
  const double half_t2 = 0.5 * t * t;
  if (kind == UnivariateParam::MeanStd) {
    s.mu = mu - t * g_mu + half_t2 * (2.0 * g_mu * g_scale / scale);
    s.scale = scale - t * g_scale + half_t2 * (2.0 * g_scale * g_scale - g_mu * g_mu) / (2.0 * scale);
  } else {
    s.mu = mu - t * g_mu + half_t2 * (g_mu * g_scale / scale);
    s.scale = scale - t * g_scale + half_t2 * (g_scale * g_scale / scale - g_mu * g_mu);
  }
  s.feasible = s.scale > kPositiveFloor;
  return s;
}

UnivariateStep blockwise_step_univariate(double mu, double scale, double g_mu, double g_scale, double t,
                                         UnivariateParam kind) {
  // Both parameterizations have Gamma^2_22 = -1/scale and Gamma^1_11 = 0.
  (void)kind;
  UnivariateStep s;
  s.mu = mu - t * g_mu;
  s.scale = scale - t * g_scale + 0.5 * t * t * g_scale * g_scale / scale;
  s.feasible = s.scale > kPositiveFloor;
  return s;
}

ParametricDensity univariate_gaussian_density(UnivariateParam kind) {
  ParametricDensity q;
  q.n_params = 2;
  if (kind == UnivariateParam::MeanStd) {
    q.log_q = [](const Vec& th, const Vec& z) {
      const double r = (z(0) - th(0)) / th(1);
      return -0.5 * r * r - std::log(th(1)) - 0.91893853320467274178;
    };
    q.sample = [](const Vec& th, RngStream& rng) {
      Vec z(1);
      z(0) = th(0) + th(1) * rng.normal();
      return z;
    };
  } else {
    q.log_q = [](const Vec& th, const Vec& z) {
      const double r = z(0) - th(0);
      return -0.5 * r * r / th(1) - 0.5 * std::log(th(1)) - 0.91893853320467274178;
    };
    q.sample = [](const Vec& th, RngStream& rng) {
      Vec z(1);
      z(0) = th(0) + std::sqrt(th(1)) * rng.normal();
      return z;
    };
  }
  return q;
}

Mat univariate_gaussian_fim(double scale, UnivariateParam kind) {
  Mat f = Mat::Zero(2, 2);
  if (kind == UnivariateParam::MeanStd) {
    f(0, 0) = 1.0 / (scale * scale);
    f(1, 1) = 2.0 / (scale * scale);
  } else {
    f(0, 0) = 1.0 / scale;
    f(1, 1) = 0.5 / (scale * scale);
  }
  return f;
}

Tensor3 univariate_gaussian_christoffel(double scale, UnivariateParam kind) {
  Tensor3 g(2);
  if (kind == UnivariateParam::MeanStd) {
    g(0, 0, 1) = g(0, 1, 0) = -1.0 / scale;
    g(1, 0, 0) = 0.5 / scale;
    g(1, 1, 1) = -1.0 / scale;
  } else {
    g(0, 0, 1) = g(0, 1, 0) = -0.5 / scale;
    g(1, 0, 0) = 1.0;
    g(1, 1, 1) = -1.0 / scale;
  }
  return g;
}

}  // namespace iblr
