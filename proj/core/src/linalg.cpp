#include "iblr/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "iblr/errors.hpp"

namespace iblr {

namespace {

void require_square(const Mat& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DimensionMismatch(std::string(what) + ": expected a non-empty square matrix");
  }
}

// Returns the index of the first pivot not exceeding `floor`, or -1.
long factor_in_place(const Mat& a, Mat& l, double floor) {
  const long n = a.rows();
  l.setZero(n, n);
  for (long j = 0; j < n; ++j) {
    double d = a(j, j);
    for (long k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > floor)) return j;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (long i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (long k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return -1;
}

}  // namespace

Mat symmetrize(const Mat& m) {
  require_square(m, "symmetrize");
  return 0.5 * (m + m.transpose());
}

Mat cholesky(const Mat& m) {
  const Mat a = symmetrize(m);
  Mat l;
  const long bad = factor_in_place(a, l, 0.0);
  if (bad >= 0) throw NotPositiveDefinite(static_cast<std::size_t>(bad));
  return l;
}

bool spd_feasible(const Mat& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if (!m.allFinite()) return false;
  const Mat a = symmetrize(m);
  const double floor = 1e-12 * std::max(a.trace(), 0.0) / static_cast<double>(a.rows());
  Mat l;
  return factor_in_place(a, l, floor) < 0;
}

Vec forward_substitute(const Mat& lower, const Vec& b) {
  const long n = lower.rows();
  if (b.size() != n) throw DimensionMismatch("forward_substitute: size mismatch");
  Vec x(n);
  for (long i = 0; i < n; ++i) {
    double s = b(i);
    for (long k = 0; k < i; ++k) s -= lower(i, k) * x(k);
    x(i) = s / lower(i, i);
  }
  return x;
}

Vec back_substitute_transposed(const Mat& lower, const Vec& b) {
  const long n = lower.rows();
  if (b.size() != n) throw DimensionMismatch("back_substitute: size mismatch");
  Vec x(n);
  for (long i = n - 1; i >= 0; --i) {
    double s = b(i);
    for (long k = i + 1; k < n; ++k) s -= lower(k, i) * x(k);
    x(i) = s / lower(i, i);
  }
  return x;
}

Mat forward_substitute(const Mat& lower, const Mat& b) {
  if (b.rows() != lower.rows()) throw DimensionMismatch("forward_substitute: size mismatch");
  Mat x(b.rows(), b.cols());
  for (long c = 0; c < b.cols(); ++c) x.col(c) = forward_substitute(lower, Vec(b.col(c)));
  return x;
}

Mat back_substitute_transposed(const Mat& lower, const Mat& b) {
  if (b.rows() != lower.rows()) throw DimensionMismatch("back_substitute: size mismatch");
  Mat x(b.rows(), b.cols());
  for (long c = 0; c < b.cols(); ++c) x.col(c) = back_substitute_transposed(lower, Vec(b.col(c)));
  return x;
}

SPDMatrix::SPDMatrix(const Mat& m) : data_(symmetrize(m)), chol_(cholesky(data_)) {}

SPDMatrix SPDMatrix::identity(std::size_t d) {
  return SPDMatrix(Mat::Identity(static_cast<long>(d), static_cast<long>(d)));
}

Vec SPDMatrix::solve(const Vec& b) const {
  if (static_cast<std::size_t>(b.size()) != dim()) {
    throw DimensionMismatch("solve_spd: right-hand side has the wrong length");
  }
  return back_substitute_transposed(chol_, forward_substitute(chol_, b));
}

Mat SPDMatrix::solve(const Mat& b) const {
  if (static_cast<std::size_t>(b.rows()) != dim()) {
    throw DimensionMismatch("solve_spd: right-hand side has the wrong row count");
  }
  return back_substitute_transposed(chol_, forward_substitute(chol_, b));
}

Mat SPDMatrix::inverse() const {
  const long n = data_.rows();
  return symmetrize(solve(Mat(Mat::Identity(n, n))));
}

double SPDMatrix::log_det() const {
  double s = 0.0;
  for (long i = 0; i < chol_.rows(); ++i) s += std::log(chol_(i, i));
  return 2.0 * s;
}

Vec solve_spd(const SPDMatrix& m, const Vec& b) { return m.solve(b); }
Mat solve_spd(const SPDMatrix& m, const Mat& b) { return m.solve(b); }

SymmetricEigen jacobi_eigen(const Mat& m) {
  require_square(m, "jacobi_eigen");
  const long n = m.rows();
  Mat a = symmetrize(m);
  Mat v = Mat::Identity(n, n);
  const double scale = std::max(a.norm(), 1e-300);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (long p = 0; p < n; ++p)
      for (long q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-15 * scale) break;
    for (long p = 0; p < n; ++p) {
      for (long q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (long k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (long k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (long k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<long> order(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](long x, long y) { return a(x, x) < a(y, y); });
  SymmetricEigen out{Vec(n), Mat(n, n)};
  for (long i = 0; i < n; ++i) {
    const long j = order[static_cast<std::size_t>(i)];
    out.values(i) = a(j, j);
    out.vectors.col(i) = v.col(j);
  }
  return out;
}

double min_eigenvalue(const Mat& m) { return jacobi_eigen(m).values(0); }

Mat matrix_exponential(const Mat& m) {
  require_square(m, "matrix_exponential");
  const long n = m.rows();
  // Induced infinity norm bounds the spectral radius; halving until it is
  // at most 1/2 keeps the order-12 remainder near 1e-14.
  double norm = 0.0;
  for (long i = 0; i < n; ++i) norm = std::max(norm, m.row(i).cwiseAbs().sum());
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Mat a = m / std::ldexp(1.0, squarings);
  const Mat id = Mat::Identity(n, n);
  Mat e = id;
  for (int k = 12; k >= 1; --k) e = id + (a * e) / static_cast<double>(k);
  for (int s = 0; s < squarings; ++s) e = e * e;
  return e;
}

Mat sym_sqrt(const Mat& m) {
  const SymmetricEigen eig = jacobi_eigen(m);
  Vec r = eig.values.cwiseMax(0.0).cwiseSqrt();
  return symmetrize(eig.vectors * r.asDiagonal() * eig.vectors.transpose());
}

double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace iblr
