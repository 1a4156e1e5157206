#pragma once

#include <cmath>
#include <cstdint>

#include "iblr/linalg.hpp"
#include "iblr/rng.hpp"

namespace iblr::test {

inline Mat random_matrix(RngStream& rng, long r, long c) {
  Mat m(r, c);
  for (long i = 0; i < r; ++i) {
    for (long j = 0; j < c; ++j) m(i, j) = rng.normal();
  }
  return m;
}

inline Vec random_vector(RngStream& rng, long n) {
  Vec v(n);
  for (long i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

// A^T A + eps I.
inline Mat random_spd(RngStream& rng, long d, double eps = 0.5) {
  const Mat a = random_matrix(rng, d, d);
  return a.transpose() * a + eps * Mat::Identity(d, d);
}

inline Mat random_symmetric(RngStream& rng, long d, double scale = 1.0) {
  return scale * symmetrize(random_matrix(rng, d, d));
}

inline double rel_err(double a, double b) { return std::fabs(a - b) / std::max(1e-300, std::fabs(b)); }

}  // namespace iblr::test
