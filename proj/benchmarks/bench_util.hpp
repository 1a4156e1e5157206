#pragma once

#include "iblr/linalg.hpp"
#include "iblr/rng.hpp"

namespace iblr::bench {

inline Mat random_spd(RngStream& rng, long d) {
  Mat B(d, d);
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < d; ++j) B(i, j) = rng.normal();
  return B * B.transpose() / static_cast<double>(d) + Mat::Identity(d, d);
}

inline Mat random_symmetric(RngStream& rng, long d) {
  Mat B(d, d);
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < d; ++j) B(i, j) = rng.normal();
  return 0.5 * (B + B.transpose());
}

inline Vec random_vector(RngStream& rng, long d) {
  Vec v(d);
  for (long i = 0; i < d; ++i) v(i) = rng.normal();
  return v;
}

}  // namespace iblr::bench
