#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "iblr/linalg.hpp"

namespace iblr {

// One reproducible stream per (seed, stream_id). The engine and its seeding
// (std::seed_seq) are fully specified by the standard, and every transform
// below is written out here, so draws are bit-identical across platforms.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // A fresh, independent stream derived from this one's seed.
  RngStream substream(std::uint64_t id) const;

  std::uint64_t next_u64() { return engine_(); }
  double uniform();  // in (0, 1)
  double normal();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Vec sample_std_normal(RngStream& rng, std::size_t n);
double sample_gamma(RngStream& rng, double shape, double rate);
// Inverse Gaussian in the (alpha, beta) form: shape alpha, mean 1/beta.
double sample_inverse_gaussian(RngStream& rng, double alpha, double beta);
std::size_t sample_categorical(RngStream& rng, const std::vector<double>& probs);

}  // namespace iblr
