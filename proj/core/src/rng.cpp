#include "iblr/rng.hpp"

#include <cmath>

#include "iblr/errors.hpp"

namespace iblr {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                    0x9e3779b9u};
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

RngStream RngStream::substream(std::uint64_t id) const {
  // Mix the parent stream id in so nested substreams do not collide.
  std::uint64_t z = stream_id_ + 0x9e3779b97f4a7c15ULL * (id + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return RngStream(seed_, z);
}

double RngStream::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Vec sample_std_normal(RngStream& rng, std::size_t n) {
  Vec out(static_cast<long>(n));
  for (long i = 0; i < out.size(); ++i) out(i) = rng.normal();
  return out;
}

double sample_gamma(RngStream& rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw DomainError("sample_gamma: shape and rate must be positive");
  if (shape < 1.0) {
    // Boost to shape + 1 and rescale by U^(1/shape).
    const double g = sample_gamma(rng, shape + 1.0, 1.0);
    return g * std::pow(rng.uniform(), 1.0 / shape) / rate;
  }
  // Marsaglia and Tsang (2000).
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

double sample_inverse_gaussian(RngStream& rng, double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("sample_inverse_gaussian: alpha and beta must be positive");
  // Michael, Schucany and Haas (1976) with mean m and shape s.
  const double m = 1.0 / beta;
  const double s = alpha;
  const double nu = rng.normal();
  const double y = nu * nu;
  const double my = m * y;
  const double x = m + m * my / (2.0 * s) - (m / (2.0 * s)) * std::sqrt(4.0 * s * my + my * my);
  const double u = rng.uniform();
  return u <= m / (m + x) ? x : m * m / x;
}

std::size_t sample_categorical(RngStream& rng, const std::vector<double>& probs) {
  if (probs.empty()) throw DomainError("sample_categorical: empty probability vector");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw DomainError("sample_categorical: negative probability");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-12 * static_cast<double>(probs.size())) {
    throw DomainError("sample_categorical: probabilities must sum to one");
  }
  const double u = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) last_positive = i;
    acc += probs[i];
    if (u < acc && probs[i] > 0.0) return i;
  }
  return last_positive;
}

}  // namespace iblr
