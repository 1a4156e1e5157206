#include <benchmark/benchmark.h>

#include "bench_util.hpp"
#include "iblr/families.hpp"
#include "iblr/manifold.hpp"
#include "iblr/optimizers.hpp"

namespace {

using namespace iblr;

// One retraction step of a full Gaussian with a large tangent in the precision.
void BM_RetractionStepGaussian(benchmark::State& state) {
  const long d = state.range(0);
  RngStream rng(1, 0);
  const auto q = make_gaussian_full(bench::random_vector(rng, d), bench::random_spd(rng, d));
  const BlockedPoint p = q->blocked_point();
  const BlockedTangent g{{Mat(bench::random_vector(rng, d)), Mat(5.0 * bench::random_symmetric(rng, d))}};
  const ChristoffelContraction gamma = q->christoffel_contraction();
  for (auto _ : state) {
    StepResult r = try_retraction_step(p, g, 0.5, gamma);
    benchmark::DoNotOptimize(r);
  }
  state.SetComplexityN(d);
}
BENCHMARK(BM_RetractionStepGaussian)->RangeMultiplier(2)->Range(2, 64)->Complexity();

// The first-order step on the same point, for comparison.
void BM_NgdStepGaussian(benchmark::State& state) {
  const long d = state.range(0);
  RngStream rng(1, 0);
  const auto q = make_gaussian_full(bench::random_vector(rng, d), bench::random_spd(rng, d));
  const BlockedPoint p = q->blocked_point();
  const BlockedTangent g{{Mat(bench::random_vector(rng, d)), Mat(bench::random_symmetric(rng, d))}};
  for (auto _ : state) {
    StepResult r = ngd_step(p, g, 0.5);
    benchmark::DoNotOptimize(r);
  }
  state.SetComplexityN(d);
}
BENCHMARK(BM_NgdStepGaussian)->RangeMultiplier(2)->Range(2, 64)->Complexity();

// Covariance-form update, which needs an inverse per step.
void BM_TranStep(benchmark::State& state) {
  const long d = state.range(0);
  RngStream rng(1, 0);
  const Vec mu = bench::random_vector(rng, d);
  const SPDMatrix sigma(bench::random_spd(rng, d));
  const Vec gm = bench::random_vector(rng, d);
  const Mat gs = bench::random_symmetric(rng, d);
  for (auto _ : state) {
    CovarianceStep r = tran_step(mu, sigma, gm, gs, 0.1);
    benchmark::DoNotOptimize(r);
  }
  state.SetComplexityN(d);
}
BENCHMARK(BM_TranStep)->RangeMultiplier(2)->Range(2, 64)->Complexity();

void BM_RetractionStepGamma(benchmark::State& state) {
  const auto q = make_gamma(2.0, 3.0);
  const BlockedPoint p = q->blocked_point();
  const BlockedTangent g{{Mat::Constant(1, 1, 4.0), Mat::Constant(1, 1, -2.0)}};
  const ChristoffelContraction gamma = q->christoffel_contraction();
  for (auto _ : state) {
    StepResult r = try_retraction_step(p, g, 0.5, gamma);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_RetractionStepGamma);

}  // namespace
