#include <benchmark/benchmark.h>

#include "bench_util.hpp"
#include "iblr/metrics.hpp"

namespace {

using namespace iblr;

Mat random_draws(RngStream& rng, long n, long d) {
  Mat m(n, d);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < d; ++j) m(i, j) = rng.normal();
  return m;
}

// Unbiased RBF MMD between two n x 5 samples with the median-heuristic bandwidth.
void BM_MmdRbf(benchmark::State& state) {
  const long n = state.range(0);
  RngStream rng(6, 0);
  const Mat a = random_draws(rng, n, 5), b = random_draws(rng, n, 5);
  for (auto _ : state) {
    MetricResult r = mmd_rbf(a, b);
    benchmark::DoNotOptimize(r);
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_MmdRbf)->Arg(250)->Arg(500)->Arg(1000)->Arg(2000)->Complexity(benchmark::oNSquared);

}  // namespace
