#include <benchmark/benchmark.h>

#include "bench_util.hpp"
#include "iblr/families.hpp"
#include "iblr/models.hpp"

namespace {

using namespace iblr;

std::unique_ptr<TargetModel> logreg(long d) {
  RngStream rng(2, 0);
  const Dataset ds = synthetic_logistic(rng, 500, Vec::Ones(d), 1.0);
  return bayes_logreg(ds, 1.0);
}

void gaussian_natural_gradient(benchmark::State& state, Estimator est) {
  const long d = state.range(0);
  const auto model = logreg(d);
  const auto q = make_gaussian_full(Vec::Zero(d), Mat::Identity(d, d));
  RngStream rng(3, 0);
  for (auto _ : state) {
    NaturalGradientEstimate g = q->natural_gradient(*model, rng, 10, est);
    benchmark::DoNotOptimize(g);
  }
  state.SetItemsProcessed(state.iterations() * 10);
}

// Ten-sample natural gradient of a full Gaussian on a 500-example logistic regression.
void BM_NaturalGradientRep(benchmark::State& state) { gaussian_natural_gradient(state, Estimator::Rep); }
BENCHMARK(BM_NaturalGradientRep)->Arg(2)->Arg(8)->Arg(32);

void BM_NaturalGradientHess(benchmark::State& state) { gaussian_natural_gradient(state, Estimator::Hess); }
BENCHMARK(BM_NaturalGradientHess)->Arg(2)->Arg(8)->Arg(32);

void BM_NaturalGradientGammaImplicit(benchmark::State& state) {
  RngStream data_rng(4, 0);
  const auto model = gamma_factor_model(gamma_factor_generate(data_rng, 1, 50, 1, 1.0, 1.0));
  const auto q = make_gamma(2.0, 1.0);
  RngStream rng(5, 0);
  for (auto _ : state) {
    NaturalGradientEstimate g = q->natural_gradient(*model, rng, 10, Estimator::ImplicitRep);
    benchmark::DoNotOptimize(g);
  }
  state.SetItemsProcessed(state.iterations() * 10);
}
BENCHMARK(BM_NaturalGradientGammaImplicit);

}  // namespace
