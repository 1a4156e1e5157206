#include <benchmark/benchmark.h>

#include <vector>

#include "iblr/special.hpp"

namespace {

using namespace iblr;

std::vector<double> grid(double lo, double hi) {
  std::vector<double> xs;
  for (int i = 0; i < 256; ++i) xs.push_back(lo + (hi - lo) * i / 255.0);
  return xs;
}

template <double (*F)(double)>
void run(benchmark::State& state, const std::vector<double>& xs) {
  for (auto _ : state) {
    double acc = 0.0;
    for (double x : xs) acc += F(x);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(xs.size()));
}

void BM_Digamma(benchmark::State& s) { run<digamma>(s, grid(0.05, 50.0)); }
void BM_Trigamma(benchmark::State& s) { run<trigamma>(s, grid(0.05, 50.0)); }
void BM_Tetragamma(benchmark::State& s) { run<tetragamma>(s, grid(0.05, 50.0)); }
void BM_ExpE1(benchmark::State& s) { run<exp_e1>(s, grid(0.01, 200.0)); }
void BM_LogMillsRatio(benchmark::State& s) { run<log_mills_ratio>(s, grid(-40.0, 40.0)); }
BENCHMARK(BM_Digamma);
BENCHMARK(BM_Trigamma);
BENCHMARK(BM_Tetragamma);
BENCHMARK(BM_ExpE1);
BENCHMARK(BM_LogMillsRatio);

}  // namespace
