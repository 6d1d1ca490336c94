#include <benchmark/benchmark.h>

#include <vector>

#include "pctlab/displacement.hpp"
#include "pctlab/numerics.hpp"
#include "pctlab/rng.hpp"

using namespace pctlab;

namespace {

Matrix gaussian_pool(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng r(seed);
  Matrix m(n, d);
  for (double& v : m.data()) v = r.normal();
  return m;
}

void BM_DisplacementNorms(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const LogitPools pools{gaussian_pool(64, 10, 1), {}};
  for (auto _ : state) benchmark::DoNotOptimize(displacement_norms(pools, m, 2000, 7));
  state.SetItemsProcessed(state.iterations() * 2000);
}
BENCHMARK(BM_DisplacementNorms)->Arg(1)->Arg(8)->Arg(32);

void BM_KdeDensity(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng r(2);
  Vec samples(n);
  for (double& v : samples) v = r.normal();
  const Vec grid = linspace(-4.0, 4.0, 200);
  const double h = silverman_bandwidth(samples);
  for (auto _ : state) benchmark::DoNotOptimize(kde_density(samples, h, grid));
}
BENCHMARK(BM_KdeDensity)->Arg(1000)->Arg(5000);

void BM_SimulatePmf(benchmark::State& state) {
  const LogitPools pools{gaussian_pool(32, 10, 3), {}};
  const DisplacementModel model = fit_gaussian_model(pools);
  const Vec grid = linspace(0.0, 10.0, 200);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_displacement_pmf(model, 4, 5000, 9, grid));
}
BENCHMARK(BM_SimulatePmf)->Unit(benchmark::kMillisecond);

}  // namespace
