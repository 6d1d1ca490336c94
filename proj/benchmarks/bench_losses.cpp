#include <benchmark/benchmark.h>

#include "pctlab/losses.hpp"
#include "pctlab/rng.hpp"

using namespace pctlab;

namespace {

Vec random_vec(Rng& r, std::size_t n) {
  Vec v(n);
  for (double& x : v) x = r.normal();
  return v;
}

void BM_Ldi(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  Rng r(1);
  const Vec a = random_vec(r, c), b = random_vec(r, c);
  LdiConfig cfg;
  cfg.xi = 0.1;
  if (state.range(1) > 0) {
    cfg.subset = SubsetMode::top_k;
    cfg.top_k = static_cast<int>(state.range(1));
  }
  for (auto _ : state) benchmark::DoNotOptimize(ldi(a, b, cfg));
}
BENCHMARK(BM_Ldi)->Args({10, 0})->Args({100, 0})->Args({100, 10})->Args({1000, 10});

void BM_SampleObjectiveElodiPlusLegacy(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  Rng r(2);
  const Vec logits = random_vec(r, c), ens = random_vec(r, c), old = random_vec(r, c);
  ObjectiveSpec spec;
  spec.kind = ObjectiveKind::elodi_plus_legacy_ldi;
  spec.lambda = 0.5;
  SampleReferences refs;
  refs.ensemble = ens;
  refs.legacy = {old};
  for (auto _ : state) benchmark::DoNotOptimize(sample_objective(spec, logits, 0, refs));
}
BENCHMARK(BM_SampleObjectiveElodiPlusLegacy)->Arg(10)->Arg(100);

void BM_Kd(benchmark::State& state) {
  Rng r(3);
  const Vec a = random_vec(r, 100), b = random_vec(r, 100);
  for (auto _ : state) benchmark::DoNotOptimize(kd(a, b, 4.0));
}
BENCHMARK(BM_Kd);

}  // namespace
