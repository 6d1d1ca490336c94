#include <benchmark/benchmark.h>

#include "pctlab/data.hpp"
#include "pctlab/model.hpp"
#include "pctlab/rng.hpp"
#include "pctlab/train.hpp"

using namespace pctlab;

namespace {

Matrix random_batch(std::size_t n, std::size_t d) {
  Rng r(3);
  Matrix x(n, d);
  for (double& v : x.data()) v = r.normal();
  return x;
}

void BM_Forward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const MlpModel m = init_mlp({2, {32, 32}, 3, Activation::relu}, 1);
  const Matrix x = random_batch(batch, 2);
  for (auto _ : state) benchmark::DoNotOptimize(forward_logits(m, x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(64)->Arg(512);

void BM_ForwardBackward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const MlpModel m = init_mlp({2, {32, 32}, 3, Activation::relu}, 1);
  const Matrix x = random_batch(batch, 2);
  Matrix dl(batch, 3);
  for (double& v : dl.data()) v = 0.01;
  for (auto _ : state) {
    const ForwardResult f = forward(m, x);
    benchmark::DoNotOptimize(backward(m, f.cache, dl));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(512);

// One epoch of plain cross-entropy training on 1000 samples.
void BM_TrainEpoch(benchmark::State& state) {
  const LabeledDataset ds = make_blobs(3, 2, 334, 1.5, 1.0, 5);
  TrainSchedule s;
  s.epochs = 1;
  s.base_lr = 0.01;
  for (auto _ : state)
    benchmark::DoNotOptimize(train(init_mlp({2, {32, 32}, 3, Activation::relu}, 1), ds, s, ObjectiveSpec{}));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace
