#include <benchmark/benchmark.h>

#include <vector>

#include "tac/codebook.hpp"
#include "tac/losses.hpp"
#include "tac/metrics.hpp"
#include "tac/profile.hpp"
#include "tac/rng.hpp"
#include "tac/tensor.hpp"

namespace {

using namespace tac;

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> data(shape_size(shape));
  for (double& v : data) v = rng.uniform(-1.0, 1.0);
  return Tensor::from_data(std::move(shape), std::move(data));
}

void bm_matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({n, n}, 1);
  const Tensor b = random_tensor({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(bm_matmul)->Arg(64)->Arg(128)->Arg(256);

void bm_matmul_backward(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<double> flat(n * n);
  for (double& v : flat) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    Tensor a = Tensor::from_data({n, n}, flat, true);
    Tensor b = Tensor::from_data({n, n}, flat, true);
    reduce_all(matmul(a, b), Reduce::Sum).backward();
    benchmark::DoNotOptimize(a.grad().data());
  }
}
BENCHMARK(bm_matmul_backward)->Arg(64)->Arg(128);

void bm_conv2d(benchmark::State& state) {
  const Tensor input = random_tensor({8, 16, 28, 28}, 4);
  const Tensor kernel = random_tensor({32, 16, 3, 3}, 5);
  for (auto _ : state)
    benchmark::DoNotOptimize(conv2d(input, kernel, 2, 1));
}
BENCHMARK(bm_conv2d);

void bm_layer_profile(benchmark::State& state) {
  const Tensor features = random_tensor({64, 512, 4, 4}, 6);
  for (auto _ : state)
    benchmark::DoNotOptimize(layer_profile(features, 16));
}
BENCHMARK(bm_layer_profile);

void bm_combined_loss(benchmark::State& state) {
  const CodeBook book = CodeBook::generate(10, 64, 0);
  const Tensor profiles = random_tensor({64, 64}, 7);
  std::vector<int> labels(64);
  Rng rng(8);
  for (int& y : labels) y = 1 + static_cast<int>(rng.uniform_int(10));
  const LossConfig cfg;
  for (auto _ : state)
    benchmark::DoNotOptimize(combined_loss(profiles, book, labels, cfg));
}
BENCHMARK(bm_combined_loss);

std::vector<ScoreRecord> score_set(std::size_t n) {
  Rng rng(9);
  std::vector<ScoreRecord> records(n);
  for (auto& r : records) {
    r.score = rng.uniform(-1.0, 1.0);
    r.positive = rng.bernoulli(0.5);
  }
  records[0].positive = true;
  records[1].positive = false;
  return records;
}

void bm_auroc(benchmark::State& state) {
  const auto records = score_set(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(auroc(records));
}
BENCHMARK(bm_auroc)->Arg(1000)->Arg(10000);

void bm_voc_curve(benchmark::State& state) {
  Rng rng(10);
  std::vector<ScoredPrediction> preds(500);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    preds[i].sample_id = i;
    preds[i].correct = rng.bernoulli(0.8);
    preds[i].confidence["s"] = rng.uniform(-1.0, 1.0);
  }
  const std::vector<double> omegas = default_omega_grid();
  for (auto _ : state)
    benchmark::DoNotOptimize(voc_curve(preds, "s", omegas, 5, 0));
}
BENCHMARK(bm_voc_curve);

}  // namespace
