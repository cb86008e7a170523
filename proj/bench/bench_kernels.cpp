// Serial reference vs OpenMP kernels on learner-sized batches.
#include <benchmark/benchmark.h>

#include <random>

#include "imitlab/kernels.hpp"

namespace {

using namespace imitlab;

struct ProjectionInput {
  Support support = Support::make(-50.0, 150.0, 21);
  Mat shifted;
  Mat probs;

  explicit ProjectionInput(int rows) : shifted(rows, 21), probs(rows, 21) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int b = 0; b < rows; ++b) {
      const double r = 20.0 * u(rng);
      for (int i = 0; i < 21; ++i) {
        shifted(b, i) = r + 0.99 * support.atoms[i];
        probs(b, i) = u(rng);
      }
      probs.row(b) /= probs.row(b).sum();
    }
  }
};

void BM_ProjectSerial(benchmark::State& state) {
  const ProjectionInput in(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::project_rows_serial(in.support, in.shifted, in.probs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ProjectParallel(benchmark::State& state) {
  const ProjectionInput in(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::project_rows(in.support, in.shifted, in.probs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

Vec random_scores(int n) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec s(n);
  for (int i = 0; i < n; ++i) s[i] = u(rng);
  return s;
}

void BM_RewardSerial(benchmark::State& state) {
  const Vec s = random_scores(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::reward_rows_serial(s, 1e-6));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_RewardParallel(benchmark::State& state) {
  const Vec s = random_scores(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::reward_rows(s, 1e-6));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_ProjectSerial)->Arg(256)->Arg(4096);
BENCHMARK(BM_ProjectParallel)->Arg(256)->Arg(4096);
BENCHMARK(BM_RewardSerial)->Arg(256)->Arg(65536);
BENCHMARK(BM_RewardParallel)->Arg(256)->Arg(65536);

BENCHMARK_MAIN();
