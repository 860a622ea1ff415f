#include <benchmark/benchmark.h>

#include <vector>

#include "mtopt/analysis.hpp"
#include "mtopt/optimizer.hpp"
#include "mtopt/rng.hpp"
#include "mtopt/solvers.hpp"

using namespace mtopt;

namespace {

GramMatrix random_gram(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> cols(n, std::vector<double>(256));
  for (auto& c : cols)
    for (double& v : c) v = rng.normal() + 0.3;
  return GramMatrix::from_columns(cols, GramSource::updates);
}

void BM_solve_bargaining(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const GramMatrix g = random_gram(n, 7);
  for (auto _ : state) benchmark::DoNotOptimize(solve_bargaining(g));
}
BENCHMARK(BM_solve_bargaining)->Arg(2)->Arg(4)->Arg(8);

void BM_task_updates(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(11);
  OptimizerState st(OptimizerConfig{}, d);
  std::vector<std::vector<double>> grads(2, std::vector<double>(d));
  for (auto& g : grads)
    for (double& v : g) v = rng.normal();
  st.commit_moments(grads[0]);
  for (auto _ : state) benchmark::DoNotOptimize(compute_task_updates(st, grads));
  state.SetItemsProcessed(state.iterations() * 2 * d);
}
BENCHMARK(BM_task_updates)->Arg(1 << 10)->Arg(1 << 14)->Arg(1 << 17);

void BM_gram_from_columns(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(13);
  std::vector<std::vector<double>> cols(4, std::vector<double>(d));
  for (auto& c : cols)
    for (double& v : c) v = rng.normal();
  for (auto _ : state)
    benchmark::DoNotOptimize(GramMatrix::from_columns(cols, GramSource::updates));
}
BENCHMARK(BM_gram_from_columns)->Arg(1 << 10)->Arg(1 << 14)->Arg(1 << 17);

void BM_auc(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  Rng rng(17);
  std::vector<double> scores(k), labels(k);
  for (int i = 0; i < k; ++i) {
    scores[i] = std::floor(rng.uniform01() * 1024) / 1024.0;
    labels[i] = rng.bernoulli(0.3) ? 1.0 : 0.0;
  }
  labels[0] = 1.0;
  labels[1] = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(auc(scores, labels));
  state.SetItemsProcessed(state.iterations() * k);
}
BENCHMARK(BM_auc)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);

void BM_pcgrad(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(19);
  std::vector<std::vector<double>> grads(3, std::vector<double>(d));
  for (auto& g : grads)
    for (double& v : g) v = rng.normal();
  for (auto _ : state) {
    Rng step_rng(23);
    benchmark::DoNotOptimize(pcgrad(grads, step_rng));
  }
}
BENCHMARK(BM_pcgrad)->Arg(1 << 10)->Arg(1 << 14);

}  // namespace

BENCHMARK_MAIN();
