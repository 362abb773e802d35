#include <benchmark/benchmark.h>

#include <random>

#include "coforge/runtime/kernels.hpp"

using namespace coforge;
using namespace coforge::runtime;

namespace {

Eigen::MatrixXf random_points(int n, int f, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> dist(0.f, 1.f);
  Eigen::MatrixXf x(n, f);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < f; ++j) x(i, j) = dist(rng);
  return x;
}

Layer layer_of(OpKind op, int a = 0) {
  Layer l;
  l.op = op;
  switch (op) {
    case OpKind::Sample: l.fn.k = a; break;
    case OpKind::Aggregate: l.fn.aggr = AggrKind::Max; break;
    case OpKind::Combine: l.fn.out_dim = a; break;
    default: break;
  }
  return l;
}

void BM_Knn(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXf x = random_points(n, 3, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(knn(x, 20));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_Knn)->Arg(128)->Arg(512)->Arg(1024)->Complexity();

void BM_AggregateMax(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  ExecState base;
  base.x = random_points(n, 64, 2);
  base.neighbors = knn(random_points(n, 3, 3), 20);
  base.has_graph = true;
  const Layer layer = layer_of(OpKind::Aggregate);
  for (auto _ : state) {
    ExecState s = base;
    run_layer(s, layer, 0, {});
    benchmark::DoNotOptimize(s.x);
  }
}
BENCHMARK(BM_AggregateMax)->Arg(128)->Arg(1024);

void BM_Combine(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  ExecState base;
  base.x = random_points(n, 64, 4);
  const Layer layer = layer_of(OpKind::Combine, 128);
  for (auto _ : state) {
    ExecState s = base;
    run_layer(s, layer, 0, {});
    benchmark::DoNotOptimize(s.x);
  }
}
BENCHMARK(BM_Combine)->Arg(128)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
