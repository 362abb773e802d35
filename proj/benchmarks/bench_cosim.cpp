#include <benchmark/benchmark.h>

#include <random>

#include "coforge/cosim.hpp"
#include "coforge/system_profile.hpp"

using namespace coforge;

namespace {

Architecture sampled_arch(uint64_t seed) {
  SpaceConfig space;  // default 12-layer space
  return sample_valid_architecture(seed, space);
}

void BM_Simulate(benchmark::State& state) {
  const SystemConfig sys = default_pack("tx2-gpu");
  const Architecture arch = sampled_arch(11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate(arch, sys));
  }
}
BENCHMARK(BM_Simulate);

void BM_SimulatePipeline(benchmark::State& state) {
  const SystemConfig sys = default_pack("tx2-gpu");
  const Architecture arch = sampled_arch(12);
  const int batches = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_pipeline(arch, sys, batches));
  }
}
BENCHMARK(BM_SimulatePipeline)->Arg(4)->Arg(16)->Arg(64);

void BM_LutEstimate(benchmark::State& state) {
  const SystemConfig sys = default_pack("tx2-gpu");
  const PerfLUT lut = build_lut({sys.device, sys.edge}, LutGrid{});
  const Architecture arch = sampled_arch(13);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lut_estimate(arch, sys, lut));
  }
}
BENCHMARK(BM_LutEstimate);

}  // namespace
