#include <benchmark/benchmark.h>

#include "coforge/predictor.hpp"
#include "coforge/system_profile.hpp"

using namespace coforge;

namespace {

struct Fixture {
  SystemConfig sys = default_pack("tx2-gpu");
  PerfLUT lut = build_lut({sys.device, sys.edge}, LutGrid{});
  std::vector<TrainExample> examples;
  PredictorModel model = PredictorModel::init(kFeatureWidth, 32, 99);

  Fixture() {
    SpaceConfig space;
    const Dataset ds = generate_dataset(space, sys, 64, 7);
    examples = prepare_examples(ds.train, "latency", FeatureKind::Enhanced, lut, sys);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_PredictorForward(benchmark::State& state) {
  Fixture& f = fixture();
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(f.model, f.examples[i].sample));
    i = (i + 1) % f.examples.size();
  }
}
BENCHMARK(BM_PredictorForward);

void BM_PrepareExamples(benchmark::State& state) {
  Fixture& f = fixture();
  SpaceConfig space;
  const Dataset ds = generate_dataset(space, f.sys, 32, 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        prepare_examples(ds.train, "latency", FeatureKind::Enhanced, f.lut, f.sys));
  }
}
BENCHMARK(BM_PrepareExamples);

void BM_TrainEpoch(benchmark::State& state) {
  Fixture& f = fixture();
  Hyperparams hp;
  hp.epochs = 1;
  hp.hidden = 32;
  hp.batch_size = 32;
  hp.seed = 5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train(f.examples, f.examples, hp, "latency"));
  }
}
BENCHMARK(BM_TrainEpoch);

}  // namespace
