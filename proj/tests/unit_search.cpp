#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "coforge/search.hpp"

using namespace coforge;

namespace {

Layer mk(OpKind op, int a = 0) {
  Layer l;
  l.op = op;
  switch (op) {
    case OpKind::Sample: l.fn.k = a ? a : 20; break;
    case OpKind::Aggregate: l.fn.aggr = AggrKind::Max; break;
    case OpKind::Combine: l.fn.out_dim = a ? a : 64; break;
    default: break;
  }
  return l;
}

Architecture make_arch(std::initializer_list<Layer> layers, int n = 128) {
  Architecture arch;
  arch.layers = layers;
  arch.input_nodes = n;
  arch.input_dim = 3;
  return arch;
}

SpaceConfig search_space() {
  SpaceConfig cfg;
  cfg.min_layers = 4;
  cfg.max_layers = 8;
  cfg.input_nodes = 128;
  cfg.k_choices = {5, 10, 20};
  cfg.out_dim_choices = {16, 32, 64};
  return cfg;
}

ZooEntry entry_with(double score, double latency, double energy, uint64_t seed) {
  ZooEntry e;
  e.arch = sample_valid_architecture(seed, search_space());
  e.score = score;
  e.latency_s = latency;
  e.energy_j = energy;
  e.accuracy = 0.8;
  return e;
}

}  // namespace

TEST_CASE("synthetic accuracy rewards sample-aggregate-combine motifs") {
  const SyntheticOracle oracle;
  const auto plain = make_arch({mk(OpKind::Combine, 32), mk(OpKind::Combine, 32)});
  const auto one_motif = make_arch({mk(OpKind::Sample, 10), mk(OpKind::Aggregate),
                                    mk(OpKind::Combine, 32)});
  const auto two_motifs = make_arch({mk(OpKind::Sample, 10), mk(OpKind::Aggregate),
                                     mk(OpKind::Combine, 32), mk(OpKind::Sample, 10),
                                     mk(OpKind::Aggregate), mk(OpKind::Combine, 32)});
  const double a0 = oracle.accuracy(plain);
  const double a1 = oracle.accuracy(one_motif);
  const double a2 = oracle.accuracy(two_motifs);
  CHECK(a0 < a1);
  CHECK(a1 < a2);
  for (double a : {a0, a1, a2}) {
    CHECK(a >= 0.0);
    CHECK(a < 1.0);
  }
  // Deterministic: same architecture, same accuracy.
  CHECK(oracle.accuracy(one_motif) == a1);
}

TEST_CASE("score combines accuracy with normalized latency and energy") {
  SystemConfig sys = default_pack("tx2-gpu");
  sys.lambda = 0.5;
  sys.w_l = 1.0;
  sys.w_e = 2.0;
  sys.constraints = {0.1, 0.5};
  Evaluation eval;
  eval.latency_s = 0.05;
  eval.energy_j = 0.25;
  const double expect = 0.9 - 0.5 * (1.0 * 0.05 / 0.1 + 2.0 * 0.25 / 0.5);
  CHECK(score_candidate(0.9, eval, sys) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("zoo admission keeps shelves sorted, deduplicated, and capped") {
  ArchitectureZoo zoo;
  zoo.capacity = 3;
  const uint64_t fp = 42;
  for (int i = 0; i < 6; ++i)
    zoo.admit(fp, entry_with(0.1 * i, 0.01 * (6 - i), 0.02 * (i + 1), 1000 + i));
  const auto& shelf = zoo.shelves.at(fp);
  REQUIRE(shelf.by_score.size() == 3);
  REQUIRE(shelf.by_latency.size() == 3);
  REQUIRE(shelf.by_energy.size() == 3);
  for (size_t i = 1; i < 3; ++i) {
    CHECK(shelf.by_score[i - 1].score >= shelf.by_score[i].score);
    CHECK(shelf.by_latency[i - 1].latency_s <= shelf.by_latency[i].latency_s);
    CHECK(shelf.by_energy[i - 1].energy_j <= shelf.by_energy[i].energy_j);
  }
  CHECK(shelf.by_score.front().score == doctest::Approx(0.5));
  CHECK(shelf.by_latency.front().latency_s == doctest::Approx(0.01));

  // Re-admitting the same architecture must not duplicate it.
  ArchitectureZoo dedup;
  dedup.capacity = 4;
  const ZooEntry e = entry_with(0.4, 0.02, 0.05, 7);
  dedup.admit(fp, e);
  dedup.admit(fp, e);
  CHECK(dedup.shelves.at(fp).by_score.size() == 1);
  CHECK_FALSE(dedup.empty());
  CHECK(ArchitectureZoo{}.empty());
}

TEST_CASE("zoo JSON and file round-trip") {
  ArchitectureZoo zoo;
  zoo.capacity = 5;
  zoo.admit(1, entry_with(0.3, 0.01, 0.04, 11));
  zoo.admit(2, entry_with(0.6, 0.02, 0.08, 12));
  const ArchitectureZoo back = ArchitectureZoo::from_json(zoo.to_json());
  CHECK(back.capacity == 5);
  CHECK(back.shelves.size() == 2);
  CHECK(back.shelves.at(1).by_score[0].arch == zoo.shelves.at(1).by_score[0].arch);
  CHECK(back.shelves.at(2).by_score[0].score ==
        zoo.shelves.at(2).by_score[0].score);

  const auto path =
      (std::filesystem::temp_directory_path() / "coforge_zoo_test.json").string();
  zoo.save(path);
  const ArchitectureZoo loaded = ArchitectureZoo::load(path);
  CHECK(loaded.shelves.size() == 2);
  std::remove(path.c_str());
}

TEST_CASE("stage 1 search emits only constraint-satisfying architectures") {
  SystemConfig sys = default_pack("tx2-gpu");
  SearchConfig cfg;
  cfg.trials = 400;
  cfg.zoo_capacity = 8;
  cfg.seed = 17;
  SimulatorEvaluator evaluator(sys);
  const SyntheticOracle oracle;
  const SearchResult result =
      stage1_operation_search(search_space(), sys, cfg, evaluator, oracle);
  CHECK(result.feasible);
  CHECK(result.trace.size() == 400);
  const auto& shelf = result.zoo.shelves.at(sys.fingerprint());
  CHECK_FALSE(shelf.by_score.empty());
  for (const auto& e : shelf.by_score) {
    const PerfEstimate est = simulate(e.arch, sys);
    CHECK(est.latency_s <= sys.constraints.c_lat_s);
    CHECK(est.device_energy_j <= sys.constraints.c_e_j);
    CHECK(e.latency_s == doctest::Approx(est.latency_s));
  }
  // best_score in the trace is monotone non-decreasing.
  double best = -1;
  for (const auto& p : result.trace) {
    CHECK(p.best_score >= best);
    best = p.best_score;
  }
}

TEST_CASE("stage 1 search is deterministic under the seed") {
  SystemConfig sys = default_pack("pi-cpu");
  SearchConfig cfg;
  cfg.trials = 150;
  cfg.zoo_capacity = 5;
  cfg.seed = 23;
  const SyntheticOracle oracle;
  SimulatorEvaluator e1(sys), e2(sys);
  const auto r1 = stage1_operation_search(search_space(), sys, cfg, e1, oracle);
  const auto r2 = stage1_operation_search(search_space(), sys, cfg, e2, oracle);
  CHECK(r1.zoo.to_json() == r2.zoo.to_json());
  REQUIRE(r1.trace.size() == r2.trace.size());
  for (size_t i = 0; i < r1.trace.size(); ++i)
    CHECK(r1.trace[i].score == r2.trace[i].score);
}

TEST_CASE("infeasible constraints surface as an infeasible result") {
  SystemConfig sys = default_pack("pi-cpu");
  sys.constraints.c_lat_s = 1e-9;
  sys.constraints.c_e_j = 1e-9;
  SearchConfig cfg;
  cfg.trials = 60;
  cfg.seed = 3;
  SimulatorEvaluator evaluator(sys);
  const SyntheticOracle oracle;
  const auto result =
      stage1_operation_search(search_space(), sys, cfg, evaluator, oracle);
  CHECK_FALSE(result.feasible);
}

TEST_CASE("stage 2 tuning never raises latency and honors the accuracy budget") {
  SystemConfig sys = default_pack("tx2-gpu");
  SearchConfig cfg;
  cfg.trials = 400;
  cfg.tuning_trials = 100;
  cfg.zoo_capacity = 6;
  cfg.seed = 29;
  cfg.tuning_accuracy_budget = 0.01;
  SimulatorEvaluator evaluator(sys);
  const SyntheticOracle oracle;
  const auto stage1 =
      stage1_operation_search(search_space(), sys, cfg, evaluator, oracle);
  REQUIRE(stage1.feasible);
  const auto tuned = stage2_function_tuning(stage1.zoo, search_space(), sys, cfg, oracle);

  const auto& before = stage1.zoo.shelves.at(sys.fingerprint()).by_latency;
  const auto& after = tuned.shelves.at(sys.fingerprint()).by_latency;
  REQUIRE_FALSE(after.empty());
  CHECK(after.front().latency_s <= before.front().latency_s);
  for (const auto& e : after) {
    const PerfEstimate est = simulate(e.arch, sys);
    CHECK(est.latency_s <= sys.constraints.c_lat_s);
    CHECK(est.device_energy_j <= sys.constraints.c_e_j);
    CHECK(e.accuracy == doctest::Approx(oracle.accuracy(e.arch)));
  }
}

TEST_CASE("evolutionary baseline runs within budget and reports invalidity") {
  SystemConfig sys = default_pack("tx2-gpu");
  SearchConfig cfg;
  cfg.trials = 200;
  cfg.zoo_capacity = 5;
  cfg.seed = 31;
  EvoConfig evo;
  evo.population = 16;
  const SyntheticOracle oracle;
  const EvoResult result =
      evolutionary_baseline(search_space(), sys, cfg, evo, oracle);
  CHECK(result.trace.size() == 200);
  CHECK(result.offspring_invalid_rate >= 0.0);
  CHECK(result.offspring_invalid_rate <= 1.0);
  CHECK_FALSE(result.zoo.empty());
}

TEST_CASE("dispatch returns a constraint-satisfying architecture") {
  SystemConfig sys = default_pack("tx2-gpu");
  SearchConfig cfg;
  cfg.trials = 300;
  cfg.zoo_capacity = 6;
  cfg.seed = 37;
  SimulatorEvaluator evaluator(sys);
  const SyntheticOracle oracle;
  const auto result =
      stage1_operation_search(search_space(), sys, cfg, evaluator, oracle);
  REQUIRE(result.feasible);

  const Architecture chosen = dispatch(result.zoo, sys);
  const PerfEstimate est = simulate(chosen, sys);
  CHECK(est.latency_s <= sys.constraints.c_lat_s);
  CHECK(est.device_energy_j <= sys.constraints.c_e_j);

  // A different system fingerprint falls back to searching all shelves.
  SystemConfig other = sys;
  other.net.bandwidth_bps = 10e6;
  const Architecture fallback = dispatch(result.zoo, other);
  CHECK(executable(fallback));
}

TEST_CASE("predictor evaluator admissions are re-checked with the simulator") {
  SystemConfig sys = default_pack("tx2-gpu");
  auto lut = std::make_shared<PerfLUT>(build_lut({sys.device, sys.edge}, LutGrid{}));
  PredictorModel lat = PredictorModel::init(kFeatureWidth, 12, 1);
  PredictorModel en = PredictorModel::init(kFeatureWidth, 12, 2);
  en.metric = "energy";
  PredictorEvaluator evaluator(lat, en, lut, sys);

  SearchConfig cfg;
  cfg.trials = 150;
  cfg.zoo_capacity = 5;
  cfg.seed = 41;
  const SyntheticOracle oracle;
  const auto result =
      stage1_operation_search(search_space(), sys, cfg, evaluator, oracle);
  if (result.feasible) {
    for (const auto& e : result.zoo.shelves.at(sys.fingerprint()).by_score) {
      // Zoo entries store simulator-verified numbers even when an untrained
      // predictor drove the search.
      const PerfEstimate est = simulate(e.arch, sys);
      CHECK(e.latency_s == doctest::Approx(est.latency_s));
      CHECK(e.energy_j == doctest::Approx(est.device_energy_j));
      CHECK(est.latency_s <= sys.constraints.c_lat_s);
      CHECK(est.device_energy_j <= sys.constraints.c_e_j);
    }
  }
}

TEST_CASE("trace files are NDJSON with one record per trial") {
  std::vector<TracePoint> trace(5);
  for (int i = 0; i < 5; ++i) {
    trace[i].iteration = i;
    trace[i].score = 0.1 * i;
    trace[i].best_score = 0.1 * i;
  }
  const auto path =
      (std::filesystem::temp_directory_path() / "coforge_trace_test.ndjson").string();
  write_trace(trace, path);
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("iteration").get<int>() == lines);
    ++lines;
  }
  CHECK(lines == 5);
  std::remove(path.c_str());
}
