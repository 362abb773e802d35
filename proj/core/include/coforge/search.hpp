#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coforge/cosim.hpp"
#include "coforge/predictor.hpp"

namespace coforge {

/// Validation-accuracy stand-in: either the built-in synthetic formula or a
/// table keyed by architecture hash.
class AccuracyOracle {
 public:
  virtual ~AccuracyOracle() = default;
  virtual double accuracy(const Architecture& arch) const = 0;
};

/// Deterministic saturating score over sample->aggregate->combine motifs and
/// total combine width. Monotone in both counts.
class SyntheticOracle : public AccuracyOracle {
 public:
  double accuracy(const Architecture& arch) const override;
};

class TableOracle : public AccuracyOracle {
 public:
  explicit TableOracle(std::map<uint64_t, double> table) : table_(std::move(table)) {}
  static TableOracle from_file(const std::string& path);
  double accuracy(const Architecture& arch) const override;

 private:
  std::map<uint64_t, double> table_;
};

struct Evaluation {
  double latency_s = 0;
  double energy_j = 0;
};

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual Evaluation evaluate(const Architecture& arch) = 0;
};

class SimulatorEvaluator : public Evaluator {
 public:
  explicit SimulatorEvaluator(const SystemConfig& sys) : sys_(sys) {}
  Evaluation evaluate(const Architecture& arch) override;

 private:
  SystemConfig sys_;
};

/// Predictor-in-the-loop: latency via predict_corrected, energy via the
/// energy model forward pass.
class PredictorEvaluator : public Evaluator {
 public:
  PredictorEvaluator(PredictorModel latency_model, PredictorModel energy_model,
                     std::shared_ptr<const PerfLUT> lut, const SystemConfig& sys);
  Evaluation evaluate(const Architecture& arch) override;

 private:
  PredictorModel latency_model_;
  PredictorModel energy_model_;
  std::shared_ptr<const PerfLUT> lut_;
  SystemConfig sys_;
};

struct SearchConfig {
  int trials = 1000;          // T
  int tuning_trials = 0;      // T_f, 0 skips stage 2
  int zoo_capacity = 10;
  uint64_t seed = 0;
  double tuning_accuracy_budget = 0.005;
  int stage2_candidates = 10;
};

struct ZooEntry {
  Architecture arch;
  double accuracy = 0;
  double latency_s = 0;
  double energy_j = 0;
  double score = -1;
};

/// Per-system-fingerprint top-k shelves for three objective profiles.
struct ArchitectureZoo {
  struct Shelf {
    std::vector<ZooEntry> by_score;    // descending score
    std::vector<ZooEntry> by_latency;  // ascending latency
    std::vector<ZooEntry> by_energy;   // ascending energy
  };
  std::map<uint64_t, Shelf> shelves;
  int capacity = 10;

  void admit(uint64_t fingerprint, const ZooEntry& entry);
  bool empty() const;

  nlohmann::json to_json() const;
  static ArchitectureZoo from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static ArchitectureZoo load(const std::string& path);
};

struct TracePoint {
  int iteration = 0;
  bool valid = true;
  double latency_s = 0;
  double energy_j = 0;
  double accuracy = 0;
  double score = -1;
  double best_score = -1;
};

double score_candidate(double accuracy, const Evaluation& eval,
                       const SystemConfig& sys);

struct SearchResult {
  ArchitectureZoo zoo;
  std::vector<TracePoint> trace;
  bool feasible = false;  // at least one constraint-satisfying candidate
};

/// Stage 1 constraint-based random operation search. With a non-simulator
/// evaluator, candidates are re-scored with the simulator before zoo
/// admission.
SearchResult stage1_operation_search(const SpaceConfig& space,
                                     const SystemConfig& sys,
                                     const SearchConfig& cfg,
                                     Evaluator& evaluator,
                                     const AccuracyOracle& oracle);

/// Stage 2 function scale-down tuning: accuracy-only acceptance of cheaper
/// function settings within the configured accuracy budget.
ArchitectureZoo stage2_function_tuning(const ArchitectureZoo& zoo,
                                       const SpaceConfig& space,
                                       const SystemConfig& sys,
                                       const SearchConfig& cfg,
                                       const AccuracyOracle& oracle);

struct EvoConfig {
  int population = 32;
  double mutation_rate = 0.15;
  int tournament = 4;
};

struct EvoResult {
  ArchitectureZoo zoo;
  std::vector<TracePoint> trace;
  double offspring_invalid_rate = 0;
};

/// (mu+1) evolutionary baseline with per-layer mutation; invalid offspring
/// are scored -1 and count against the trial budget.
EvoResult evolutionary_baseline(const SpaceConfig& space, const SystemConfig& sys,
                                const SearchConfig& cfg, const EvoConfig& evo,
                                const AccuracyOracle& oracle);

/// Best constraint-satisfying zoo entry under the current system, re-checked
/// with the simulator; falls back to the min-latency entry. Ties break by
/// architecture hash.
Architecture dispatch(const ArchitectureZoo& zoo, const SystemConfig& current_sys);

void write_trace(const std::vector<TracePoint>& trace, const std::string& path);

}  // namespace coforge
