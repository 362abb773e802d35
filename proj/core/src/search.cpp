#include "coforge/search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "coforge/util.hpp"

namespace coforge {

double SyntheticOracle::accuracy(const Architecture& arch) const {
  int motifs = 0;
  bool have_sample = false;
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const OpKind op = arch.layers[i].op;
    if (op == OpKind::Sample) have_sample = true;
    if (op == OpKind::Aggregate && have_sample) {
      for (size_t j = i + 1; j < arch.layers.size(); ++j)
        if (arch.layers[j].op == OpKind::Combine) {
          ++motifs;
          break;
        }
    }
  }
  double width_sum = 0;
  for (const auto& layer : arch.layers)
    if (layer.op == OpKind::Combine) width_sum += layer.fn.out_dim;
  const double acc = 0.35 + 0.5 * (1.0 - std::exp(-0.8 * motifs)) +
                     0.15 * (1.0 - std::exp(-width_sum / 512.0));
  return std::clamp(acc, 0.0, 1.0);
}

TableOracle TableOracle::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open oracle table: " + path);
  nlohmann::json j;
  in >> j;
  std::map<uint64_t, double> table;
  for (const auto& [key, value] : j.items())
    table[std::stoull(key)] = value.get<double>();
  return TableOracle(std::move(table));
}

double TableOracle::accuracy(const Architecture& arch) const {
  auto it = table_.find(arch.hash());
  if (it == table_.end())
    throw PreconditionError("architecture not in accuracy table: " +
                            std::to_string(arch.hash()));
  return it->second;
}

Evaluation SimulatorEvaluator::evaluate(const Architecture& arch) {
  const PerfEstimate est = simulate(arch, sys_);
  return {est.latency_s, est.device_energy_j};
}

PredictorEvaluator::PredictorEvaluator(PredictorModel latency_model,
                                       PredictorModel energy_model,
                                       std::shared_ptr<const PerfLUT> lut,
                                       const SystemConfig& sys)
    : latency_model_(std::move(latency_model)),
      energy_model_(std::move(energy_model)),
      lut_(std::move(lut)),
      sys_(sys) {
  if (latency_model_.metric != "latency" || energy_model_.metric != "energy")
    throw ConfigError("predictor evaluator needs one latency and one energy model");
}

Evaluation PredictorEvaluator::evaluate(const Architecture& arch) {
  Evaluation eval;
  eval.latency_s = predict_corrected(latency_model_, arch, sys_, *lut_);
  eval.energy_j = predict_corrected(energy_model_, arch, sys_, *lut_);
  return eval;
}

double score_candidate(double accuracy, const Evaluation& eval,
                       const SystemConfig& sys) {
  const double psys = sys.w_l * eval.latency_s / sys.constraints.c_lat_s +
                      sys.w_e * eval.energy_j / sys.constraints.c_e_j;
  return accuracy - sys.lambda * psys;
}

namespace {

bool meets_constraints(const Evaluation& eval, const SystemConfig& sys) {
  return eval.latency_s < sys.constraints.c_lat_s &&
         eval.energy_j < sys.constraints.c_e_j;
}

template <typename Cmp>
void insert_sorted(std::vector<ZooEntry>& list, const ZooEntry& entry,
                   int capacity, Cmp cmp) {
  const uint64_t h = entry.arch.hash();
  for (const auto& e : list)
    if (e.arch.hash() == h) return;
  list.push_back(entry);
  std::sort(list.begin(), list.end(), cmp);
  if (static_cast<int>(list.size()) > capacity) list.resize(capacity);
}

}  // namespace

void ArchitectureZoo::admit(uint64_t fingerprint, const ZooEntry& entry) {
  Shelf& shelf = shelves[fingerprint];
  auto hash_of = [](const ZooEntry& e) { return e.arch.hash(); };
  insert_sorted(shelf.by_score, entry, capacity, [&](const auto& a, const auto& b) {
    return a.score != b.score ? a.score > b.score : hash_of(a) < hash_of(b);
  });
  insert_sorted(shelf.by_latency, entry, capacity, [&](const auto& a, const auto& b) {
    return a.latency_s != b.latency_s ? a.latency_s < b.latency_s
                                      : hash_of(a) < hash_of(b);
  });
  insert_sorted(shelf.by_energy, entry, capacity, [&](const auto& a, const auto& b) {
    return a.energy_j != b.energy_j ? a.energy_j < b.energy_j
                                    : hash_of(a) < hash_of(b);
  });
}

bool ArchitectureZoo::empty() const {
  for (const auto& [fp, shelf] : shelves)
    if (!shelf.by_score.empty()) return false;
  return true;
}

namespace {

nlohmann::json entry_json(const ZooEntry& e) {
  return {{"arch", e.arch.to_json()},
          {"accuracy", e.accuracy},
          {"latency_s", e.latency_s},
          {"energy_j", e.energy_j},
          {"score", e.score}};
}

ZooEntry entry_from_json(const nlohmann::json& j) {
  ZooEntry e;
  e.arch = Architecture::from_json(j.at("arch"));
  e.accuracy = j.at("accuracy").get<double>();
  e.latency_s = j.at("latency_s").get<double>();
  e.energy_j = j.at("energy_j").get<double>();
  e.score = j.at("score").get<double>();
  return e;
}

nlohmann::json list_json(const std::vector<ZooEntry>& list) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& e : list) a.push_back(entry_json(e));
  return a;
}

std::vector<ZooEntry> list_from_json(const nlohmann::json& j) {
  std::vector<ZooEntry> out;
  for (const auto& e : j) out.push_back(entry_from_json(e));
  return out;
}

}  // namespace

nlohmann::json ArchitectureZoo::to_json() const {
  nlohmann::json j;
  j["capacity"] = capacity;
  nlohmann::json shelves_j;
  for (const auto& [fp, shelf] : shelves) {
    nlohmann::json s;
    s["by_score"] = list_json(shelf.by_score);
    s["by_latency"] = list_json(shelf.by_latency);
    s["by_energy"] = list_json(shelf.by_energy);
    shelves_j[std::to_string(fp)] = std::move(s);
  }
  j["shelves"] = std::move(shelves_j);
  return j;
}

ArchitectureZoo ArchitectureZoo::from_json(const nlohmann::json& j) {
  ArchitectureZoo zoo;
  zoo.capacity = j.at("capacity").get<int>();
  for (const auto& [key, s] : j.at("shelves").items()) {
    Shelf shelf;
    shelf.by_score = list_from_json(s.at("by_score"));
    shelf.by_latency = list_from_json(s.at("by_latency"));
    shelf.by_energy = list_from_json(s.at("by_energy"));
    zoo.shelves[std::stoull(key)] = std::move(shelf);
  }
  return zoo;
}

void ArchitectureZoo::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open zoo file for writing: " + path);
  out << to_json().dump(2);
}

ArchitectureZoo ArchitectureZoo::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open zoo file: " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

SearchResult stage1_operation_search(const SpaceConfig& space,
                                     const SystemConfig& sys,
                                     const SearchConfig& cfg,
                                     Evaluator& evaluator,
                                     const AccuracyOracle& oracle) {
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  SearchResult result;
  result.zoo.capacity = cfg.zoo_capacity;
  const uint64_t fp = sys.fingerprint();
  const bool ground_truth = dynamic_cast<SimulatorEvaluator*>(&evaluator) != nullptr;
  std::mt19937_64 rng(sub_seed(cfg.seed, "stage1"));
  double best = -1;
  for (int t = 0; t < cfg.trials; ++t) {
    const Architecture arch = sample_valid_architecture(rng, space);
    const Evaluation eval = evaluator.evaluate(arch);
    const double acc = oracle.accuracy(arch);
    TracePoint point;
    point.iteration = t;
    point.latency_s = eval.latency_s;
    point.energy_j = eval.energy_j;
    point.accuracy = acc;
    if (meets_constraints(eval, sys)) {
      point.score = score_candidate(acc, eval, sys);
      // With a predictor in the loop, re-simulate before zoo admission so
      // predictor error cannot leak constraint violations into the zoo.
      Evaluation truth = eval;
      if (!ground_truth) {
        const PerfEstimate est = simulate(arch, sys);
        truth = {est.latency_s, est.device_energy_j};
      }
      if (meets_constraints(truth, sys)) {
        ZooEntry entry;
        entry.arch = arch;
        entry.accuracy = acc;
        entry.latency_s = truth.latency_s;
        entry.energy_j = truth.energy_j;
        entry.score = score_candidate(acc, truth, sys);
        result.zoo.admit(fp, entry);
        result.feasible = true;
      }
    }
    best = std::max(best, point.score);
    point.best_score = best;
    result.trace.push_back(point);
  }
  return result;
}

namespace {

// Scale-down mutation: halve one Combine width or step one Sample k down to
// the next smaller configured choice. Returns nullopt at the lower bounds.
std::optional<Architecture> scale_down(const Architecture& arch,
                                       const SpaceConfig& space,
                                       std::mt19937_64& rng) {
  std::vector<size_t> mutable_layers;
  const int min_dim =
      *std::min_element(space.out_dim_choices.begin(), space.out_dim_choices.end());
  const int min_k = *std::min_element(space.k_choices.begin(), space.k_choices.end());
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& layer = arch.layers[i];
    if (layer.op == OpKind::Combine && layer.fn.out_dim / 2 >= min_dim)
      mutable_layers.push_back(i);
    if (layer.op == OpKind::Sample && layer.fn.k > min_k)
      mutable_layers.push_back(i);
  }
  if (mutable_layers.empty()) return std::nullopt;
  std::uniform_int_distribution<size_t> dist(0, mutable_layers.size() - 1);
  const size_t i = mutable_layers[dist(rng)];
  Architecture mutant = arch;
  auto& layer = mutant.layers[i];
  if (layer.op == OpKind::Combine) {
    layer.fn.out_dim /= 2;
  } else {
    int next = min_k;
    for (int k : space.k_choices)
      if (k < layer.fn.k) next = std::max(next, k);
    layer.fn.k = next;
  }
  return mutant;
}

}  // namespace

ArchitectureZoo stage2_function_tuning(const ArchitectureZoo& zoo,
                                       const SpaceConfig& space,
                                       const SystemConfig& sys,
                                       const SearchConfig& cfg,
                                       const AccuracyOracle& oracle) {
  ArchitectureZoo tuned = zoo;
  if (cfg.tuning_trials < 1) return tuned;
  const uint64_t fp = sys.fingerprint();
  auto it = tuned.shelves.find(fp);
  if (it == tuned.shelves.end() || it->second.by_score.empty()) return tuned;
  std::mt19937_64 rng(sub_seed(cfg.seed, "stage2"));
  for (int t = 0; t < cfg.tuning_trials; ++t) {
    auto& shelf = tuned.shelves[fp];
    const size_t n = std::min<size_t>(shelf.by_score.size(), cfg.stage2_candidates);
    std::uniform_int_distribution<size_t> dist(0, n - 1);
    const ZooEntry original = shelf.by_score[dist(rng)];
    auto mutant = scale_down(original.arch, space, rng);
    if (!mutant || !executable(*mutant)) continue;
    // This stage evaluates accuracy only; system metrics are refreshed just
    // to keep the stored entry truthful.
    const double acc = oracle.accuracy(*mutant);
    if (original.accuracy - acc > cfg.tuning_accuracy_budget) continue;
    const PerfEstimate est = simulate(*mutant, sys);
    if (est.latency_s >= original.latency_s) continue;
    Evaluation eval{est.latency_s, est.device_energy_j};
    if (!meets_constraints(eval, sys)) continue;
    ZooEntry entry;
    entry.arch = *mutant;
    entry.accuracy = acc;
    entry.latency_s = est.latency_s;
    entry.energy_j = est.device_energy_j;
    entry.score = score_candidate(acc, eval, sys);
    const uint64_t old_hash = original.arch.hash();
    auto drop = [&](std::vector<ZooEntry>& list) {
      std::erase_if(list, [&](const ZooEntry& e) { return e.arch.hash() == old_hash; });
    };
    drop(shelf.by_score);
    drop(shelf.by_latency);
    drop(shelf.by_energy);
    tuned.admit(fp, entry);
  }
  return tuned;
}

EvoResult evolutionary_baseline(const SpaceConfig& space, const SystemConfig& sys,
                                const SearchConfig& cfg, const EvoConfig& evo,
                                const AccuracyOracle& oracle) {
  EvoResult result;
  result.zoo.capacity = cfg.zoo_capacity;
  const uint64_t fp = sys.fingerprint();
  std::mt19937_64 rng(sub_seed(cfg.seed, "evolution"));
  SimulatorEvaluator evaluator(sys);

  struct Individual {
    Architecture arch;
    double score = -1;
  };
  std::vector<Individual> population;
  double best = -1;
  int trials = 0;
  int invalid_offspring = 0;
  int offspring_total = 0;

  auto record = [&](const Architecture& arch, bool valid) {
    TracePoint point;
    point.iteration = trials;
    point.valid = valid;
    double score = -1;
    if (valid) {
      const Evaluation eval = evaluator.evaluate(arch);
      const double acc = oracle.accuracy(arch);
      point.latency_s = eval.latency_s;
      point.energy_j = eval.energy_j;
      point.accuracy = acc;
      if (meets_constraints(eval, sys)) {
        score = score_candidate(acc, eval, sys);
        ZooEntry entry{arch, acc, eval.latency_s, eval.energy_j, score};
        result.zoo.admit(fp, entry);
      }
    }
    point.score = score;
    best = std::max(best, score);
    point.best_score = best;
    result.trace.push_back(point);
    ++trials;
    return score;
  };

  // The baseline has no validity-aware sampler: the initial population is
  // drawn uniformly from the vocabulary and invalid individuals simply score
  // -1, so part of the budget goes into rediscovering validity by mutation.
  const int init = std::min(evo.population, cfg.trials);
  for (int i = 0; i < init; ++i) {
    Individual ind;
    ind.arch = sample_architecture(rng, space);
    ind.score = record(ind.arch, executable(ind.arch));
    population.push_back(std::move(ind));
  }

  while (trials < cfg.trials) {
    // Tournament parent selection.
    std::uniform_int_distribution<size_t> pick(0, population.size() - 1);
    size_t parent = pick(rng);
    for (int t = 1; t < evo.tournament; ++t) {
      const size_t rival = pick(rng);
      if (population[rival].score > population[parent].score) parent = rival;
    }
    Architecture child = population[parent].arch;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (auto& layer : child.layers) {
      if (coin(rng) >= evo.mutation_rate) continue;
      Layer fresh;
      std::uniform_int_distribution<size_t> vocab(0, space.vocabulary.size() - 1);
      fresh.op = space.vocabulary[vocab(rng)];
      auto choose = [&rng](const auto& choices) {
        std::uniform_int_distribution<size_t> d(0, choices.size() - 1);
        return choices[d(rng)];
      };
      switch (fresh.op) {
        case OpKind::Sample: fresh.fn.k = choose(space.k_choices); break;
        case OpKind::Aggregate: fresh.fn.aggr = choose(space.aggr_choices); break;
        case OpKind::Combine: fresh.fn.out_dim = choose(space.out_dim_choices); break;
        default: break;
      }
      layer = fresh;
    }
    ++offspring_total;
    const bool valid = executable(child);
    if (!valid) ++invalid_offspring;
    Individual ind;
    ind.arch = child;
    ind.score = record(child, valid);
    population.push_back(std::move(ind));
    auto worst = std::min_element(
        population.begin(), population.end(),
        [](const auto& a, const auto& b) { return a.score < b.score; });
    population.erase(worst);
  }
  result.offspring_invalid_rate =
      offspring_total ? static_cast<double>(invalid_offspring) / offspring_total : 0;
  return result;
}

Architecture dispatch(const ArchitectureZoo& zoo, const SystemConfig& current_sys) {
  if (zoo.empty()) throw PreconditionError("dispatch on an empty zoo");
  std::vector<const ZooEntry*> candidates;
  const auto it = zoo.shelves.find(current_sys.fingerprint());
  if (it != zoo.shelves.end()) {
    for (const auto& e : it->second.by_score) candidates.push_back(&e);
  } else {
    for (const auto& [fp, shelf] : zoo.shelves)
      for (const auto& e : shelf.by_score) candidates.push_back(&e);
  }

  const Architecture* best = nullptr;
  double best_score = -std::numeric_limits<double>::infinity();
  uint64_t best_hash = 0;
  const Architecture* fastest = nullptr;
  double fastest_lat = std::numeric_limits<double>::infinity();
  for (const ZooEntry* e : candidates) {
    const PerfEstimate est = simulate(e->arch, current_sys);
    const Evaluation eval{est.latency_s, est.device_energy_j};
    const uint64_t h = e->arch.hash();
    if (est.latency_s < fastest_lat ||
        (est.latency_s == fastest_lat && h < best_hash)) {
      fastest_lat = est.latency_s;
      fastest = &e->arch;
    }
    if (!meets_constraints(eval, current_sys)) continue;
    const double score = score_candidate(e->accuracy, eval, current_sys);
    if (score > best_score || (score == best_score && h < best_hash)) {
      best_score = score;
      best = &e->arch;
      best_hash = h;
    }
  }
  if (best) return *best;
  return *fastest;
}

void write_trace(const std::vector<TracePoint>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open trace file for writing: " + path);
  for (const auto& p : trace) {
    nlohmann::json j;
    j["iteration"] = p.iteration;
    j["valid"] = p.valid;
    j["latency_s"] = p.latency_s;
    j["energy_j"] = p.energy_j;
    j["accuracy"] = p.accuracy;
    j["score"] = p.score;
    j["best_score"] = p.best_score;
    out << j.dump() << "\n";
  }
}

}  // namespace coforge
