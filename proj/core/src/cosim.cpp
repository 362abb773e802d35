#include "coforge/cosim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "coforge/util.hpp"

namespace coforge {

namespace {

PerfLUT::Value op_cost(const SystemConfig& sys, Side side, OpKind op,
                       const OpShape& shape) {
  const EndpointProfile& ep = sys.endpoint(side);
  if (sys.measured_lut && sys.measured_lut->has_endpoint(ep.name))
    return sys.measured_lut->lookup(ep.name, op, shape);
  return {ep.op_time(op, shape), ep.op_energy(op, shape)};
}

double comm_time(const SystemConfig& sys, uint64_t volume_bytes) {
  return static_cast<double>(volume_bytes) * 8.0 *
             sys.net.compression_ratio_estimate / sys.net.bandwidth_bps +
         sys.net.per_message_overhead_s;
}

}  // namespace

PerfEstimate simulate(const Architecture& arch, const SystemConfig& sys) {
  if (sys.net.bandwidth_bps <= 0) throw ConfigError("bandwidth must be > 0");
  const Mapping mapping = derive_mapping(arch);
  const TensorShapeTrace trace = trace_shapes(arch);

  PerfEstimate est;
  est.breakdown.reserve(arch.layers.size() + 1);
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& layer = arch.layers[i];
    LayerCost cost;
    cost.side = mapping.side_per_layer[i];
    if (layer.op == OpKind::Communicate) {
      cost.is_comm = true;
      cost.t = comm_time(sys, comm_volume(arch, trace, i));
      cost.e = sys.device.comm_power_w * cost.t;
      est.comm_total_s += cost.t;
      est.e_comm_j += cost.e;
    } else {
      const OpShape shape = op_shape_at(arch, trace, i);
      const auto v = op_cost(sys, cost.side, layer.op, shape);
      cost.t = v.latency_s;
      if (cost.side == Side::Device) {
        cost.e = v.energy_j;
        est.e_run_j += cost.e;
      } else {
        // Device idles while the edge computes.
        cost.e = sys.device.idle_power_w * cost.t;
        est.e_idle_j += cost.e;
      }
    }
    est.latency_s += cost.t;
    est.breakdown.push_back(cost);
  }
  if (mapping.implicit_return) {
    LayerCost cost;
    cost.side = Side::Device;
    cost.is_comm = true;
    cost.t = comm_time(sys, return_volume(arch, trace));
    cost.e = sys.device.comm_power_w * cost.t;
    est.comm_total_s += cost.t;
    est.e_comm_j += cost.e;
    est.latency_s += cost.t;
    est.breakdown.push_back(cost);
  }
  est.device_energy_j = est.e_run_j + est.e_idle_j + est.e_comm_j;

  constexpr int kThroughputProbeBatches = 16;
  est.pipelined_throughput_ips =
      simulate_pipeline(arch, sys, kThroughputProbeBatches).throughput_ips;
  return est;
}

double lut_estimate(const Architecture& arch, const SystemConfig& sys,
                    const PerfLUT& lut) {
  const Mapping mapping = derive_mapping(arch);
  const TensorShapeTrace trace = trace_shapes(arch);
  double op_sum = 0;
  double comm_sum = 0;
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& layer = arch.layers[i];
    if (layer.op == OpKind::Communicate) {
      comm_sum += static_cast<double>(comm_volume(arch, trace, i)) * 8.0 *
                  sys.net.compression_ratio_estimate / sys.net.bandwidth_bps;
    } else {
      const Side side = mapping.side_per_layer[i];
      const OpShape shape = op_shape_at(arch, trace, i);
      if (sys.measured_lut && sys.measured_lut->has_endpoint(sys.endpoint(side).name))
        op_sum += sys.measured_lut->lookup(sys.endpoint(side).name, layer.op, shape)
                      .latency_s;
      else
        op_sum += lut.lookup(sys.endpoint(side).name, layer.op, shape).latency_s;
    }
  }
  if (mapping.implicit_return)
    comm_sum += static_cast<double>(return_volume(arch, trace)) * 8.0 *
                sys.net.compression_ratio_estimate / sys.net.bandwidth_bps;
  // Tiny shave keeps the lower-bound guarantee immune to the last-ulp
  // difference between interpolated and directly evaluated op costs.
  return op_sum * (1.0 - 1e-9) + comm_sum;
}

double lut_energy_estimate(const Architecture& arch, const SystemConfig& sys,
                           const PerfLUT& /*lut*/) {
  const Mapping mapping = derive_mapping(arch);
  const TensorShapeTrace trace = trace_shapes(arch);
  double op_sum = 0;
  double comm_sum = 0;
  auto transfer_s = [&](uint64_t bytes) {
    return static_cast<double>(bytes) * 8.0 *
           sys.net.compression_ratio_estimate / sys.net.bandwidth_bps;
  };
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& layer = arch.layers[i];
    if (layer.op == OpKind::Communicate) {
      comm_sum += sys.device.comm_power_w * transfer_s(comm_volume(arch, trace, i));
      continue;
    }
    const Side side = mapping.side_per_layer[i];
    const OpShape shape = op_shape_at(arch, trace, i);
    // Energy is time x piecewise-linear power, so log-space interpolation is
    // not exact the way it is for the monomial latencies; evaluate the same
    // source the simulator uses to keep the bound tight.
    const auto v = op_cost(sys, side, layer.op, shape);
    op_sum += side == Side::Device ? v.energy_j
                                   : sys.device.idle_power_w * v.latency_s;
  }
  if (mapping.implicit_return)
    comm_sum += sys.device.comm_power_w * transfer_s(return_volume(arch, trace));
  return op_sum * (1.0 - 1e-9) + comm_sum;
}

std::vector<PipelineStage> pipeline_stages(const Architecture& arch,
                                           const SystemConfig& sys) {
  const Mapping mapping = derive_mapping(arch);
  const TensorShapeTrace trace = trace_shapes(arch);
  std::vector<PipelineStage> stages;
  auto resource_of = [](Side s) {
    return s == Side::Device ? PipelineStage::Resource::Device
                             : PipelineStage::Resource::Edge;
  };
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& layer = arch.layers[i];
    if (layer.op == OpKind::Communicate) {
      stages.push_back({PipelineStage::Resource::Link,
                        comm_time(sys, comm_volume(arch, trace, i))});
      continue;
    }
    const Side side = mapping.side_per_layer[i];
    const double t = op_cost(sys, side, layer.op, op_shape_at(arch, trace, i)).latency_s;
    if (!stages.empty() && stages.back().resource == resource_of(side))
      stages.back().duration_s += t;
    else
      stages.push_back({resource_of(side), t});
  }
  if (mapping.implicit_return)
    stages.push_back({PipelineStage::Resource::Link,
                      comm_time(sys, return_volume(arch, trace))});
  return stages;
}

PipelineResult simulate_pipeline(const Architecture& arch,
                                 const SystemConfig& sys, int num_batches) {
  if (num_batches < 1) throw PreconditionError("num_batches must be >= 1");
  const auto stages = pipeline_stages(arch, sys);
  const int num_stages = static_cast<int>(stages.size());

  // Earliest-start list scheduling. Each resource serves one job at a time;
  // among the frontier jobs (next pending stage of each batch) the resource
  // grant goes to the smallest (ready time, batch, stage).
  std::vector<double> resource_free(3, 0.0);
  std::vector<int> cursor(num_batches, 0);
  std::vector<double> batch_ready(num_batches, 0.0);
  double makespan = 0;
  int remaining = num_batches * num_stages;
  while (remaining > 0) {
    int best = -1;
    double best_ready = std::numeric_limits<double>::infinity();
    for (int b = 0; b < num_batches; ++b) {
      if (cursor[b] >= num_stages) continue;
      const auto res = static_cast<int>(stages[cursor[b]].resource);
      const double ready = std::max(batch_ready[b], resource_free[res]);
      if (ready < best_ready) {
        best_ready = ready;
        best = b;
      }
    }
    const int s = cursor[best];
    const auto res = static_cast<int>(stages[s].resource);
    const double finish = best_ready + stages[s].duration_s;
    resource_free[res] = finish;
    batch_ready[best] = finish;
    cursor[best] = s + 1;
    makespan = std::max(makespan, finish);
    --remaining;
  }

  PipelineResult result;
  result.makespan_s = makespan;
  result.throughput_ips = num_batches / makespan;
  return result;
}

uint64_t Dataset::fingerprint() const {
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const LabeledArch& rec) {
    const std::string s = rec.arch.canonical_json();
    h = fnv1a64(s.data(), s.size(), h);
    h = fnv1a64(&rec.latency_s, sizeof(double), h);
    h = fnv1a64(&rec.energy_j, sizeof(double), h);
  };
  for (const auto& rec : train) mix(rec);
  for (const auto& rec : val) mix(rec);
  h = fnv1a64(&sys_fingerprint, sizeof(sys_fingerprint), h);
  return h;
}

Dataset generate_dataset(const SpaceConfig& space, const SystemConfig& sys,
                         int n_samples, uint64_t seed) {
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  std::mt19937_64 rng(seed);
  Dataset ds;
  ds.sys_fingerprint = sys.fingerprint();
  const int n_train = n_samples * 7 / 10;
  for (int i = 0; i < n_samples; ++i) {
    LabeledArch rec;
    rec.arch = sample_valid_architecture(rng, space);
    const PerfEstimate est = simulate(rec.arch, sys);
    rec.latency_s = est.latency_s;
    rec.energy_j = est.device_energy_j;
    (i < n_train ? ds.train : ds.val).push_back(std::move(rec));
  }
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open dataset file for writing: " + path);
  auto dump = [&out, &ds](const LabeledArch& rec, const char* split) {
    nlohmann::json j;
    j["arch"] = rec.arch.to_json();
    j["latency_s"] = rec.latency_s;
    j["energy_j"] = rec.energy_j;
    j["sys"] = ds.sys_fingerprint;
    j["split"] = split;
    out << j.dump() << "\n";
  };
  for (const auto& rec : ds.train) dump(rec, "train");
  for (const auto& rec : ds.val) dump(rec, "val");
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file: " + path);
  Dataset ds;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    LabeledArch rec;
    rec.arch = Architecture::from_json(j.at("arch"));
    rec.latency_s = j.at("latency_s").get<double>();
    rec.energy_j = j.at("energy_j").get<double>();
    if (rec.latency_s <= 0 || rec.energy_j <= 0)
      throw ConfigError("dataset record with non-positive label");
    ds.sys_fingerprint = j.at("sys").get<uint64_t>();
    (j.at("split") == "train" ? ds.train : ds.val).push_back(std::move(rec));
  }
  return ds;
}

}  // namespace coforge
