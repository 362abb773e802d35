#pragma once

#include <string>
#include <vector>

#include "coforge/design_space.hpp"
#include "coforge/system_profile.hpp"

namespace coforge {

struct LayerCost {
  Side side = Side::Device;
  bool is_comm = false;
  double t = 0;  // seconds
  double e = 0;  // device-side joules attributed to this layer
};

struct PerfEstimate {
  double latency_s = 0;
  double device_energy_j = 0;
  std::vector<LayerCost> breakdown;  // one entry per layer (+ implicit return)
  double comm_total_s = 0;
  double pipelined_throughput_ips = 0;
  // Three-term energy decomposition; sums to device_energy_j.
  double e_run_j = 0;
  double e_idle_j = 0;
  double e_comm_j = 0;
};

/// End-to-end sequential latency and on-device energy for a valid
/// architecture under the given system. Op times come from the analytic
/// cost model, or from sys.measured_lut when present.
PerfEstimate simulate(const Architecture& arch, const SystemConfig& sys);

/// Lower-bound latency: LUT op latencies plus compressed transfer time,
/// without per-message overhead. Never exceeds simulate().latency_s.
double lut_estimate(const Architecture& arch, const SystemConfig& sys,
                    const PerfLUT& lut);

/// Energy analogue of lut_estimate: per-op LUT energies (idle-converted on
/// the edge side) plus transfer energy without per-message overhead. Never
/// exceeds simulate().device_energy_j.
double lut_energy_estimate(const Architecture& arch, const SystemConfig& sys,
                           const PerfLUT& lut);

struct PipelineResult {
  double makespan_s = 0;
  double throughput_ips = 0;
};

/// Overlapped multi-batch execution over the device / link / edge resources.
/// Batches flow through the architecture's segments in order; each resource
/// serves one job at a time, granted by (ready time, batch, segment).
PipelineResult simulate_pipeline(const Architecture& arch,
                                 const SystemConfig& sys, int num_batches);

/// Resource-stage view used by the pipeline model; exposed for tooling.
struct PipelineStage {
  enum class Resource { Device, Link, Edge } resource;
  double duration_s = 0;
};
std::vector<PipelineStage> pipeline_stages(const Architecture& arch,
                                           const SystemConfig& sys);

struct LabeledArch {
  Architecture arch;
  double latency_s = 0;
  double energy_j = 0;
};

struct Dataset {
  std::vector<LabeledArch> train;
  std::vector<LabeledArch> val;
  uint64_t sys_fingerprint = 0;
  uint64_t fingerprint() const;
};

/// Rejection-samples valid architectures and labels them with simulate().
/// Split is 70/30 train/val in sample order; deterministic under seed.
Dataset generate_dataset(const SpaceConfig& space, const SystemConfig& sys,
                         int n_samples, uint64_t seed);

void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace coforge
