#pragma once

// Independent discrete-event reference for the pipelined co-inference model.
// Stage durations are recomputed here from first principles (the documented
// per-op cost formulas), and scheduling is a classic event-calendar DES:
// a resource that becomes free starts the lowest-batch-index job already
// waiting, or idles until the next arrival. This is written deliberately
// without reference to the library's list scheduler.

#include <limits>
#include <vector>

#include "coforge/design_space.hpp"
#include "coforge/system_profile.hpp"

namespace testsupport {

enum class Res { Device = 0, Link = 1, Edge = 2 };

struct OracleStage {
  Res res;
  double dur;
};

inline double oracle_op_time(const coforge::EndpointProfile& ep,
                             coforge::OpKind op, const coforge::OpShape& s) {
  using coforge::OpKind;
  const double c = ep.cost_coeff[static_cast<size_t>(op)];
  const double n = s.n, f = s.f, f2 = s.f2;
  double units = 0;
  switch (op) {
    case OpKind::Sample: units = n * n * f; break;
    case OpKind::Aggregate: units = n * f2 * f; break;
    case OpKind::Combine: units = n * f * f2; break;
    case OpKind::GlobalPooling: units = n * f; break;
    case OpKind::Connect: units = n * f; break;
    default: return 0;
  }
  return c * units / ep.throughput;
}

inline double oracle_comm_time(const coforge::SystemConfig& sys,
                               uint64_t bytes) {
  return static_cast<double>(bytes) * 8.0 *
             sys.net.compression_ratio_estimate / sys.net.bandwidth_bps +
         sys.net.per_message_overhead_s;
}

inline std::vector<OracleStage> oracle_stages(const coforge::Architecture& arch,
                                              const coforge::SystemConfig& sys) {
  using namespace coforge;
  const Mapping mapping = derive_mapping(arch);
  const TensorShapeTrace trace = trace_shapes(arch);
  std::vector<OracleStage> stages;
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    if (arch.layers[i].op == OpKind::Communicate) {
      stages.push_back({Res::Link, oracle_comm_time(sys, comm_volume(arch, trace, i))});
      continue;
    }
    const Side side = mapping.side_per_layer[i];
    const Res res = side == Side::Device ? Res::Device : Res::Edge;
    const double t = oracle_op_time(sys.endpoint(side), arch.layers[i].op,
                                    op_shape_at(arch, trace, i));
    if (!stages.empty() && stages.back().res == res)
      stages.back().dur += t;
    else
      stages.push_back({res, t});
  }
  if (mapping.implicit_return)
    stages.push_back({Res::Link, oracle_comm_time(sys, return_volume(arch, trace))});
  return stages;
}

/// Event-calendar simulation: returns the makespan of `batches` identical
/// jobs flowing through the stages in order, one job per resource at a time,
/// ties broken by batch index.
inline double des_makespan(const std::vector<OracleStage>& stages, int batches) {
  const int ns = static_cast<int>(stages.size());
  std::vector<int> next_stage(batches, 0);
  std::vector<double> arrival(batches, 0.0);  // time the batch's next stage is ready
  double res_free[3] = {0, 0, 0};
  double makespan = 0;
  int remaining = batches * ns;
  while (remaining > 0) {
    // Advance time: find the earliest (start time, batch) event that can run.
    int pick = -1;
    double pick_start = std::numeric_limits<double>::infinity();
    for (int b = 0; b < batches; ++b) {
      if (next_stage[b] >= ns) continue;
      const int r = static_cast<int>(stages[next_stage[b]].res);
      const double start = arrival[b] > res_free[r] ? arrival[b] : res_free[r];
      if (start < pick_start) {
        pick_start = start;
        pick = b;
      }
    }
    const OracleStage& st = stages[next_stage[pick]];
    const double end = pick_start + st.dur;
    res_free[static_cast<int>(st.res)] = end;
    arrival[pick] = end;
    ++next_stage[pick];
    if (end > makespan) makespan = end;
    --remaining;
  }
  return makespan;
}

}  // namespace testsupport
