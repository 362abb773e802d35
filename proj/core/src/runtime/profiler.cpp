#include "coforge/runtime/profiler.hpp"

#include <sys/utsname.h>

#include <algorithm>
#include <chrono>
#include <random>

#include "coforge/runtime/kernels.hpp"
#include "coforge/util.hpp"

namespace coforge::runtime {

namespace {

using Clock = std::chrono::steady_clock;

double timer_resolution() {
  double best = 1.0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = Clock::now();
    auto b = Clock::now();
    while (b == a) b = Clock::now();
    best = std::min(best, std::chrono::duration<double>(b - a).count());
  }
  return best;
}

// Builds the state + layer for one grid point, mirroring what the runtime
// actually executes so measurements match deployment behavior.
struct Workload {
  ExecState state;
  Layer layer;
};

Workload make_workload(OpKind op, int n, int f, int f2, std::mt19937_64& rng) {
  Workload w;
  w.layer.op = op;
  const auto fill = [&](int rows, int cols) {
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    Eigen::MatrixXf m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
  };
  switch (op) {
    case OpKind::Sample: {
      // k barely affects the N^2 F distance sweep; profile a representative
      // value clamped to the point count.
      const int n_eff = std::max(n, 2);
      w.state.x = fill(n_eff, f);
      w.layer.fn.k = std::clamp(20, 1, n_eff - 1);
      break;
    }
    case OpKind::Aggregate: {
      w.state.x = fill(n, f);
      const int k = std::max(1, std::min(f2, n));
      w.state.neighbors.resize(n, k);
      std::uniform_int_distribution<uint32_t> idx(0, n - 1);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) w.state.neighbors(i, j) = idx(rng);
      w.state.has_graph = true;
      w.layer.fn.aggr = AggrKind::Mean;
      break;
    }
    case OpKind::Combine:
      w.state.x = fill(n, f);
      w.layer.fn.out_dim = f2;
      break;
    case OpKind::GlobalPooling:
      w.state.x = fill(n, f);
      break;
    case OpKind::Connect:
      w.state.x = fill(n, f);
      w.state.skip = fill(n, f);
      w.state.has_skip = true;
      break;
    case OpKind::Communicate:
      throw ConfigError("communicate is not a profiled kernel");
  }
  return w;
}

}  // namespace

ProfileReport profile_endpoint(const std::string& endpoint_name,
                               const EndpointProfile& power_model,
                               const LutGrid& grid, const ProfileOptions& opt) {
  if (opt.warmup < 1) throw ConfigError("warmup must be >= 1");
  if (opt.repetitions < 1) throw ConfigError("repetitions must be >= 1");

  ProfileReport report;
  utsname un{};
  if (uname(&un) == 0)
    report.machine = std::string(un.nodename) + "/" + un.machine;
  const double resolution = timer_resolution();
  std::mt19937_64 rng(sub_seed(opt.seed, "profile-" + endpoint_name));
  KernelOptions kernels;
  kernels.weight_seed = sub_seed(opt.seed, "profile-weights");

  const OpKind profiled[] = {OpKind::Sample, OpKind::Aggregate, OpKind::Combine,
                             OpKind::GlobalPooling, OpKind::Connect};
  for (OpKind op : profiled) {
    PerfLUT::Table table;
    for (int n : grid.n_buckets) table.n_axis.push_back(n);
    for (int f : grid.f_buckets) table.f_axis.push_back(f);
    const std::vector<int>* f2_buckets = nullptr;
    if (op == OpKind::Aggregate)
      f2_buckets = &grid.k_buckets;
    else if (op == OpKind::Combine)
      f2_buckets = &grid.f_buckets;
    if (f2_buckets)
      for (int v : *f2_buckets) table.f2_axis.push_back(v);

    const size_t nf2 = std::max<size_t>(1, table.f2_axis.size());
    table.values.resize(table.n_axis.size() * table.f_axis.size() * nf2);
    size_t flat = 0;
    for (int n : grid.n_buckets)
      for (int f : grid.f_buckets)
        for (size_t i2 = 0; i2 < nf2; ++i2) {
          const int f2 = f2_buckets ? (*f2_buckets)[i2] : 0;
          Workload w = make_workload(op, n, f, f2, rng);
          std::vector<double> times;
          for (int r = 0; r < opt.warmup + opt.repetitions; ++r) {
            ExecState state = w.state;
            const auto t0 = Clock::now();
            run_layer(state, w.layer, /*layer_idx=*/flat, kernels);
            const auto t1 = Clock::now();
            if (r >= opt.warmup)
              times.push_back(std::chrono::duration<double>(t1 - t0).count());
          }
          std::sort(times.begin(), times.end());
          const double median = times[times.size() / 2];
          if (median <= 0 || resolution > 0.01 * median) ++report.low_confidence;
          PerfLUT::Value value;
          value.latency_s = std::max(median, resolution);
          value.energy_j =
              value.latency_s *
              power_model.op_power(op, EndpointProfile::power_feature_dim(
                                           op, OpShape{n, f, f2}));
          table.values[flat++] = value;
          ++report.entries;
        }
    report.lut.set_table(endpoint_name, op, std::move(table));
  }
  report.lut.recompute_stats();
  return report;
}

}  // namespace coforge::runtime
