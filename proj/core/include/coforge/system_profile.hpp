#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coforge/design_space.hpp"

namespace coforge {

/// Shape key for per-op cost queries. f2 carries the second degree of freedom
/// where one exists: k for Aggregate, F_out for Combine, otherwise 0.
struct OpShape {
  int n = 1;
  int f = 1;
  int f2 = 0;
};

/// Builds the cost-model query for the layer at `idx` from the shape trace.
OpShape op_shape_at(const Architecture& arch, const TensorShapeTrace& trace,
                    size_t idx);

/// Analytic endpoint model: per-op cost coefficients over a shared throughput
/// scale, plus piecewise-linear run power in the feature dimension.
struct EndpointProfile {
  std::string name;
  double throughput = 1e9;  // scalar-op units per second
  std::array<double, kNumOpKinds> cost_coeff{};  // Communicate unused

  struct PowerCurve {
    double f_lo = 1, p_lo = 1, f_hi = 256, p_hi = 1;  // watts at two F points
  };
  std::array<PowerCurve, kNumOpKinds> run_power{};
  double idle_power_w = 1.0;
  double comm_power_w = 1.0;

  double op_time(OpKind op, const OpShape& shape) const;
  double op_power(OpKind op, int feature_dim) const;
  double op_energy(OpKind op, const OpShape& shape) const {
    return op_time(op, shape) * op_power(op, power_feature_dim(op, shape));
  }
  static int power_feature_dim(OpKind op, const OpShape& shape) {
    return op == OpKind::Combine ? shape.f2 : shape.f;
  }

  /// Throws ConfigError on non-positive powers or run power below idle.
  void validate() const;

  nlohmann::json to_json() const;
  static EndpointProfile from_json(const nlohmann::json& j);
};

struct NetworkModel {
  double bandwidth_bps = 40e6;
  double per_message_overhead_s = 0.005;
  double compression_ratio_estimate = 1.0;  // in (0, 1]

  nlohmann::json to_json() const;
  static NetworkModel from_json(const nlohmann::json& j);
};

/// Bucketed per-(op, endpoint) latency/energy table with z-score stats over
/// the latency and energy columns. Queries between buckets interpolate
/// linearly in log space per axis, which is exact for the monomial cost
/// models; queries outside the grid extrapolate on the outermost segment.
class PerfLUT {
 public:
  struct Value {
    double latency_s = 0;
    double energy_j = 0;
  };
  struct Table {
    std::vector<double> n_axis;
    std::vector<double> f_axis;
    std::vector<double> f2_axis;  // empty when the op has no second dof
    std::vector<Value> values;    // dense, index = (in * |f| + if_) * max(1,|f2|) + if2
  };
  struct NormStats {
    double mean = 0;
    double std_dev = 1;
  };

  Value lookup(const std::string& endpoint, OpKind op, const OpShape& shape) const;
  bool has_endpoint(const std::string& endpoint) const {
    return tables_.count(endpoint) > 0;
  }

  double normalize_latency(double x) const {
    return (x - lat_stats_.mean) / lat_stats_.std_dev;
  }
  double denormalize_latency(double z) const {
    return z * lat_stats_.std_dev + lat_stats_.mean;
  }
  double normalize_energy(double x) const {
    return (x - energy_stats_.mean) / energy_stats_.std_dev;
  }
  double denormalize_energy(double z) const {
    return z * energy_stats_.std_dev + energy_stats_.mean;
  }
  const NormStats& latency_stats() const { return lat_stats_; }
  const NormStats& energy_stats() const { return energy_stats_; }

  size_t num_entries() const;

  void set_table(const std::string& endpoint, OpKind op, Table table);
  const Table* table(const std::string& endpoint, OpKind op) const;
  void recompute_stats();

  nlohmann::json to_json() const;
  static PerfLUT from_json(const nlohmann::json& j);

 private:
  std::map<std::string, std::array<std::optional<Table>, kNumOpKinds>> tables_;
  NormStats lat_stats_;
  NormStats energy_stats_;
};

struct LutGrid {
  std::vector<int> n_buckets = {1, 128, 1024};
  std::vector<int> f_buckets = {3, 64, 128, 256, 300};
  std::vector<int> k_buckets = {1, 5, 10, 20, 40};
};

/// Populates the LUT analytically from the endpoint cost models.
PerfLUT build_lut(const std::vector<EndpointProfile>& profiles,
                  const LutGrid& grid);

struct Constraints {
  double c_lat_s = 0.05;
  double c_e_j = 0.2;
};

struct SystemConfig {
  std::string pack_name;
  EndpointProfile device;
  EndpointProfile edge;
  NetworkModel net;
  Constraints constraints;
  double lambda = 0.5;
  double w_l = 1.0;
  double w_e = 1.0;

  /// When set, simulation pulls op latency/energy from measured entries
  /// instead of the analytic cost model.
  std::shared_ptr<const PerfLUT> measured_lut;

  const EndpointProfile& endpoint(Side side) const {
    return side == Side::Device ? device : edge;
  }

  /// Hash over pack, network and constraint settings; keys zoo shelves.
  uint64_t fingerprint() const;

  nlohmann::json to_json() const;  // excludes measured_lut
  static SystemConfig from_json(const nlohmann::json& j);
};

/// Default profile packs: "tx2-gpu", "tx2-cpu", "pi-gpu", "pi-cpu".
/// Coefficients are tuned so a DGCNN-like reference runs in ~242 ms
/// device-only on the tx2-like endpoint.
SystemConfig default_pack(const std::string& name);
std::vector<std::string> default_pack_names();

/// DGCNN-style calibration architecture (1024 x 3 input, four sample/
/// aggregate/combine blocks, pooled classifier head).
Architecture reference_architecture();

}  // namespace coforge
