#pragma once

#include <string>
#include <vector>

#include "coforge/runtime/session.hpp"

namespace coforge::runtime {

struct DeviceConfig {
  std::string edge_host = "127.0.0.1";
  int edge_port = 7077;
  int num_batches = 8;
  int pipeline_depth = 2;
  double throttle_bps = 0;  // sender token bucket, bits per second
  uint64_t seed = 0;
  std::string codec = "zlib";  // preferred; negotiation falls back to identity
  bool identity_weights = false;
  double edge_delay_s = 0;
};

struct BatchResult {
  uint32_t batch_id = 0;
  bool ok = false;
  double latency_s = 0;
  Eigen::MatrixXf output;
};

struct RunReport {
  std::vector<BatchResult> batches;
  double wall_s = 0;
  double throughput_ips = 0;
  uint64_t bytes_sent = 0;      // wire payload bytes, device -> edge
  uint64_t bytes_received = 0;  // wire payload bytes, edge -> device
  uint64_t raw_sent = 0;        // pre-compression payload bytes
  uint64_t raw_received = 0;
  double compression_ratio = 1.0;  // wire / raw over data frames
  std::string codec;
  int failed_batches = 0;

  double mean_latency_s() const;
  nlohmann::json to_json() const;
};

/// Runs num_batches of seeded synthetic inputs through the architecture,
/// executing device segments locally and edge segments via the connected
/// server, with up to pipeline_depth batches in flight. Connection loss marks
/// in-flight batches failed and returns a partial report.
RunReport run_device(const Architecture& arch, const DeviceConfig& cfg);

}  // namespace coforge::runtime
