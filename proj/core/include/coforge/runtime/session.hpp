#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coforge/design_space.hpp"
#include "coforge/runtime/kernels.hpp"

namespace coforge::runtime {

/// Everything the edge needs to execute its share of an architecture.
/// Round-trips bit-exactly through to_json / from_json.
struct DeploymentDescriptor {
  Architecture arch;
  Mapping mapping;
  std::string codec = "identity";
  uint64_t weight_seed = 0;
  bool identity_weights = false;
  double edge_delay_s = 0;  // injected pause before each edge segment (tests)

  nlohmann::json to_json() const;
  static DeploymentDescriptor from_json(const nlohmann::json& j);
};

/// A maximal run of same-side non-Communicate layers. comm_after is the
/// Communicate layer following the segment, if any.
struct Segment {
  Side side = Side::Device;
  size_t begin = 0;
  size_t end = 0;  // exclusive
  std::optional<size_t> comm_after;
};

/// Splits a valid architecture at its Communicate layers. Segments alternate
/// sides, starting on the device.
std::vector<Segment> plan_segments(const Architecture& arch,
                                   const Mapping& mapping);

/// True iff the pending skip tensor can still be consumed from `from_layer`
/// on: a Connect appears before the next Combine (which would overwrite the
/// skip). Senders drop dead skip state so transfers carry only live bytes.
bool skip_needed(const Architecture& arch, size_t from_layer);

}  // namespace coforge::runtime
