#pragma once

#include <string>

#include "coforge/system_profile.hpp"

namespace coforge::runtime {

struct ProfileOptions {
  int repetitions = 5;
  int warmup = 1;
  uint64_t seed = 0;
};

struct ProfileReport {
  PerfLUT lut;
  int low_confidence = 0;  // entries where timer resolution > 1% of the value
  int entries = 0;
  std::string machine;  // host fingerprint recorded with the measurements
};

/// Times run_kernel over the grid (median of repetitions after warmup) and
/// builds a measured LUT for `endpoint_name`. Energy entries come from the
/// endpoint's power model applied to the measured times.
ProfileReport profile_endpoint(const std::string& endpoint_name,
                               const EndpointProfile& power_model,
                               const LutGrid& grid, const ProfileOptions& opt);

}  // namespace coforge::runtime
