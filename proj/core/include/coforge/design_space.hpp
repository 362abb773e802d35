#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace coforge {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The six operation kinds of the unified design space. Communicate is the
/// device<->edge transfer pseudo-op; its position implies the mapping.
enum class OpKind : uint8_t {
  Sample = 0,
  Aggregate,
  Communicate,
  Combine,
  GlobalPooling,
  Connect,
};
inline constexpr int kNumOpKinds = 6;

enum class AggrKind : uint8_t { Max = 0, Mean, Sum };

const char* to_string(OpKind op);
const char* to_string(AggrKind a);
OpKind op_kind_from_string(const std::string& s);
AggrKind aggr_from_string(const std::string& s);

/// Per-layer function setting. Only the field matching the layer's OpKind is
/// meaningful: k for Sample, aggr for Aggregate, out_dim for Combine.
struct FunctionSetting {
  int k = 0;
  AggrKind aggr = AggrKind::Max;
  int out_dim = 0;

  bool operator==(const FunctionSetting&) const = default;
};

struct Layer {
  OpKind op = OpKind::Combine;
  FunctionSetting fn;

  bool operator==(const Layer&) const = default;
};

/// An ordered layer list plus the input point-cloud shape. The device-edge
/// mapping is implied by the Communicate positions (see derive_mapping).
struct Architecture {
  std::vector<Layer> layers;
  int input_nodes = 1024;
  int input_dim = 3;
  int dtype_bytes = 4;

  bool operator==(const Architecture&) const = default;

  nlohmann::json to_json() const;
  static Architecture from_json(const nlohmann::json& j);

  /// Canonical single-line JSON form; also the runtime handshake payload.
  std::string canonical_json() const;

  /// FNV-1a over the canonical JSON. Stable across runs.
  uint64_t hash() const;
};

enum class Side : uint8_t { Device = 0, Edge };

/// Execution side per layer. Layer 0 runs on the device; each Communicate
/// toggles the side (the Communicate entry carries the post-toggle side).
struct Mapping {
  std::vector<Side> side_per_layer;
  bool implicit_return = false;

  int num_side_changes() const;
};

struct ShapeRecord {
  int num_nodes = 0;
  int feature_dim = 0;
  bool has_active_graph = false;
  int active_k = 0;
};

/// Post-layer tensor shapes; entry i is the output shape of layer i.
struct TensorShapeTrace {
  ShapeRecord input;
  std::vector<ShapeRecord> per_layer;

  const ShapeRecord& before(size_t layer_idx) const {
    return layer_idx == 0 ? input : per_layer[layer_idx - 1];
  }
  const ShapeRecord& final() const { return per_layer.back(); }
};

struct SpaceConfig {
  int min_layers = 12;
  int max_layers = 12;
  std::vector<OpKind> vocabulary = {OpKind::Sample,    OpKind::Aggregate,
                                    OpKind::Communicate, OpKind::Combine,
                                    OpKind::GlobalPooling, OpKind::Connect};
  std::vector<int> k_choices = {5, 10, 20, 40};
  std::vector<AggrKind> aggr_choices = {AggrKind::Max, AggrKind::Mean,
                                        AggrKind::Sum};
  std::vector<int> out_dim_choices = {16, 32, 64, 128, 256};
  int input_nodes = 1024;
  int input_dim = 3;

  nlohmann::json to_json() const;
  static SpaceConfig from_json(const nlohmann::json& j);
};

struct RuleViolation {
  std::string rule;  // "V1".."V5"
  int layer_idx;     // -1 when not tied to a single layer
  std::string detail;
};

struct ValidityReport {
  bool valid = false;
  std::vector<RuleViolation> violated;
};

/// Uniform random layer sequence over the allowed vocabulary. Not guaranteed
/// valid; callers loop with check_validity as in the search stage.
Architecture sample_architecture(uint64_t rng_seed, const SpaceConfig& cfg);
Architecture sample_architecture(std::mt19937_64& rng, const SpaceConfig& cfg);

/// V1 no consecutive Communicate; V2 Communicate neither first nor last;
/// V3 Aggregate needs an active sampled graph; V4 no Sample/Aggregate after
/// GlobalPooling; V5 at least one Combine.
ValidityReport check_validity(const Architecture& arch);

Mapping derive_mapping(const Architecture& arch);

TensorShapeTrace trace_shapes(const Architecture& arch);

/// Wire header bytes charged once per Communicate message.
inline constexpr int kCommHeaderBytes = 15;

/// Payload bytes moved by the Communicate at layer_idx: features, plus the
/// active graph when a later Aggregate still needs it, plus the frame header.
uint64_t comm_volume(const Architecture& arch, const TensorShapeTrace& trace,
                     size_t layer_idx);

/// True iff the graph active at layer_idx must cross the link: some Aggregate
/// after layer_idx runs before the next Sample.
bool graph_forwarded(const Architecture& arch, size_t layer_idx);

/// Bytes for the implicit final-result transfer when execution ends on Edge.
uint64_t return_volume(const Architecture& arch, const TensorShapeTrace& trace);

/// Validity plus shape feasibility (Connect needs an executable skip source).
/// This is what samplers use for rejection.
bool executable(const Architecture& arch);

/// Rejection-samples until `executable`; throws ConfigError after
/// max_attempts consecutive failures.
Architecture sample_valid_architecture(uint64_t rng_seed, const SpaceConfig& cfg,
                                       int max_attempts = 10000);
Architecture sample_valid_architecture(std::mt19937_64& rng, const SpaceConfig& cfg,
                                       int max_attempts = 10000);

}  // namespace coforge
