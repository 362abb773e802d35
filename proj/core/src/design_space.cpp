#include "coforge/design_space.hpp"

#include <algorithm>
#include <sstream>

#include "coforge/util.hpp"

namespace coforge {

const char* to_string(OpKind op) {
  switch (op) {
    case OpKind::Sample: return "sample";
    case OpKind::Aggregate: return "aggregate";
    case OpKind::Communicate: return "communicate";
    case OpKind::Combine: return "combine";
    case OpKind::GlobalPooling: return "global_pooling";
    case OpKind::Connect: return "connect";
  }
  throw std::logic_error("unknown OpKind");
}

const char* to_string(AggrKind a) {
  switch (a) {
    case AggrKind::Max: return "max";
    case AggrKind::Mean: return "mean";
    case AggrKind::Sum: return "sum";
  }
  throw std::logic_error("unknown AggrKind");
}

OpKind op_kind_from_string(const std::string& s) {
  for (int i = 0; i < kNumOpKinds; ++i) {
    auto op = static_cast<OpKind>(i);
    if (s == to_string(op)) return op;
  }
  throw ConfigError("unknown operation kind: " + s);
}

AggrKind aggr_from_string(const std::string& s) {
  for (int i = 0; i < 3; ++i) {
    auto a = static_cast<AggrKind>(i);
    if (s == to_string(a)) return a;
  }
  throw ConfigError("unknown aggregation kind: " + s);
}

nlohmann::json Architecture::to_json() const {
  nlohmann::json layers_j = nlohmann::json::array();
  for (const auto& layer : layers) {
    nlohmann::json lj;
    lj["op"] = to_string(layer.op);
    switch (layer.op) {
      case OpKind::Sample: lj["k"] = layer.fn.k; break;
      case OpKind::Aggregate: lj["aggr"] = to_string(layer.fn.aggr); break;
      case OpKind::Combine: lj["out_dim"] = layer.fn.out_dim; break;
      default: break;
    }
    layers_j.push_back(std::move(lj));
  }
  nlohmann::json j;
  j["layers"] = std::move(layers_j);
  j["input"] = {input_nodes, input_dim};
  if (dtype_bytes != 4) j["dtype_bytes"] = dtype_bytes;
  return j;
}

Architecture Architecture::from_json(const nlohmann::json& j) {
  Architecture arch;
  arch.layers.clear();
  for (const auto& lj : j.at("layers")) {
    Layer layer;
    layer.op = op_kind_from_string(lj.at("op").get<std::string>());
    switch (layer.op) {
      case OpKind::Sample: layer.fn.k = lj.at("k").get<int>(); break;
      case OpKind::Aggregate:
        layer.fn.aggr = aggr_from_string(lj.at("aggr").get<std::string>());
        break;
      case OpKind::Combine: layer.fn.out_dim = lj.at("out_dim").get<int>(); break;
      default: break;
    }
    arch.layers.push_back(layer);
  }
  arch.input_nodes = j.at("input").at(0).get<int>();
  arch.input_dim = j.at("input").at(1).get<int>();
  arch.dtype_bytes = j.value("dtype_bytes", 4);
  return arch;
}

std::string Architecture::canonical_json() const {
  // nlohmann keeps object keys sorted; dump() with no indent is canonical.
  return to_json().dump();
}

uint64_t Architecture::hash() const { return fnv1a64(canonical_json()); }

int Mapping::num_side_changes() const {
  int changes = 0;
  for (size_t i = 1; i < side_per_layer.size(); ++i)
    if (side_per_layer[i] != side_per_layer[i - 1]) ++changes;
  return changes;
}

nlohmann::json SpaceConfig::to_json() const {
  nlohmann::json j;
  j["min_layers"] = min_layers;
  j["max_layers"] = max_layers;
  nlohmann::json vocab = nlohmann::json::array();
  for (auto op : vocabulary) vocab.push_back(to_string(op));
  j["vocabulary"] = std::move(vocab);
  j["k_choices"] = k_choices;
  nlohmann::json aggrs = nlohmann::json::array();
  for (auto a : aggr_choices) aggrs.push_back(to_string(a));
  j["aggr_choices"] = std::move(aggrs);
  j["out_dim_choices"] = out_dim_choices;
  j["input"] = {input_nodes, input_dim};
  return j;
}

SpaceConfig SpaceConfig::from_json(const nlohmann::json& j) {
  SpaceConfig cfg;
  cfg.min_layers = j.value("min_layers", cfg.min_layers);
  cfg.max_layers = j.value("max_layers", cfg.max_layers);
  if (j.contains("vocabulary")) {
    cfg.vocabulary.clear();
    for (const auto& s : j.at("vocabulary"))
      cfg.vocabulary.push_back(op_kind_from_string(s.get<std::string>()));
  }
  if (j.contains("k_choices")) cfg.k_choices = j.at("k_choices").get<std::vector<int>>();
  if (j.contains("aggr_choices")) {
    cfg.aggr_choices.clear();
    for (const auto& s : j.at("aggr_choices"))
      cfg.aggr_choices.push_back(aggr_from_string(s.get<std::string>()));
  }
  if (j.contains("out_dim_choices"))
    cfg.out_dim_choices = j.at("out_dim_choices").get<std::vector<int>>();
  if (j.contains("input")) {
    cfg.input_nodes = j.at("input").at(0).get<int>();
    cfg.input_dim = j.at("input").at(1).get<int>();
  }
  return cfg;
}

namespace {

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& choices) {
  std::uniform_int_distribution<size_t> dist(0, choices.size() - 1);
  return choices[dist(rng)];
}

void validate_space(const SpaceConfig& cfg) {
  if (cfg.vocabulary.empty()) throw ConfigError("empty operation vocabulary");
  if (cfg.max_layers < 1) throw ConfigError("max_layers must be >= 1");
  if (cfg.min_layers < 1 || cfg.min_layers > cfg.max_layers)
    throw ConfigError("min_layers out of range");
  for (auto op : cfg.vocabulary) {
    if (op == OpKind::Sample && cfg.k_choices.empty())
      throw ConfigError("Sample in vocabulary but k_choices empty");
    if (op == OpKind::Aggregate && cfg.aggr_choices.empty())
      throw ConfigError("Aggregate in vocabulary but aggr_choices empty");
    if (op == OpKind::Combine && cfg.out_dim_choices.empty())
      throw ConfigError("Combine in vocabulary but out_dim_choices empty");
  }
}

}  // namespace

Architecture sample_architecture(std::mt19937_64& rng, const SpaceConfig& cfg) {
  validate_space(cfg);
  Architecture arch;
  arch.input_nodes = cfg.input_nodes;
  arch.input_dim = cfg.input_dim;
  std::uniform_int_distribution<int> len_dist(cfg.min_layers, cfg.max_layers);
  const int num_layers = len_dist(rng);
  arch.layers.reserve(num_layers);
  for (int i = 0; i < num_layers; ++i) {
    Layer layer;
    layer.op = pick(rng, cfg.vocabulary);
    switch (layer.op) {
      case OpKind::Sample: layer.fn.k = pick(rng, cfg.k_choices); break;
      case OpKind::Aggregate: layer.fn.aggr = pick(rng, cfg.aggr_choices); break;
      case OpKind::Combine: layer.fn.out_dim = pick(rng, cfg.out_dim_choices); break;
      default: break;
    }
    arch.layers.push_back(layer);
  }
  return arch;
}

Architecture sample_architecture(uint64_t rng_seed, const SpaceConfig& cfg) {
  std::mt19937_64 rng(rng_seed);
  return sample_architecture(rng, cfg);
}

ValidityReport check_validity(const Architecture& arch) {
  ValidityReport report;
  const auto& layers = arch.layers;
  if (layers.empty()) {
    report.violated.push_back({"V5", -1, "architecture has no layers"});
    return report;
  }

  bool have_graph = false;
  bool pooled = false;
  bool have_combine = false;
  for (size_t i = 0; i < layers.size(); ++i) {
    const OpKind op = layers[i].op;
    switch (op) {
      case OpKind::Communicate:
        if (i == 0)
          report.violated.push_back({"V2", 0, "Communicate as first layer"});
        if (i + 1 == layers.size())
          report.violated.push_back({"V2", static_cast<int>(i), "Communicate as last layer"});
        if (i > 0 && layers[i - 1].op == OpKind::Communicate)
          report.violated.push_back({"V1", static_cast<int>(i), "consecutive Communicate"});
        break;
      case OpKind::Sample:
        if (pooled)
          report.violated.push_back({"V4", static_cast<int>(i), "Sample after GlobalPooling"});
        have_graph = true;
        break;
      case OpKind::Aggregate:
        if (pooled)
          report.violated.push_back({"V4", static_cast<int>(i), "Aggregate after GlobalPooling"});
        else if (!have_graph)
          report.violated.push_back({"V3", static_cast<int>(i), "Aggregate without a preceding Sample"});
        break;
      case OpKind::GlobalPooling:
        pooled = true;
        have_graph = false;
        break;
      case OpKind::Combine:
        have_combine = true;
        break;
      case OpKind::Connect:
        break;
    }
  }
  if (!have_combine) report.violated.push_back({"V5", -1, "no Combine layer"});

  report.valid = report.violated.empty();
  return report;
}

Mapping derive_mapping(const Architecture& arch) {
  if (!check_validity(arch).valid)
    throw PreconditionError("derive_mapping requires a valid architecture");
  Mapping mapping;
  mapping.side_per_layer.reserve(arch.layers.size());
  Side side = Side::Device;
  for (const auto& layer : arch.layers) {
    if (layer.op == OpKind::Communicate)
      side = side == Side::Device ? Side::Edge : Side::Device;
    mapping.side_per_layer.push_back(side);
  }
  mapping.implicit_return = side == Side::Edge;
  return mapping;
}

TensorShapeTrace trace_shapes(const Architecture& arch) {
  if (!check_validity(arch).valid)
    throw PreconditionError("trace_shapes requires a valid architecture");
  TensorShapeTrace trace;
  trace.input = {arch.input_nodes, arch.input_dim, false, 0};
  ShapeRecord cur = trace.input;
  // Skip source for Connect: the layer-input of the most recent Combine.
  std::optional<ShapeRecord> skip_source;
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& layer = arch.layers[i];
    switch (layer.op) {
      case OpKind::Sample:
        cur.has_active_graph = true;
        cur.active_k = layer.fn.k;
        break;
      case OpKind::Aggregate:
        if (!cur.has_active_graph)
          throw PreconditionError("Aggregate at layer " + std::to_string(i) +
                                  " has no active graph");
        break;
      case OpKind::Communicate:
        break;
      case OpKind::Combine:
        skip_source = cur;
        cur.feature_dim = layer.fn.out_dim;
        break;
      case OpKind::GlobalPooling:
        cur.num_nodes = 1;
        cur.has_active_graph = false;
        cur.active_k = 0;
        break;
      case OpKind::Connect:
        if (!skip_source)
          throw PreconditionError("Connect at layer " + std::to_string(i) +
                                  " has no skip source");
        if (skip_source->num_nodes != cur.num_nodes)
          throw PreconditionError("Connect at layer " + std::to_string(i) +
                                  " skip source node count mismatch");
        cur.feature_dim += skip_source->feature_dim;
        break;
    }
    trace.per_layer.push_back(cur);
  }
  return trace;
}

bool graph_forwarded(const Architecture& arch, size_t layer_idx) {
  for (size_t i = layer_idx + 1; i < arch.layers.size(); ++i) {
    if (arch.layers[i].op == OpKind::Sample) return false;
    if (arch.layers[i].op == OpKind::GlobalPooling) return false;
    if (arch.layers[i].op == OpKind::Aggregate) return true;
  }
  return false;
}

uint64_t comm_volume(const Architecture& arch, const TensorShapeTrace& trace,
                     size_t layer_idx) {
  if (layer_idx >= arch.layers.size() ||
      arch.layers[layer_idx].op != OpKind::Communicate)
    throw PreconditionError("comm_volume: layer is not a Communicate");
  const ShapeRecord& in = trace.before(layer_idx);
  uint64_t bytes = static_cast<uint64_t>(in.num_nodes) * in.feature_dim *
                   arch.dtype_bytes;
  if (in.has_active_graph && graph_forwarded(arch, layer_idx)) {
    // Edge list: num_nodes * k entries of (u32, u32).
    bytes += static_cast<uint64_t>(in.num_nodes) * in.active_k * 4 * 2;
  }
  return bytes + kCommHeaderBytes;
}

uint64_t return_volume(const Architecture& arch, const TensorShapeTrace& trace) {
  const ShapeRecord& out = trace.final();
  return static_cast<uint64_t>(out.num_nodes) * out.feature_dim *
             arch.dtype_bytes +
         kCommHeaderBytes;
}

bool executable(const Architecture& arch) {
  if (!check_validity(arch).valid) return false;
  try {
    trace_shapes(arch);
  } catch (const PreconditionError&) {
    return false;
  }
  return true;
}

Architecture sample_valid_architecture(std::mt19937_64& rng, const SpaceConfig& cfg,
                                       int max_attempts) {
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Architecture arch = sample_architecture(rng, cfg);
    if (executable(arch)) return arch;
  }
  throw ConfigError("no valid architecture found in " +
                    std::to_string(max_attempts) + " attempts");
}

Architecture sample_valid_architecture(uint64_t rng_seed, const SpaceConfig& cfg,
                                       int max_attempts) {
  std::mt19937_64 rng(rng_seed);
  return sample_valid_architecture(rng, cfg, max_attempts);
}

}  // namespace coforge
