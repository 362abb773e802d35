#include "coforge/runtime/session.hpp"

namespace coforge::runtime {

nlohmann::json DeploymentDescriptor::to_json() const {
  nlohmann::json sides = nlohmann::json::array();
  for (Side s : mapping.side_per_layer)
    sides.push_back(s == Side::Device ? "device" : "edge");
  return {{"arch", nlohmann::json::parse(arch.canonical_json())},
          {"mapping", std::move(sides)},
          {"implicit_return", mapping.implicit_return},
          {"codec", codec},
          {"weight_seed", weight_seed},
          {"identity_weights", identity_weights},
          {"edge_delay_s", edge_delay_s}};
}

DeploymentDescriptor DeploymentDescriptor::from_json(const nlohmann::json& j) {
  DeploymentDescriptor d;
  d.arch = Architecture::from_json(j.at("arch"));
  for (const auto& s : j.at("mapping"))
    d.mapping.side_per_layer.push_back(s.get<std::string>() == "device"
                                           ? Side::Device
                                           : Side::Edge);
  d.mapping.implicit_return = j.at("implicit_return").get<bool>();
  d.codec = j.at("codec").get<std::string>();
  d.weight_seed = j.at("weight_seed").get<uint64_t>();
  d.identity_weights = j.at("identity_weights").get<bool>();
  d.edge_delay_s = j.at("edge_delay_s").get<double>();
  return d;
}

std::vector<Segment> plan_segments(const Architecture& arch,
                                   const Mapping& mapping) {
  if (mapping.side_per_layer.size() != arch.layers.size())
    throw PreconditionError("mapping does not match architecture");
  std::vector<Segment> plan;
  Segment cur;
  cur.side = Side::Device;
  cur.begin = 0;
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    if (arch.layers[i].op == OpKind::Communicate) {
      cur.end = i;
      cur.comm_after = i;
      plan.push_back(cur);
      cur = Segment{};
      cur.side = mapping.side_per_layer[i];
      cur.begin = i + 1;
    }
  }
  cur.end = arch.layers.size();
  plan.push_back(cur);
  return plan;
}

bool skip_needed(const Architecture& arch, size_t from_layer) {
  for (size_t i = from_layer; i < arch.layers.size(); ++i) {
    if (arch.layers[i].op == OpKind::Connect) return true;
    if (arch.layers[i].op == OpKind::Combine) return false;
  }
  return false;
}

}  // namespace coforge::runtime
