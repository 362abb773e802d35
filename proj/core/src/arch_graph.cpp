#include "coforge/arch_graph.hpp"

#include <sstream>

namespace coforge {

ArchGraph build_graph(const Architecture& arch) {
  if (!check_validity(arch).valid)
    throw PreconditionError("build_graph requires a valid architecture");
  ArchGraph g;
  const int n_ops = static_cast<int>(arch.layers.size());
  g.num_nodes = n_ops + 1;
  const int global = g.global_node();
  // Chain edges in layer order, then self-loops, then global links; the
  // fixed emission order makes serialization deterministic.
  for (int i = 0; i + 1 < n_ops; ++i) g.edges.emplace_back(i, i + 1);
  for (int v = 0; v < g.num_nodes; ++v) g.edges.emplace_back(v, v);
  for (int v = 0; v < n_ops; ++v) {
    g.edges.emplace_back(global, v);
    g.edges.emplace_back(v, global);
  }
  return g;
}

Eigen::MatrixXd ArchGraph::adjacency() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(num_nodes, num_nodes);
  for (const auto& [u, v] : edges) a(u, v) = 1.0;
  return a;
}

Eigen::MatrixXd ArchGraph::mean_adjacency() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(num_nodes, num_nodes);
  for (const auto& [u, v] : edges) a(v, u) = 1.0;
  for (int v = 0; v < num_nodes; ++v) {
    const double indeg = a.row(v).sum();
    if (indeg > 0) a.row(v) /= indeg;
  }
  return a;
}

std::string ArchGraph::to_dot(const Architecture& arch) const {
  std::ostringstream out;
  out << "digraph arch {\n";
  for (int v = 0; v < num_nodes; ++v) {
    if (v == global_node())
      out << "  n" << v << " [label=\"global\", shape=doublecircle];\n";
    else
      out << "  n" << v << " [label=\"" << v << ":" << to_string(arch.layers[v].op)
          << "\"];\n";
  }
  for (const auto& [u, v] : edges)
    if (u != v) out << "  n" << u << " -> n" << v << ";\n";
  out << "}\n";
  return out.str();
}

namespace {

Eigen::MatrixXd type_onehot(const ArchGraph& graph, const Architecture& arch) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(graph.num_nodes, kFeatureWidth);
  for (int v = 0; v < graph.num_nodes - 1; ++v)
    x(v, static_cast<int>(arch.layers[v].op)) = 1.0;
  x(graph.global_node(), kNumOpKinds) = 1.0;
  return x;
}

}  // namespace

Eigen::MatrixXd onehot_features(const ArchGraph& graph, const Architecture& arch) {
  return type_onehot(graph, arch);
}

Eigen::MatrixXd latency_features(const ArchGraph& graph, const Architecture& arch,
                                 const Mapping& mapping, const PerfLUT& lut,
                                 const SystemConfig& sys) {
  Eigen::MatrixXd x = type_onehot(graph, arch);
  const TensorShapeTrace trace = trace_shapes(arch);
  for (int v = 0; v < graph.num_nodes - 1; ++v) {
    const auto& layer = arch.layers[v];
    double raw;
    if (layer.op == OpKind::Communicate) {
      raw = static_cast<double>(comm_volume(arch, trace, v)) * 8.0 /
            sys.net.bandwidth_bps;
    } else {
      const Side side = mapping.side_per_layer[v];
      raw = lut.lookup(sys.endpoint(side).name, layer.op,
                       op_shape_at(arch, trace, v))
                .latency_s;
    }
    x(v, kFeatureWidth - 1) = lut.normalize_latency(raw);
  }
  return x;
}

Eigen::MatrixXd energy_features(const ArchGraph& graph, const Architecture& arch,
                                const Mapping& mapping, const PerfLUT& lut,
                                const SystemConfig& sys) {
  Eigen::MatrixXd x = type_onehot(graph, arch);
  const TensorShapeTrace trace = trace_shapes(arch);
  for (int v = 0; v < graph.num_nodes - 1; ++v) {
    const auto& layer = arch.layers[v];
    double raw;
    if (layer.op == OpKind::Communicate) {
      const double t = static_cast<double>(comm_volume(arch, trace, v)) * 8.0 /
                       sys.net.bandwidth_bps;
      raw = sys.device.comm_power_w * t;
    } else {
      const Side side = mapping.side_per_layer[v];
      const auto v_lut = lut.lookup(sys.endpoint(side).name, layer.op,
                                    op_shape_at(arch, trace, v));
      raw = side == Side::Device
                ? v_lut.energy_j
                : sys.device.idle_power_w * v_lut.latency_s;
    }
    x(v, kFeatureWidth - 1) = lut.normalize_energy(raw);
  }
  return x;
}

}  // namespace coforge
