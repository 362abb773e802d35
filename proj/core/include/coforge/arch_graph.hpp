#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "coforge/design_space.hpp"
#include "coforge/system_profile.hpp"

namespace coforge {

/// One-hot slots: the six OpKinds plus a seventh for the global node,
/// then one z-scored performance scalar.
inline constexpr int kNumNodeTypes = kNumOpKinds + 1;
inline constexpr int kFeatureWidth = kNumNodeTypes + 1;

/// Architecture abstracted as a DAG: one node per layer in order, plus a
/// global node (last index) linked to every other node in both directions,
/// self-loops everywhere, chain edges along the dataflow.
struct ArchGraph {
  int num_nodes = 0;                       // layers + 1, global node last
  std::vector<std::pair<int, int>> edges;  // directed (src, dst)

  int global_node() const { return num_nodes - 1; }

  /// Row-normalized in-neighbor matrix: A(v,u) = 1/indeg(v) per edge u->v.
  Eigen::MatrixXd mean_adjacency() const;

  /// Dense adjacency, A(u,v) = 1 for edge u->v.
  Eigen::MatrixXd adjacency() const;

  std::string to_dot(const Architecture& arch) const;
};

ArchGraph build_graph(const Architecture& arch);

/// One-hot type features only; perf slot left at zero. Ablation baseline.
Eigen::MatrixXd onehot_features(const ArchGraph& graph, const Architecture& arch);

/// One-hot plus z-scored LUT latency of each op on its mapped endpoint;
/// Communicate nodes carry the z-scored raw transfer time.
Eigen::MatrixXd latency_features(const ArchGraph& graph, const Architecture& arch,
                                 const Mapping& mapping, const PerfLUT& lut,
                                 const SystemConfig& sys);

/// One-hot plus z-scored device energy: LUT energy for device-side ops,
/// device idle power times edge execution time for edge-side ops, device
/// comm power times transfer time for Communicate nodes.
Eigen::MatrixXd energy_features(const ArchGraph& graph, const Architecture& arch,
                                const Mapping& mapping, const PerfLUT& lut,
                                const SystemConfig& sys);

}  // namespace coforge
