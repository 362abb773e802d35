#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "coforge/design_space.hpp"

namespace coforge::runtime {

/// Everything a batch carries between layers (and, when split, across the
/// link): features, the active KNN graph, and the pending skip tensor.
struct ExecState {
  Eigen::MatrixXf x;  // num_nodes x feature_dim
  Eigen::Matrix<uint32_t, Eigen::Dynamic, Eigen::Dynamic> neighbors;  // N x k
  bool has_graph = false;
  Eigen::MatrixXf skip;  // most recent Combine's input
  bool has_skip = false;
};

struct KernelOptions {
  uint64_t weight_seed = 0;     // shared by both endpoints for identical weights
  bool identity_weights = false;  // square Combine weights become identity
};

/// Brute-force exact KNN over the rows of x: k smallest squared distances,
/// self excluded, ties broken by lower index.
Eigen::Matrix<uint32_t, Eigen::Dynamic, Eigen::Dynamic> knn(
    const Eigen::MatrixXf& x, int k);

/// Executes one layer in place. Communicate is a no-op here; transport is the
/// caller's job. Throws PreconditionError on shape/state mismatches.
void run_layer(ExecState& state, const Layer& layer, size_t layer_idx,
               const KernelOptions& opt);

void run_segment(ExecState& state, const Architecture& arch, size_t begin,
                 size_t end, const KernelOptions& opt);

/// Seeded synthetic batch input, uniform in [0,1).
Eigen::MatrixXf make_batch_input(int num_nodes, int dim, uint64_t seed);

// TENSOR payload: x plus the skip tensor when one is pending.
std::vector<uint8_t> pack_state(const ExecState& state);
void unpack_state(const std::vector<uint8_t>& payload, ExecState& state);

// GRAPH payload: (node, neighbor) u32 pairs, row-major.
std::vector<uint8_t> pack_graph(
    const Eigen::Matrix<uint32_t, Eigen::Dynamic, Eigen::Dynamic>& neighbors);
Eigen::Matrix<uint32_t, Eigen::Dynamic, Eigen::Dynamic> unpack_graph(
    const std::vector<uint8_t>& payload);

}  // namespace coforge::runtime
