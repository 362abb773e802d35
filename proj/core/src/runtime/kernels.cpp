#include "coforge/runtime/kernels.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "coforge/runtime/protocol.hpp"
#include "coforge/util.hpp"

namespace coforge::runtime {

Eigen::Matrix<uint32_t, Eigen::Dynamic, Eigen::Dynamic> knn(
    const Eigen::MatrixXf& x, int k) {
  const int n = static_cast<int>(x.rows());
  if (k < 1 || k >= n)
    throw PreconditionError("knn needs 1 <= k < num points");
  Eigen::Matrix<uint32_t, Eigen::Dynamic, Eigen::Dynamic> out(n, k);
  const Eigen::VectorXf sq = x.rowwise().squaredNorm();
  std::vector<int> order(n);
  Eigen::VectorXf dist(n);
  for (int i = 0; i < n; ++i) {
    // ||a-b||^2 = ||a||^2 - 2 a.b + ||b||^2; constant ||a||^2 dropped since
    // only the ordering matters.
    dist = sq - 2.0f * (x * x.row(i).transpose());
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k + 1, order.end(),
                      [&](int a, int b) {
                        if (dist(a) != dist(b)) return dist(a) < dist(b);
                        return a < b;
                      });
    int col = 0;
    for (int j = 0; j <= k && col < k; ++j)
      if (order[j] != i) out(i, col++) = static_cast<uint32_t>(order[j]);
  }
  return out;
}

namespace {

Eigen::MatrixXf combine_weight(int f_in, int f_out, size_t layer_idx,
                               const KernelOptions& opt) {
  if (opt.identity_weights && f_in == f_out)
    return Eigen::MatrixXf::Identity(f_in, f_out);
  std::mt19937_64 rng(
      sub_seed(opt.weight_seed, "combine-" + std::to_string(layer_idx)));
  std::normal_distribution<float> dist(0.0f, 1.0f / std::sqrt(float(f_in)));
  Eigen::MatrixXf w(f_in, f_out);
  for (int i = 0; i < f_in; ++i)
    for (int j = 0; j < f_out; ++j) w(i, j) = dist(rng);
  return w;
}

}  // namespace

void run_layer(ExecState& state, const Layer& layer, size_t layer_idx,
               const KernelOptions& opt) {
  switch (layer.op) {
    case OpKind::Sample: {
      state.neighbors = knn(state.x, layer.fn.k);
      state.has_graph = true;
      break;
    }
    case OpKind::Aggregate: {
      if (!state.has_graph)
        throw PreconditionError("aggregate without an active graph");
      const int n = static_cast<int>(state.x.rows());
      const int f = static_cast<int>(state.x.cols());
      const int k = static_cast<int>(state.neighbors.cols());
      Eigen::MatrixXf out(n, f);
      for (int i = 0; i < n; ++i) {
        Eigen::RowVectorXf acc;
        switch (layer.fn.aggr) {
          case AggrKind::Max:
            acc = state.x.row(static_cast<int>(state.neighbors(i, 0)));
            for (int j = 1; j < k; ++j)
              acc = acc.cwiseMax(
                  state.x.row(static_cast<int>(state.neighbors(i, j))));
            break;
          case AggrKind::Mean:
          case AggrKind::Sum:
            acc = Eigen::RowVectorXf::Zero(f);
            for (int j = 0; j < k; ++j)
              acc += state.x.row(static_cast<int>(state.neighbors(i, j)));
            if (layer.fn.aggr == AggrKind::Mean) acc /= static_cast<float>(k);
            break;
        }
        out.row(i) = acc;
      }
      state.x = std::move(out);
      break;
    }
    case OpKind::Combine: {
      const int f_in = static_cast<int>(state.x.cols());
      state.skip = state.x;
      state.has_skip = true;
      state.x = state.x * combine_weight(f_in, layer.fn.out_dim, layer_idx, opt);
      break;
    }
    case OpKind::GlobalPooling: {
      Eigen::MatrixXf pooled(1, state.x.cols());
      pooled.row(0) = state.x.colwise().maxCoeff();
      state.x = std::move(pooled);
      state.has_graph = false;
      state.neighbors.resize(0, 0);
      break;
    }
    case OpKind::Connect: {
      if (!state.has_skip)
        throw PreconditionError("connect without a recorded combine input");
      if (state.skip.rows() != state.x.rows())
        throw PreconditionError("connect with mismatched node counts");
      Eigen::MatrixXf joined(state.x.rows(), state.x.cols() + state.skip.cols());
      joined << state.x, state.skip;
      state.x = std::move(joined);
      break;
    }
    case OpKind::Communicate:
      break;
  }
}

void run_segment(ExecState& state, const Architecture& arch, size_t begin,
                 size_t end, const KernelOptions& opt) {
  for (size_t i = begin; i < end; ++i)
    run_layer(state, arch.layers[i], i, opt);
}

Eigen::MatrixXf make_batch_input(int num_nodes, int dim, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  Eigen::MatrixXf x(num_nodes, dim);
  for (int i = 0; i < num_nodes; ++i)
    for (int j = 0; j < dim; ++j) x(i, j) = dist(rng);
  return x;
}

namespace {

void pack_matrix(std::vector<uint8_t>& out, const Eigen::MatrixXf& m) {
  put_u32(out, static_cast<uint32_t>(m.rows()));
  put_u32(out, static_cast<uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f32(out, m(i, j));
}

Eigen::MatrixXf unpack_matrix(const std::vector<uint8_t>& payload, size_t& pos) {
  if (pos + 8 > payload.size()) throw ProtocolError("tensor payload too short");
  const uint32_t rows = get_u32(payload.data() + pos);
  const uint32_t cols = get_u32(payload.data() + pos + 4);
  pos += 8;
  if (pos + size_t(rows) * cols * 4 > payload.size())
    throw ProtocolError("tensor payload too short");
  Eigen::MatrixXf m(rows, cols);
  for (uint32_t i = 0; i < rows; ++i)
    for (uint32_t j = 0; j < cols; ++j) {
      m(i, j) = get_f32(payload.data() + pos);
      pos += 4;
    }
  return m;
}

}  // namespace

std::vector<uint8_t> pack_state(const ExecState& state) {
  std::vector<uint8_t> out;
  out.push_back(state.has_skip ? 1 : 0);
  pack_matrix(out, state.x);
  if (state.has_skip) pack_matrix(out, state.skip);
  return out;
}

void unpack_state(const std::vector<uint8_t>& payload, ExecState& state) {
  if (payload.empty()) throw ProtocolError("empty tensor payload");
  size_t pos = 1;
  state.x = unpack_matrix(payload, pos);
  state.has_skip = payload[0] != 0;
  if (state.has_skip)
    state.skip = unpack_matrix(payload, pos);
  else
    state.skip.resize(0, 0);
}

std::vector<uint8_t> pack_graph(
    const Eigen::Matrix<uint32_t, Eigen::Dynamic, Eigen::Dynamic>& neighbors) {
  std::vector<uint8_t> out;
  put_u32(out, static_cast<uint32_t>(neighbors.rows()));
  put_u32(out, static_cast<uint32_t>(neighbors.cols()));
  for (Eigen::Index i = 0; i < neighbors.rows(); ++i)
    for (Eigen::Index j = 0; j < neighbors.cols(); ++j) {
      put_u32(out, static_cast<uint32_t>(i));
      put_u32(out, neighbors(i, j));
    }
  return out;
}

Eigen::Matrix<uint32_t, Eigen::Dynamic, Eigen::Dynamic> unpack_graph(
    const std::vector<uint8_t>& payload) {
  if (payload.size() < 8) throw ProtocolError("graph payload too short");
  const uint32_t rows = get_u32(payload.data());
  const uint32_t cols = get_u32(payload.data() + 4);
  if (payload.size() != 8 + size_t(rows) * cols * 8)
    throw ProtocolError("graph payload size mismatch");
  Eigen::Matrix<uint32_t, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols);
  size_t pos = 8;
  for (uint32_t i = 0; i < rows; ++i)
    for (uint32_t j = 0; j < cols; ++j) {
      if (get_u32(payload.data() + pos) != i)
        throw ProtocolError("graph payload node index mismatch");
      m(i, j) = get_u32(payload.data() + pos + 4);
      pos += 8;
    }
  return m;
}

}  // namespace coforge::runtime
