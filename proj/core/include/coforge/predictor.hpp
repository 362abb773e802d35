#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "coforge/arch_graph.hpp"
#include "coforge/cosim.hpp"

namespace coforge {

/// Two-layer MLP block, x -> relu(x W1 + b1) -> (.. W2 + b2).
struct MLPParams {
  Eigen::MatrixXd w1, w2;
  Eigen::VectorXd b1, b2;
};

/// Three GIN layers (mean aggregation, fixed epsilon 0) with ReLU MLPs,
/// global sum pooling readout, positive scalar head. The output is
/// out_scale * exp(u), i.e. u estimates the log-transformed label relative to
/// out_scale, the geometric mean of the training labels.
struct PredictorModel {
  int in_dim = kFeatureWidth;
  int hidden = 64;
  std::array<MLPParams, 3> gin;
  std::array<double, 3> epsilon{0.0, 0.0, 0.0};
  MLPParams head;  // hidden -> hidden -> 1
  std::string metric = "latency";  // or "energy"
  double out_scale = 1.0;

  int trained_epochs = 0;
  uint64_t train_seed = 0;
  uint64_t dataset_fingerprint = 0;

  static PredictorModel init(int in_dim, int hidden, uint64_t seed);

  void save(const std::string& path) const;
  /// Refuses to load across incompatible feature widths.
  static PredictorModel load(const std::string& path, int expect_in_dim = kFeatureWidth);
};

struct GraphSample {
  Eigen::MatrixXd x;      // num_nodes x in_dim
  Eigen::MatrixXd amean;  // row-normalized in-neighbor matrix
};

struct TrainExample {
  GraphSample sample;
  double label = 0;
};

enum class FeatureKind { Enhanced, OneHotOnly };

/// Builds predictor inputs from labeled architectures. metric selects the
/// label column and, for Enhanced features, the feature builder.
std::vector<TrainExample> prepare_examples(const std::vector<LabeledArch>& records,
                                           const std::string& metric,
                                           FeatureKind kind, const PerfLUT& lut,
                                           const SystemConfig& sys);

double forward(const PredictorModel& model, const GraphSample& sample);

struct Hyperparams {
  int epochs = 500;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int hidden = 64;
  uint64_t seed = 0;
};

struct TrainReport {
  double train_mape = 0;
  double val_mape = 0;
  double within_10 = 0;
  double within_20 = 0;
  double ranking_accuracy = 0;
};

inline constexpr uint64_t kRankingPairSeed = 0x5eedfeedULL;
inline constexpr int kRankingPairs = 10000;

/// Adam on MAPE loss with a hand-derived backward pass. Deterministic under
/// (seed, dataset, hyperparams). Throws on non-finite loss.
PredictorModel train(const std::vector<TrainExample>& train_set,
                     const std::vector<TrainExample>& val_set,
                     const Hyperparams& hp, const std::string& metric,
                     TrainReport* report = nullptr);

TrainReport evaluate(const PredictorModel& model,
                     const std::vector<TrainExample>& val_set,
                     uint64_t pair_seed = kRankingPairSeed);

/// Max relative error of analytic gradients vs central finite differences
/// over every parameter.
double gradient_check(const PredictorModel& model, const TrainExample& example,
                      double fd_step = 1e-6);

/// Prediction clamped from below by the matching LUT estimate (latency or
/// energy, per the model's metric).
double predict_corrected(const PredictorModel& model, const Architecture& arch,
                         const SystemConfig& sys, const PerfLUT& lut);

}  // namespace coforge
