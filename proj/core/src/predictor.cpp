#include "coforge/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "coforge/util.hpp"

namespace coforge {

namespace {

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& z) {
  return (z.array() > 0.0).cast<double>().matrix();
}

// Stacked-graph minibatch: node rows of all graphs concatenated so the MLP
// applications become single GEMMs; aggregation stays per-graph.
struct Batch {
  Eigen::MatrixXd x;
  std::vector<int> offset;  // size graphs+1
  std::vector<const Eigen::MatrixXd*> amean;
  Eigen::VectorXd label;

  int graphs() const { return static_cast<int>(amean.size()); }
  int rows(int g) const { return offset[g + 1] - offset[g]; }
};

Batch make_batch(const std::vector<TrainExample>& examples,
                 const std::vector<int>& idx, size_t begin, size_t end) {
  Batch b;
  b.offset.push_back(0);
  int total = 0;
  for (size_t i = begin; i < end; ++i) {
    total += static_cast<int>(examples[idx[i]].sample.x.rows());
    b.offset.push_back(total);
  }
  const int in_dim = static_cast<int>(examples[idx[begin]].sample.x.cols());
  b.x.resize(total, in_dim);
  b.label.resize(end - begin);
  for (size_t i = begin; i < end; ++i) {
    const auto& ex = examples[idx[i]];
    const int g = static_cast<int>(i - begin);
    b.x.middleRows(b.offset[g], b.rows(g)) = ex.sample.x;
    b.amean.push_back(&ex.sample.amean);
    b.label(g) = ex.label;
  }
  return b;
}

struct ForwardCache {
  std::array<Eigen::MatrixXd, 3> m, z1, a1, z2;
  std::array<Eigen::MatrixXd, 4> h;  // h[0] = input features
  Eigen::MatrixXd readout;           // graphs x hidden
  Eigen::MatrixXd zh1, ah1;
  Eigen::VectorXd u;
  Eigen::VectorXd yhat;
};

void forward_batch(const PredictorModel& model, const Batch& batch,
                   ForwardCache& cache) {
  cache.h[0] = batch.x;
  for (int l = 0; l < 3; ++l) {
    const auto& p = model.gin[l];
    const Eigen::MatrixXd& h = cache.h[l];
    Eigen::MatrixXd& m = cache.m[l];
    m.resize(h.rows(), h.cols());
    for (int g = 0; g < batch.graphs(); ++g) {
      auto hg = h.middleRows(batch.offset[g], batch.rows(g));
      m.middleRows(batch.offset[g], batch.rows(g)) =
          (1.0 + model.epsilon[l]) * hg + (*batch.amean[g]) * hg;
    }
    cache.z1[l] = (m * p.w1).rowwise() + p.b1.transpose();
    cache.a1[l] = relu(cache.z1[l]);
    cache.z2[l] = (cache.a1[l] * p.w2).rowwise() + p.b2.transpose();
    cache.h[l + 1] = relu(cache.z2[l]);
  }
  cache.readout.resize(batch.graphs(), model.hidden);
  for (int g = 0; g < batch.graphs(); ++g)
    cache.readout.row(g) =
        cache.h[3].middleRows(batch.offset[g], batch.rows(g)).colwise().sum();
  cache.zh1 = (cache.readout * model.head.w1).rowwise() + model.head.b1.transpose();
  cache.ah1 = relu(cache.zh1);
  cache.u = cache.ah1 * model.head.w2 + Eigen::VectorXd::Constant(
                                            batch.graphs(), model.head.b2(0));
  cache.yhat.resize(batch.graphs());
  // Positive output that inverts the log-space conditioning: u estimates
  // log(y / out_scale), so exp keeps MAPE gradients scale-free across the
  // label range. Clamp guards against overflow early in training.
  for (int g = 0; g < batch.graphs(); ++g)
    cache.yhat(g) =
        model.out_scale * std::exp(std::clamp(cache.u(g), -30.0, 30.0));
}

struct Grads {
  std::array<MLPParams, 3> gin;
  MLPParams head;
};

Grads zero_like(const PredictorModel& model) {
  Grads g;
  auto z = [](const MLPParams& p) {
    MLPParams q;
    q.w1 = Eigen::MatrixXd::Zero(p.w1.rows(), p.w1.cols());
    q.w2 = Eigen::MatrixXd::Zero(p.w2.rows(), p.w2.cols());
    q.b1 = Eigen::VectorXd::Zero(p.b1.size());
    q.b2 = Eigen::VectorXd::Zero(p.b2.size());
    return q;
  };
  for (int l = 0; l < 3; ++l) g.gin[l] = z(model.gin[l]);
  g.head = z(model.head);
  return g;
}

/// MAPE over the batch plus gradients. Returns the mean loss.
double backward_batch(const PredictorModel& model, const Batch& batch,
                      const ForwardCache& cache, Grads& grads) {
  const int n = batch.graphs();
  double loss = 0;
  Eigen::VectorXd du(n);
  for (int g = 0; g < n; ++g) {
    const double y = batch.label(g);
    const double diff = cache.yhat(g) - y;
    loss += std::abs(diff) / y;
    const double dl_dy = (diff >= 0 ? 1.0 : -1.0) / (y * n);
    // Straight-through at the clamp: zeroing the gradient there would leave
    // a model that dives below u = -30 (where MAPE saturates at 1) dead for
    // the rest of training; the surrogate lets Adam pull it back.
    du(g) = dl_dy * cache.yhat(g);
  }
  loss /= n;

  grads.head.b2(0) += du.sum();
  grads.head.w2 += cache.ah1.transpose() * du;
  Eigen::MatrixXd dah1 = du * model.head.w2.transpose();
  Eigen::MatrixXd dzh1 = dah1.cwiseProduct(relu_mask(cache.zh1));
  grads.head.w1 += cache.readout.transpose() * dzh1;
  grads.head.b1 += dzh1.colwise().sum().transpose();
  Eigen::MatrixXd dreadout = dzh1 * model.head.w1.transpose();

  Eigen::MatrixXd dh(cache.h[3].rows(), cache.h[3].cols());
  for (int g = 0; g < n; ++g)
    dh.middleRows(batch.offset[g], batch.rows(g)) =
        dreadout.row(g).replicate(batch.rows(g), 1);

  for (int l = 2; l >= 0; --l) {
    const auto& p = model.gin[l];
    Eigen::MatrixXd dz2 = dh.cwiseProduct(relu_mask(cache.z2[l]));
    grads.gin[l].w2 += cache.a1[l].transpose() * dz2;
    grads.gin[l].b2 += dz2.colwise().sum().transpose();
    Eigen::MatrixXd da1 = dz2 * p.w2.transpose();
    Eigen::MatrixXd dz1 = da1.cwiseProduct(relu_mask(cache.z1[l]));
    grads.gin[l].w1 += cache.m[l].transpose() * dz1;
    grads.gin[l].b1 += dz1.colwise().sum().transpose();
    if (l == 0) break;
    Eigen::MatrixXd dm = dz1 * p.w1.transpose();
    dh.resize(dm.rows(), dm.cols());
    for (int g = 0; g < n; ++g) {
      auto dmg = dm.middleRows(batch.offset[g], batch.rows(g));
      dh.middleRows(batch.offset[g], batch.rows(g)) =
          (1.0 + model.epsilon[l]) * dmg + batch.amean[g]->transpose() * dmg;
    }
  }
  return loss;
}

}  // namespace

PredictorModel PredictorModel::init(int in_dim, int hidden, uint64_t seed) {
  PredictorModel model;
  model.in_dim = in_dim;
  model.hidden = hidden;
  model.train_seed = seed;
  std::mt19937_64 rng(seed);
  auto glorot = [&rng](Eigen::MatrixXd& w, int fan_in, int fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    w.resize(fan_in, fan_out);
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
  };
  for (int l = 0; l < 3; ++l) {
    const int d_in = l == 0 ? in_dim : hidden;
    glorot(model.gin[l].w1, d_in, hidden);
    model.gin[l].b1 = Eigen::VectorXd::Zero(hidden);
    glorot(model.gin[l].w2, hidden, hidden);
    model.gin[l].b2 = Eigen::VectorXd::Zero(hidden);
  }
  glorot(model.head.w1, hidden, hidden);
  model.head.b1 = Eigen::VectorXd::Zero(hidden);
  glorot(model.head.w2, hidden, 1);
  model.head.b2 = Eigen::VectorXd::Zero(1);
  return model;
}

std::vector<TrainExample> prepare_examples(const std::vector<LabeledArch>& records,
                                           const std::string& metric,
                                           FeatureKind kind, const PerfLUT& lut,
                                           const SystemConfig& sys) {
  std::vector<TrainExample> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    TrainExample ex;
    const ArchGraph graph = build_graph(rec.arch);
    const Mapping mapping = derive_mapping(rec.arch);
    if (kind == FeatureKind::OneHotOnly)
      ex.sample.x = onehot_features(graph, rec.arch);
    else if (metric == "energy")
      ex.sample.x = energy_features(graph, rec.arch, mapping, lut, sys);
    else
      ex.sample.x = latency_features(graph, rec.arch, mapping, lut, sys);
    ex.sample.amean = graph.mean_adjacency();
    ex.label = metric == "energy" ? rec.energy_j : rec.latency_s;
    if (ex.label <= 0) throw ConfigError("non-positive label in dataset");
    out.push_back(std::move(ex));
  }
  return out;
}

double forward(const PredictorModel& model, const GraphSample& sample) {
  if (sample.x.cols() != model.in_dim)
    throw PreconditionError("feature width does not match model input width");
  std::vector<TrainExample> one{{sample, 1.0}};
  std::vector<int> idx{0};
  const Batch batch = make_batch(one, idx, 0, 1);
  ForwardCache cache;
  forward_batch(model, batch, cache);
  return cache.yhat(0);
}

PredictorModel train(const std::vector<TrainExample>& train_set,
                     const std::vector<TrainExample>& val_set,
                     const Hyperparams& hp, const std::string& metric,
                     TrainReport* report) {
  if (train_set.empty()) throw ConfigError("empty training set");
  const int in_dim = static_cast<int>(train_set.front().sample.x.cols());
  PredictorModel model = PredictorModel::init(in_dim, hp.hidden, hp.seed);
  model.metric = metric;

  double log_sum = 0;
  for (const auto& ex : train_set) {
    if (ex.label <= 0) throw ConfigError("training label must be > 0");
    log_sum += std::log(ex.label);
  }
  model.out_scale = std::exp(log_sum / train_set.size());

  Grads m_state = zero_like(model);
  Grads v_state = zero_like(model);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  long step = 0;

  std::vector<int> idx(train_set.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::mt19937_64 shuffle_rng(sub_seed(hp.seed, "train-shuffle"));

  double epoch_mape = 0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), shuffle_rng);
    double loss_sum = 0;
    int batches = 0;
    for (size_t begin = 0; begin < idx.size(); begin += hp.batch_size) {
      const size_t end = std::min(begin + hp.batch_size, idx.size());
      const Batch batch = make_batch(train_set, idx, begin, end);
      ForwardCache cache;
      forward_batch(model, batch, cache);
      Grads grads = zero_like(model);
      const double loss = backward_batch(model, batch, cache, grads);
      if (!std::isfinite(loss))
        throw std::runtime_error("non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(batches));
      loss_sum += loss;
      ++batches;
      ++step;
      // Global-norm gradient clipping. MAPE punishes over-prediction without
      // bound, so one bad batch early in training can shove the model into
      // the degenerate all-under-predict basin where the loss saturates at 1;
      // capping the step keeps that shove survivable.
      constexpr double kClipNorm = 5.0;
      double sq_sum = 0;
      auto accum = [&sq_sum](const auto& g) { sq_sum += g.squaredNorm(); };
      auto accum_mlp = [&](const MLPParams& g) {
        accum(g.w1);
        accum(g.b1);
        accum(g.w2);
        accum(g.b2);
      };
      for (int l = 0; l < 3; ++l) accum_mlp(grads.gin[l]);
      accum_mlp(grads.head);
      const double gnorm = std::sqrt(sq_sum);
      if (gnorm > kClipNorm) {
        const double scale = kClipNorm / gnorm;
        auto shrink = [scale](auto& g) { g *= scale; };
        auto shrink_mlp = [&](MLPParams& g) {
          shrink(g.w1);
          shrink(g.b1);
          shrink(g.w2);
          shrink(g.b2);
        };
        for (int l = 0; l < 3; ++l) shrink_mlp(grads.gin[l]);
        shrink_mlp(grads.head);
      }
      // Warmup over the first epochs, then step decay: x0.3 at 60% and x0.09
      // at 85% of the epoch budget, so the tail of training polishes instead
      // of bouncing around the optimum.
      double lr = hp.learning_rate;
      const int warmup_epochs = std::max(1, hp.epochs / 20);
      if (epoch < warmup_epochs)
        lr *= static_cast<double>(epoch + 1) / (warmup_epochs + 1);
      if (epoch >= (hp.epochs * 85) / 100)
        lr *= 0.09;
      else if (epoch >= (hp.epochs * 60) / 100)
        lr *= 0.3;
      const double corr = lr * std::sqrt(1.0 - std::pow(kBeta2, step)) /
                          (1.0 - std::pow(kBeta1, step));
      auto adam = [&](auto& p, auto& g, auto& m, auto& v) {
        m = kBeta1 * m + (1.0 - kBeta1) * g;
        v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
        p.array() -= corr * m.array() / (v.array().sqrt() + kEps);
      };
      auto upd = [&](MLPParams& p, MLPParams& g, MLPParams& m, MLPParams& v) {
        adam(p.w1, g.w1, m.w1, v.w1);
        adam(p.b1, g.b1, m.b1, v.b1);
        adam(p.w2, g.w2, m.w2, v.w2);
        adam(p.b2, g.b2, m.b2, v.b2);
      };
      for (int l = 0; l < 3; ++l)
        upd(model.gin[l], grads.gin[l], m_state.gin[l], v_state.gin[l]);
      upd(model.head, grads.head, m_state.head, v_state.head);
    }
    epoch_mape = loss_sum / batches;
  }
  model.trained_epochs = hp.epochs;

  if (report) {
    *report = evaluate(model, val_set);
    report->train_mape = epoch_mape;
  }
  return model;
}

TrainReport evaluate(const PredictorModel& model,
                     const std::vector<TrainExample>& val_set,
                     uint64_t pair_seed) {
  TrainReport rep;
  if (val_set.empty()) return rep;
  std::vector<double> pred(val_set.size());
  double mape = 0;
  int in10 = 0, in20 = 0;
  for (size_t i = 0; i < val_set.size(); ++i) {
    pred[i] = forward(model, val_set[i].sample);
    const double rel = std::abs(pred[i] - val_set[i].label) / val_set[i].label;
    mape += rel;
    if (rel <= 0.10) ++in10;
    if (rel <= 0.20) ++in20;
  }
  rep.val_mape = mape / val_set.size();
  rep.within_10 = static_cast<double>(in10) / val_set.size();
  rep.within_20 = static_cast<double>(in20) / val_set.size();

  std::mt19937_64 rng(pair_seed);
  std::uniform_int_distribution<size_t> dist(0, val_set.size() - 1);
  int agree = 0, counted = 0;
  for (int p = 0; p < kRankingPairs; ++p) {
    const size_t i = dist(rng), j = dist(rng);
    if (i == j || val_set[i].label == val_set[j].label) continue;
    const bool truth = val_set[i].label < val_set[j].label;
    const bool guess = pred[i] < pred[j];
    if (truth == guess) ++agree;
    ++counted;
  }
  rep.ranking_accuracy = counted ? static_cast<double>(agree) / counted : 0.0;
  return rep;
}

double gradient_check(const PredictorModel& model, const TrainExample& example,
                      double fd_step) {
  std::vector<TrainExample> one{example};
  std::vector<int> idx{0};
  const Batch batch = make_batch(one, idx, 0, 1);

  auto loss_of = [&](const PredictorModel& m) {
    ForwardCache cache;
    forward_batch(m, batch, cache);
    return std::abs(cache.yhat(0) - example.label) / example.label;
  };

  ForwardCache cache;
  forward_batch(model, batch, cache);
  Grads grads = zero_like(model);
  backward_batch(model, batch, cache, grads);

  PredictorModel probe = model;
  double max_rel = 0;
  auto check_block = [&](Eigen::MatrixXd& p, const Eigen::MatrixXd& g) {
    for (int i = 0; i < p.rows(); ++i)
      for (int j = 0; j < p.cols(); ++j) {
        const double saved = p(i, j);
        p(i, j) = saved + fd_step;
        const double lp = loss_of(probe);
        p(i, j) = saved - fd_step;
        const double lm = loss_of(probe);
        p(i, j) = saved;
        const double numeric = (lp - lm) / (2 * fd_step);
        const double analytic = g(i, j);
        // Gradients below ~1e-6 with an O(1) loss are beneath central-difference
        // resolution in double precision; bound them absolutely instead.
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        max_rel = std::max(max_rel, std::abs(numeric - analytic) / denom);
      }
  };
  auto check_vec = [&](Eigen::VectorXd& p, const Eigen::VectorXd& g) {
    for (int i = 0; i < p.size(); ++i) {
      const double saved = p(i);
      p(i) = saved + fd_step;
      const double lp = loss_of(probe);
      p(i) = saved - fd_step;
      const double lm = loss_of(probe);
      p(i) = saved;
      const double numeric = (lp - lm) / (2 * fd_step);
      const double analytic = g(i);
      // See check_block: sub-resolution gradients are bounded absolutely.
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      max_rel = std::max(max_rel, std::abs(numeric - analytic) / denom);
    }
  };
  for (int l = 0; l < 3; ++l) {
    check_block(probe.gin[l].w1, grads.gin[l].w1);
    check_vec(probe.gin[l].b1, grads.gin[l].b1);
    check_block(probe.gin[l].w2, grads.gin[l].w2);
    check_vec(probe.gin[l].b2, grads.gin[l].b2);
  }
  check_block(probe.head.w1, grads.head.w1);
  check_vec(probe.head.b1, grads.head.b1);
  check_block(probe.head.w2, grads.head.w2);
  check_vec(probe.head.b2, grads.head.b2);
  return max_rel;
}

double predict_corrected(const PredictorModel& model, const Architecture& arch,
                         const SystemConfig& sys, const PerfLUT& lut) {
  const bool latency = model.metric == "latency";
  const ArchGraph graph = build_graph(arch);
  const Mapping mapping = derive_mapping(arch);
  GraphSample sample;
  sample.x = latency ? latency_features(graph, arch, mapping, lut, sys)
                     : energy_features(graph, arch, mapping, lut, sys);
  sample.amean = graph.mean_adjacency();
  const double floor = latency ? lut_estimate(arch, sys, lut)
                               : lut_energy_estimate(arch, sys, lut);
  return std::max(forward(model, sample), floor);
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows ? static_cast<int>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  return m;
}

nlohmann::json mlp_json(const MLPParams& p) {
  return {{"w1", matrix_json(p.w1)},
          {"b1", matrix_json(p.b1)},
          {"w2", matrix_json(p.w2)},
          {"b2", matrix_json(p.b2)}};
}

MLPParams mlp_from_json(const nlohmann::json& j) {
  MLPParams p;
  p.w1 = matrix_from_json(j.at("w1"));
  p.b1 = matrix_from_json(j.at("b1"));
  p.w2 = matrix_from_json(j.at("w2"));
  p.b2 = matrix_from_json(j.at("b2"));
  return p;
}

}  // namespace

void PredictorModel::save(const std::string& path) const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["in_dim"] = in_dim;
  j["hidden"] = hidden;
  j["metric"] = metric;
  j["out_scale"] = out_scale;
  j["epsilon"] = epsilon;
  for (int l = 0; l < 3; ++l) j["gin"].push_back(mlp_json(gin[l]));
  j["head"] = mlp_json(head);
  j["trained_epochs"] = trained_epochs;
  j["train_seed"] = train_seed;
  j["dataset_fingerprint"] = dataset_fingerprint;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open model file for writing: " + path);
  out << j.dump();
}

PredictorModel PredictorModel::load(const std::string& path, int expect_in_dim) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file: " + path);
  nlohmann::json j;
  in >> j;
  PredictorModel model;
  model.in_dim = j.at("in_dim").get<int>();
  if (model.in_dim != expect_in_dim)
    throw ConfigError("model feature width " + std::to_string(model.in_dim) +
                      " does not match expected " + std::to_string(expect_in_dim));
  model.hidden = j.at("hidden").get<int>();
  model.metric = j.at("metric").get<std::string>();
  model.out_scale = j.at("out_scale").get<double>();
  const auto eps = j.at("epsilon").get<std::vector<double>>();
  std::copy(eps.begin(), eps.end(), model.epsilon.begin());
  for (int l = 0; l < 3; ++l) model.gin[l] = mlp_from_json(j.at("gin")[l]);
  model.head = mlp_from_json(j.at("head"));
  model.trained_epochs = j.value("trained_epochs", 0);
  model.train_seed = j.value("train_seed", 0ull);
  model.dataset_fingerprint = j.value("dataset_fingerprint", 0ull);
  return model;
}

}  // namespace coforge
