/*
 * Copyright 2026 The Soft Medoid Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "softmedoid/gnn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "softmedoid/estimators.hpp"

namespace softmedoid {
namespace {

struct Neighborhood {
  std::vector<Eigen::Index> nodes;
  Vector weights;
};

// Non-zero entries of row v, restricted to the k largest when k > 0.
Neighborhood Gather(const SparseMatrix& message, Eigen::Index v, Eigen::Index k) {
  std::vector<Eigen::Index> nodes;
  std::vector<double> weights;
  for (SparseMatrix::InnerIterator it(message, v); it; ++it) {
    if (it.value() == 0.0) continue;
    nodes.push_back(it.col());
    weights.push_back(it.value());
  }
  Neighborhood hood;
  const auto size = static_cast<Eigen::Index>(nodes.size());
  if (k > 0 && size > k) {
    const Vector all = Eigen::Map<const Vector>(weights.data(), size);
    const auto keep = TopKIndices(all, k);
    hood.weights.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto src = static_cast<std::size_t>(keep[static_cast<std::size_t>(i)]);
      hood.nodes.push_back(nodes[src]);
      hood.weights[i] = weights[src];
    }
  } else {
    hood.nodes = std::move(nodes);
    hood.weights = Eigen::Map<const Vector>(weights.data(), size);
  }
  return hood;
}

kernel::Normalization NormalizationOf(AggregatorKind kind) {
  return kind == AggregatorKind::kSoftMedoidAlt ? kernel::Normalization::kAlternative
                                                : kernel::Normalization::kWeighted;
}

void CheckMessage(const SparseMatrix& message, const Matrix& z) {
  if (message.rows() != message.cols() || message.cols() != z.rows()) {
    throw std::invalid_argument("message matrix is " + std::to_string(message.rows()) + "x" +
                                std::to_string(message.cols()) + " but there are " +
                                std::to_string(z.rows()) + " node embeddings");
  }
}

double CheckedLoss(double loss, int epoch) {
  if (!std::isfinite(loss)) {
    throw NumericError("training diverged at epoch " + std::to_string(epoch));
  }
  return loss;
}

struct AdamState {
  Matrix m;
  Matrix v;
};

void AdamStep(Matrix& param, const Matrix& grad, AdamState& state, double lr, int step) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  if (state.m.size() == 0) {
    state.m = Matrix::Zero(param.rows(), param.cols());
    state.v = Matrix::Zero(param.rows(), param.cols());
  }
  state.m = kBeta1 * state.m + (1.0 - kBeta1) * grad;
  state.v = kBeta2 * state.v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(kBeta1, step);
  const double c2 = 1.0 - std::pow(kBeta2, step);
  param.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + kEps);
}

std::string MessageSourceName(MessageSource source) {
  return source == MessageSource::kGdc ? "gdc" : "gcn";
}

}  // namespace

std::string AggregatorKindName(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::kWeightedSum: return "weighted_sum";
    case AggregatorKind::kDimwiseMedian: return "dimwise_median";
    case AggregatorKind::kMedoid: return "medoid";
    case AggregatorKind::kSoftMedoid: return "soft_medoid";
    case AggregatorKind::kSoftMedoidAlt: return "soft_medoid_alt";
  }
  return "unknown";
}

AggregatorKind ParseAggregatorKind(const std::string& name) {
  for (AggregatorKind kind :
       {AggregatorKind::kWeightedSum, AggregatorKind::kDimwiseMedian, AggregatorKind::kMedoid,
        AggregatorKind::kSoftMedoid, AggregatorKind::kSoftMedoidAlt}) {
    if (AggregatorKindName(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown aggregator '" + name + "'");
}

void AggregatorConfig::Validate() const {
  if (soft() && !(temperature > 0.0 && std::isfinite(temperature))) {
    throw std::invalid_argument("soft aggregators need a finite temperature > 0");
  }
  if (k < 0) throw std::invalid_argument("top-k must be >= 0");
}

SparseMatrix BuildMessageMatrix(const SparseMatrix& adjacency, const MessageConfig& config) {
  SparseMatrix normalized = GcnNormalize(adjacency);
  if (config.source == MessageSource::kGcn) return normalized;
  return GdcDiffusion(normalized, config.alpha, config.k);
}

ModelConfig ModelConfig::WithAggregator(const AggregatorConfig& aggregator) {
  ModelConfig config;
  config.aggregators = {aggregator, aggregator};
  return config;
}

void GnnModel::Validate() const {
  if (w1.cols() != config.hidden || w2.rows() != config.hidden || w1.rows() < 1 ||
      w2.cols() < 1) {
    throw std::invalid_argument("inconsistent weight shapes: W1 is " +
                                std::to_string(w1.rows()) + "x" + std::to_string(w1.cols()) +
                                ", W2 is " + std::to_string(w2.rows()) + "x" +
                                std::to_string(w2.cols()) + ", hidden " +
                                std::to_string(config.hidden));
  }
  for (const auto& agg : config.aggregators) agg.Validate();
}

GnnModel InitModel(const ModelConfig& config, Eigen::Index input_dim, int num_classes,
                   std::uint64_t seed) {
  if (config.hidden < 1 || input_dim < 1 || num_classes < 1) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  const auto glorot = [](Eigen::Index rows, Eigen::Index cols, Rng rng) {
    const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> unif(-r, r);
    Matrix w(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = unif(rng);
    }
    return w;
  };
  GnnModel model;
  model.config = config;
  model.w1 = glorot(input_dim, config.hidden, StreamRng(seed, 0));
  model.w2 = glorot(config.hidden, num_classes, StreamRng(seed, 1));
  model.Validate();
  return model;
}

Matrix Aggregate(const AggregatorConfig& config, const SparseMatrix& message, const Matrix& z,
                 AggregationCache* cache) {
  CheckMessage(message, z);
  const Eigen::Index n = z.rows();
  if (config.kind == AggregatorKind::kWeightedSum && config.k == 0) {
    return message * z;
  }
  Matrix out = Matrix::Zero(n, z.cols());
  if (cache != nullptr) {
    cache->medoid.assign(config.kind == AggregatorKind::kMedoid ? n : 0, -1);
    cache->dim.assign(config.kind == AggregatorKind::kDimwiseMedian ? n : 0, {});
  }
  for (Eigen::Index v = 0; v < n; ++v) {
    const Neighborhood hood = Gather(message, v, config.k);
    if (hood.nodes.empty()) continue;
    const Matrix local = z(hood.nodes, Eigen::all);
    const double mass = hood.weights.sum();
    switch (config.kind) {
      case AggregatorKind::kWeightedSum:
        out.row(v) = hood.weights.transpose() * local;
        break;
      case AggregatorKind::kMedoid: {
        const Eigen::Index idx =
            kernel::SupportMedoidIndex(kernel::PairwiseDistances(local), hood.weights);
        out.row(v) = mass * local.row(idx);
        if (cache != nullptr) cache->medoid[v] = hood.nodes[idx];
        break;
      }
      case AggregatorKind::kDimwiseMedian: {
        const auto idx = DimensionwiseMedianIndices(PointSet(local), WeightVector(hood.weights));
        std::vector<Eigen::Index> selected(idx.size());
        for (std::size_t j = 0; j < idx.size(); ++j) {
          out(v, static_cast<Eigen::Index>(j)) = mass * local(idx[j], static_cast<Eigen::Index>(j));
          selected[j] = hood.nodes[idx[j]];
        }
        if (cache != nullptr) cache->dim[v] = std::move(selected);
        break;
      }
      case AggregatorKind::kSoftMedoid:
      case AggregatorKind::kSoftMedoidAlt: {
        const Vector coefficients = kernel::SoftMedoidCoefficients(
            kernel::PairwiseDistances(local), hood.weights, config.temperature,
            NormalizationOf(config.kind));
        out.row(v) = coefficients.transpose() * local;
        break;
      }
    }
  }
  return out;
}

void AggregateBackward(const AggregatorConfig& config, const SparseMatrix& message,
                       const Matrix& z, const AggregationCache& cache, const Matrix& upstream,
                       Matrix& grad_z) {
  CheckMessage(message, z);
  const Eigen::Index n = z.rows();
  if (config.kind == AggregatorKind::kWeightedSum && config.k == 0) {
    grad_z.noalias() += message.transpose() * upstream;
    return;
  }
  for (Eigen::Index v = 0; v < n; ++v) {
    const Neighborhood hood = Gather(message, v, config.k);
    if (hood.nodes.empty()) continue;
    const double mass = hood.weights.sum();
    switch (config.kind) {
      case AggregatorKind::kWeightedSum:
        for (std::size_t i = 0; i < hood.nodes.size(); ++i) {
          grad_z.row(hood.nodes[i]) +=
              hood.weights[static_cast<Eigen::Index>(i)] * upstream.row(v);
        }
        break;
      case AggregatorKind::kMedoid:
        grad_z.row(cache.medoid.at(static_cast<std::size_t>(v))) += mass * upstream.row(v);
        break;
      case AggregatorKind::kDimwiseMedian: {
        const auto& selected = cache.dim.at(static_cast<std::size_t>(v));
        for (std::size_t j = 0; j < selected.size(); ++j) {
          const auto col = static_cast<Eigen::Index>(j);
          grad_z(selected[j], col) += mass * upstream(v, col);
        }
        break;
      }
      case AggregatorKind::kSoftMedoid:
      case AggregatorKind::kSoftMedoidAlt: {
        const Matrix local = z(hood.nodes, Eigen::all);
        Matrix grad_local = Matrix::Zero(local.rows(), local.cols());
        kernel::SoftMedoidBackward(local, kernel::PairwiseDistances(local), hood.weights,
                                   config.temperature, NormalizationOf(config.kind),
                                   upstream.row(v).transpose(), grad_local, nullptr);
        for (std::size_t i = 0; i < hood.nodes.size(); ++i) {
          grad_z.row(hood.nodes[i]) += grad_local.row(static_cast<Eigen::Index>(i));
        }
        break;
      }
    }
  }
}

Matrix Forward(const GnnModel& model, const SparseMatrix& message, const Matrix& features,
               ForwardCache* cache) {
  model.Validate();
  if (features.cols() != model.input_dim()) {
    throw std::invalid_argument("features have " + std::to_string(features.cols()) +
                                " columns, model expects " +
                                std::to_string(model.input_dim()));
  }
  ForwardCache local;
  ForwardCache& c = cache != nullptr ? *cache : local;
  c.z1.noalias() = features * model.w1;
  c.p1 = Aggregate(model.config.aggregators[0], message, c.z1, &c.agg1);
  c.h1 = c.p1.cwiseMax(0.0);
  c.z2.noalias() = c.h1 * model.w2;
  return Aggregate(model.config.aggregators[1], message, c.z2, &c.agg2);
}

ModelGradients Backward(const GnnModel& model, const SparseMatrix& message,
                        const Matrix& features, const ForwardCache& cache,
                        const Matrix& logit_grad) {
  Matrix grad_z2 = Matrix::Zero(cache.z2.rows(), cache.z2.cols());
  AggregateBackward(model.config.aggregators[1], message, cache.z2, cache.agg2, logit_grad,
                    grad_z2);
  ModelGradients grads;
  grads.w2.noalias() = cache.h1.transpose() * grad_z2;
  Matrix grad_p1 = grad_z2 * model.w2.transpose();
  grad_p1.array() *= (cache.p1.array() > 0.0).cast<double>();
  Matrix grad_z1 = Matrix::Zero(cache.z1.rows(), cache.z1.cols());
  AggregateBackward(model.config.aggregators[0], message, cache.z1, cache.agg1, grad_p1,
                    grad_z1);
  grads.w1.noalias() = features.transpose() * grad_z1;
  return grads;
}

double CrossEntropy(const Matrix& logits, const std::vector<int>& labels,
                    const std::vector<Eigen::Index>& nodes, Matrix* logit_grad) {
  if (nodes.empty()) throw std::invalid_argument("cross-entropy over an empty node set");
  if (logit_grad != nullptr) *logit_grad = Matrix::Zero(logits.rows(), logits.cols());
  const double scale = 1.0 / static_cast<double>(nodes.size());
  double loss = 0.0;
  for (Eigen::Index v : nodes) {
    const int y = labels.at(static_cast<std::size_t>(v));
    const double top = logits.row(v).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(v).array() - top).exp();
    const double z = e.sum();
    loss += std::log(z) + top - logits(v, y);
    if (logit_grad != nullptr) {
      logit_grad->row(v) = scale * e / z;
      (*logit_grad)(v, y) -= scale;
    }
  }
  return loss * scale;
}

LossResult LossAndGradient(const GnnModel& model, const SparseMatrix& message,
                           const Matrix& features, const std::vector<int>& labels,
                           const std::vector<Eigen::Index>& nodes, double weight_decay) {
  ForwardCache cache;
  const Matrix logits = Forward(model, message, features, &cache);
  Matrix logit_grad;
  LossResult result;
  result.loss = CrossEntropy(logits, labels, nodes, &logit_grad) +
                0.5 * weight_decay * (model.w1.squaredNorm() + model.w2.squaredNorm());
  result.gradients = Backward(model, message, features, cache, logit_grad);
  result.gradients.w1 += weight_decay * model.w1;
  result.gradients.w2 += weight_decay * model.w2;
  return result;
}

std::string OptimizerName(Optimizer optimizer) {
  return optimizer == Optimizer::kAdam ? "adam" : "gd";
}

Optimizer ParseOptimizer(const std::string& name) {
  if (name == "gd") return Optimizer::kGradientDescent;
  if (name == "adam") return Optimizer::kAdam;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

void TrainConfig::Validate() const {
  if (!(lr >= 0.0) || !(weight_decay >= 0.0)) {
    throw std::invalid_argument("lr and weight_decay must be >= 0");
  }
  if (max_epochs < 1 || patience < 1) {
    throw std::invalid_argument("max_epochs and patience must be >= 1");
  }
}

TrainHistory Fit(GnnModel& model, const SparseMatrix& message, const Matrix& features,
                 const std::vector<int>& labels, const SplitAssignment& split,
                 const TrainConfig& config) {
  config.Validate();
  if (split.train.empty() || split.val.empty()) {
    throw std::invalid_argument("training needs non-empty train and validation sets");
  }
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw std::invalid_argument("one label per node required");
  }
  TrainHistory history;
  GnnModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  AdamState adam1;
  AdamState adam2;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    ForwardCache cache;
    const Matrix logits = Forward(model, message, features, &cache);
    Matrix logit_grad;
    const double train_loss = CheckedLoss(
        CrossEntropy(logits, labels, split.train, &logit_grad) +
            0.5 * config.weight_decay * (model.w1.squaredNorm() + model.w2.squaredNorm()),
        epoch);
    const double val_loss = CheckedLoss(CrossEntropy(logits, labels, split.val), epoch);
    history.train_loss.push_back(train_loss);
    history.val_loss.push_back(val_loss);
    history.val_accuracy.push_back(Accuracy(Predict(logits), labels, split.val));
    if (val_loss < best_val) {
      best_val = val_loss;
      best = model;
      history.best_epoch = epoch;
    } else if (epoch - history.best_epoch >= config.patience) {
      break;
    }

    ModelGradients grads = Backward(model, message, features, cache, logit_grad);
    grads.w1 += config.weight_decay * model.w1;
    grads.w2 += config.weight_decay * model.w2;
    if (config.optimizer == Optimizer::kAdam) {
      AdamStep(model.w1, grads.w1, adam1, config.lr, epoch + 1);
      AdamStep(model.w2, grads.w2, adam2, config.lr, epoch + 1);
    } else {
      model.w1 -= config.lr * grads.w1;
      model.w2 -= config.lr * grads.w2;
    }
  }
  model = std::move(best);
  return history;
}

TrainResult Train(const ModelConfig& model_config, const SparseGraph& graph,
                  const SplitAssignment& split, const TrainConfig& config) {
  if (!graph.has_labels()) throw std::invalid_argument("training requires labels");
  TrainResult result;
  result.model = InitModel(model_config, graph.features().cols(), graph.num_classes(),
                           config.seed);
  const SparseMatrix message = BuildMessageMatrix(graph.adjacency(), model_config.message);
  result.history =
      Fit(result.model, message, graph.features(), graph.labels(), split, config);
  return result;
}

std::vector<int> Predict(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index v = 0; v < logits.rows(); ++v) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(v, c) > logits(v, best)) best = c;
    }
    out[static_cast<std::size_t>(v)] = static_cast<int>(best);
  }
  return out;
}

double Accuracy(const std::vector<int>& predictions, const std::vector<int>& labels,
                const std::vector<Eigen::Index>& nodes) {
  if (nodes.empty()) throw std::invalid_argument("accuracy over an empty node set");
  std::size_t hits = 0;
  for (Eigen::Index v : nodes) {
    const auto i = static_cast<std::size_t>(v);
    if (predictions.at(i) == labels.at(i)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(nodes.size());
}

double PredictAccuracy(const GnnModel& model, const SparseMatrix& message,
                       const Matrix& features, const std::vector<int>& labels,
                       const std::vector<Eigen::Index>& nodes) {
  if (nodes.empty()) throw std::invalid_argument("accuracy over an empty node set");
  return Accuracy(Predict(Forward(model, message, features)), labels, nodes);
}

std::uint64_t ModelChecksum(const GnnModel& model) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  const auto feed = [&hash](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      hash ^= p[i];
      hash *= 0x100000001b3ULL;
    }
  };
  for (const Matrix* w : {&model.w1, &model.w2}) {
    const std::int64_t shape[2] = {w->rows(), w->cols()};
    feed(shape, sizeof(shape));
    feed(w->data(), static_cast<std::size_t>(w->size()) * sizeof(double));
  }
  return hash;
}

void SaveCheckpoint(const GnnModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "softmedoid-checkpoint 1\n";
  out << "hidden " << model.config.hidden << "\n";
  out << std::setprecision(17);
  for (std::size_t l = 0; l < model.config.aggregators.size(); ++l) {
    const auto& agg = model.config.aggregators[l];
    out << "layer" << l + 1 << " " << AggregatorKindName(agg.kind) << " " << agg.temperature
        << " " << agg.k << "\n";
  }
  out << "message " << MessageSourceName(model.config.message.source) << " "
      << model.config.message.alpha << " " << model.config.message.k << "\n";
  for (const auto& [name, w] : {std::pair<const char*, const Matrix*>{"W1", &model.w1},
                                {"W2", &model.w2}}) {
    out << name << " " << w->rows() << " " << w->cols() << "\n";
    for (Eigen::Index i = 0; i < w->rows(); ++i) {
      for (Eigen::Index j = 0; j < w->cols(); ++j) out << (j ? " " : "") << (*w)(i, j);
      out << "\n";
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

GnnModel LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const auto fail = [&path](const std::string& what) {
    return std::runtime_error(path.string() + ": " + what);
  };
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "softmedoid-checkpoint" || version != 1) throw fail("not a version 1 checkpoint");
  GnnModel model;
  std::string key;
  in >> key >> model.config.hidden;
  if (key != "hidden") throw fail("expected 'hidden'");
  for (std::size_t l = 0; l < model.config.aggregators.size(); ++l) {
    std::string kind;
    auto& agg = model.config.aggregators[l];
    in >> key >> kind >> agg.temperature >> agg.k;
    if (key != "layer" + std::to_string(l + 1)) throw fail("expected layer line");
    agg.kind = ParseAggregatorKind(kind);
  }
  std::string source;
  in >> key >> source >> model.config.message.alpha >> model.config.message.k;
  if (key != "message" || (source != "gcn" && source != "gdc")) throw fail("bad message line");
  model.config.message.source = source == "gdc" ? MessageSource::kGdc : MessageSource::kGcn;
  for (Matrix* w : {&model.w1, &model.w2}) {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    in >> key >> rows >> cols;
    if (!in || rows < 1 || cols < 1) throw fail("bad matrix header");
    w->resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) in >> (*w)(i, j);
    }
  }
  if (!in) throw fail("truncated checkpoint");
  model.Validate();
  return model;
}

}  // namespace softmedoid
