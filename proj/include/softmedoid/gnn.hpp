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


#ifndef SOFTMEDOID_GNN_HPP_
#define SOFTMEDOID_GNN_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "softmedoid/graph.hpp"
#include "softmedoid/types.hpp"

namespace softmedoid {

enum class AggregatorKind {
  kWeightedSum,
  kDimwiseMedian,
  kMedoid,
  kSoftMedoid,     // weighted Soft Medoid, coefficients c * (s o a)
  kSoftMedoidAlt,  // sum(a) * s
};

std::string AggregatorKindName(AggregatorKind kind);
// Accepts the names produced by AggregatorKindName.
AggregatorKind ParseAggregatorKind(const std::string& name);

struct AggregatorConfig {
  AggregatorKind kind = AggregatorKind::kWeightedSum;
  double temperature = 1.0;  // soft kinds only
  Eigen::Index k = 0;        // top-k truncation of each neighborhood, 0 = off

  bool soft() const {
    return kind == AggregatorKind::kSoftMedoid || kind == AggregatorKind::kSoftMedoidAlt;
  }
  void Validate() const;
};

enum class MessageSource { kGcn, kGdc };

struct MessageConfig {
  MessageSource source = MessageSource::kGcn;
  double alpha = 0.15;    // GDC teleport probability
  Eigen::Index k = 64;    // GDC entries kept per row
};

// GCN normalization of A + I, or GDC (personalized PageRank) diffusion of
// that matrix followed by top-k sparsification.
SparseMatrix BuildMessageMatrix(const SparseMatrix& adjacency, const MessageConfig& config);

struct ModelConfig {
  Eigen::Index hidden = 64;
  std::array<AggregatorConfig, 2> aggregators;
  MessageConfig message;

  // Same aggregator in both layers.
  static ModelConfig WithAggregator(const AggregatorConfig& aggregator);
};

// Two message-passing layers without bias:
//   logits = AGG_2(A, relu(AGG_1(A, X W1)) W2).
struct GnnModel {
  ModelConfig config;
  Matrix w1;  // d x h
  Matrix w2;  // h x C

  Eigen::Index input_dim() const { return w1.rows(); }
  Eigen::Index num_classes() const { return w2.cols(); }
  // Throws std::invalid_argument when shapes disagree with each other or
  // with config.hidden.
  void Validate() const;
};

// Glorot-uniform initialization.
GnnModel InitModel(const ModelConfig& config, Eigen::Index input_dim, int num_classes,
                   std::uint64_t seed);

// Per-node state needed to route gradients through the hard aggregators.
struct AggregationCache {
  std::vector<Eigen::Index> medoid;            // kMedoid: selected node per row
  std::vector<std::vector<Eigen::Index>> dim;  // kDimwiseMedian: node per (row, column)
};

// Aggregates the rows of z over every row of `message`. Row v combines the
// rows u with message(v, u) != 0, weighted by message(v, u). Medoid and
// dimension-wise median outputs are scaled by the row sum so that every
// aggregator returns the same mass as the weighted sum.
Matrix Aggregate(const AggregatorConfig& config, const SparseMatrix& message, const Matrix& z,
                 AggregationCache* cache = nullptr);

// Adds d(sum(upstream o Aggregate(z)))/dz to grad_z. `cache` must come from
// the forward call for the hard aggregators.
void AggregateBackward(const AggregatorConfig& config, const SparseMatrix& message,
                       const Matrix& z, const AggregationCache& cache, const Matrix& upstream,
                       Matrix& grad_z);

struct ForwardCache {
  Matrix z1;  // X W1
  Matrix p1;  // layer-1 aggregate, before ReLU
  Matrix h1;  // relu(p1)
  Matrix z2;  // h1 W2
  AggregationCache agg1;
  AggregationCache agg2;
};

// Returns the n x C logits. Throws std::invalid_argument on shape mismatch.
Matrix Forward(const GnnModel& model, const SparseMatrix& message, const Matrix& features,
               ForwardCache* cache = nullptr);

struct ModelGradients {
  Matrix w1;
  Matrix w2;
};

// Parameter gradients of sum(logit_grad o logits).
ModelGradients Backward(const GnnModel& model, const SparseMatrix& message,
                        const Matrix& features, const ForwardCache& cache,
                        const Matrix& logit_grad);

// Mean cross-entropy over `nodes` and its gradient w.r.t. the logits.
double CrossEntropy(const Matrix& logits, const std::vector<int>& labels,
                    const std::vector<Eigen::Index>& nodes, Matrix* logit_grad = nullptr);

struct LossResult {
  double loss = 0.0;  // cross-entropy + weight_decay / 2 * (|W1|^2 + |W2|^2)
  ModelGradients gradients;
};

LossResult LossAndGradient(const GnnModel& model, const SparseMatrix& message,
                           const Matrix& features, const std::vector<int>& labels,
                           const std::vector<Eigen::Index>& nodes, double weight_decay);

enum class Optimizer { kGradientDescent, kAdam };

std::string OptimizerName(Optimizer optimizer);
Optimizer ParseOptimizer(const std::string& name);

struct TrainConfig {
  double lr = 0.01;
  double weight_decay = 5e-4;
  int max_epochs = 3000;
  int patience = 300;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::kGradientDescent;

  void Validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_accuracy;
  int best_epoch = 0;
};

// Full-batch training with early stopping on the validation cross-entropy.
// On return `model` holds the parameters of the best validation epoch.
// Throws NumericError naming the epoch when the loss stops being finite.
TrainHistory Fit(GnnModel& model, const SparseMatrix& message, const Matrix& features,
                 const std::vector<int>& labels, const SplitAssignment& split,
                 const TrainConfig& config);

struct TrainResult {
  GnnModel model;
  TrainHistory history;
};

// Builds the message matrix, initializes with config.seed and fits.
TrainResult Train(const ModelConfig& model_config, const SparseGraph& graph,
                  const SplitAssignment& split, const TrainConfig& config);

// Argmax per row, ties to the smallest class.
std::vector<int> Predict(const Matrix& logits);

// Fraction of `nodes` whose prediction equals the label. Throws on an empty
// node set.
double PredictAccuracy(const GnnModel& model, const SparseMatrix& message,
                       const Matrix& features, const std::vector<int>& labels,
                       const std::vector<Eigen::Index>& nodes);
double Accuracy(const std::vector<int>& predictions, const std::vector<int>& labels,
                const std::vector<Eigen::Index>& nodes);

// FNV-1a over the parameter bytes and shapes.
std::uint64_t ModelChecksum(const GnnModel& model);

// Text checkpoint, format "softmedoid-checkpoint 1": one "key value" line per
// config field, then each weight matrix as "name rows cols" followed by one
// row per line with 17 significant digits.
void SaveCheckpoint(const GnnModel& model, const std::filesystem::path& path);
GnnModel LoadCheckpoint(const std::filesystem::path& path);

}  // namespace softmedoid

#endif  // SOFTMEDOID_GNN_HPP_
