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

#ifndef SOFTMEDOID_GRAPH_HPP_
#define SOFTMEDOID_GRAPH_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "softmedoid/types.hpp"

namespace softmedoid {

// Row-major sparse matrix: the CSR layout used for adjacency and message
// passing matrices.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

class GraphFormatError : public std::runtime_error {
 public:
  GraphFormatError(const std::string& file, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Undirected graph, stored symmetrically without self-loops.
class SparseGraph {
 public:
  SparseGraph() = default;
  // `adjacency` must be square, symmetric, non-negative, with empty diagonal.
  SparseGraph(SparseMatrix adjacency, Matrix features, std::vector<int> labels = {});

  Eigen::Index num_nodes() const { return adjacency_.rows(); }
  // Undirected edge count.
  Eigen::Index num_edges() const { return adjacency_.nonZeros() / 2; }
  const SparseMatrix& adjacency() const { return adjacency_; }
  const Matrix& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  bool has_labels() const { return !labels_.empty(); }
  int num_classes() const { return num_classes_; }

  bool HasEdge(Eigen::Index u, Eigen::Index v) const;
  std::vector<Eigen::Index> Degrees() const;
  // Same features and labels over a different edge set.
  SparseGraph WithAdjacency(SparseMatrix adjacency) const;

 private:
  SparseMatrix adjacency_;
  Matrix features_;
  std::vector<int> labels_;
  int num_classes_ = 0;
};

struct Edge {
  Eigen::Index u = 0;
  Eigen::Index v = 0;
  double weight = 1.0;
};

// Builds a symmetric adjacency from an undirected edge list. Self-loops are
// dropped; duplicates (in either orientation) must agree on the weight.
SparseMatrix BuildAdjacency(Eigen::Index n, const std::vector<Edge>& edges);

// Edge file: "u v [w]" per line. Feature file: CSV, row i = node i. Label
// file (optional, empty path to skip): "node,label" per line.
SparseGraph LoadGraph(const std::filesystem::path& edge_file,
                      const std::filesystem::path& feature_file,
                      const std::filesystem::path& label_file = {});

// Scales each row with a positive sum to unit L1 mass.
Matrix RowNormalizeL1(const Matrix& features);

struct ComponentResult {
  SparseGraph graph;
  // old node id -> new node id, or -1 when dropped.
  std::vector<Eigen::Index> index_map;
};

// Induced subgraph on the largest connected component. Equal sizes go to the
// component containing the smallest node id.
ComponentResult LargestConnectedComponent(const SparseGraph& graph);

// D^-1/2 (A + I) D^-1/2 with D the row sums of A + I.
SparseMatrix GcnNormalize(const SparseMatrix& adjacency);

// alpha (I - (1 - alpha) A)^-1 by power iteration until the max-norm
// residual drops to `tolerance`. Throws NumericError when the iteration cap
// 10 * ceil(log(tol) / log(1 - alpha)) is hit first.
Matrix PersonalizedPageRank(const SparseMatrix& transition, double alpha,
                            double tolerance = 1e-6);

// Keeps the k largest entries of every row (ties by smallest column).
SparseMatrix TopKPerRow(const Matrix& dense, Eigen::Index k);

// D^-1/2 S D^-1/2 with D the row sums of S; no self-loops are added.
SparseMatrix SymmetricNormalize(const SparseMatrix& matrix);

// GDC with the personalized PageRank kernel: diffuse, keep the top k entries
// per row, renormalize symmetrically.
SparseMatrix GdcDiffusion(const SparseMatrix& transition, double alpha, Eigen::Index k);

struct SplitAssignment {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> val;
  std::vector<Eigen::Index> test;
  std::vector<std::string> warnings;
};

// Samples per_class training and per_class validation nodes from every class;
// the rest is test. Classes too small for both get floor(size / 2) each.
SplitAssignment SplitNodes(const SparseGraph& graph, int per_class, std::uint64_t seed);

struct SbmOptions {
  Eigen::Index n = 200;
  int classes = 2;
  double p_in = 0.05;
  double p_out = 0.005;
  Eigen::Index feature_dim = 16;
  double feature_shift = 1.0;
  double feature_noise = 1.0;
  std::uint64_t seed = 0;
  // Each node's feature row is scaled by exp(spread * N(0, 1)); 0 disables.
  double feature_scale_spread = 0.0;
};

// Stochastic block model with contiguous, balanced class blocks and Gaussian
// features centered at feature_shift * e_(class mod feature_dim).
SparseGraph SyntheticSbm(const SbmOptions& options);

}  // namespace softmedoid

#endif  // SOFTMEDOID_GRAPH_HPP_
