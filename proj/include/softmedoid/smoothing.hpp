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


#ifndef SOFTMEDOID_SMOOTHING_HPP_
#define SOFTMEDOID_SMOOTHING_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "softmedoid/gnn.hpp"
#include "softmedoid/graph.hpp"
#include "softmedoid/types.hpp"

namespace softmedoid {

enum class SmoothingTarget { kEdges, kFeatures, kBoth };

std::string SmoothingTargetName(SmoothingTarget target);
SmoothingTarget ParseSmoothingTarget(const std::string& name);

struct SmoothingConfig {
  double p_plus = 0.001;   // probability of switching an absent bit on
  double p_minus = 0.4;    // probability of switching a present bit off
  SmoothingTarget target = SmoothingTarget::kEdges;
  int n_samples = 1000;
  double alpha = 0.05;     // one-sided confidence level of pA_lower

  void Validate() const;
};

// Independent flips of every undirected node pair: present edges are removed
// with p_minus, absent pairs are added (weight 1) with p_plus. Additions are
// drawn by geometric skipping over the lower triangle.
SparseMatrix SampleAdjacency(const SparseMatrix& adjacency, double p_plus, double p_minus,
                             Rng& rng);

// Same for a binary feature matrix (non-zero entries count as 1).
Matrix SampleFeatures(const Matrix& features, double p_plus, double p_minus, Rng& rng);

// Maps (adjacency, features) to one class per node.
using GraphPredictor =
    std::function<std::vector<int>(const SparseMatrix& adjacency, const Matrix& features)>;

struct VoteRecord {
  Eigen::MatrixXi counts;       // n x C
  std::vector<int> majority;    // ties to the smallest class
  Vector pa_lower;              // Clopper-Pearson bound on the majority count
  int n_samples = 0;
};

// Sample s draws from StreamRng(seed, s).
VoteRecord SampleVotes(const GraphPredictor& predictor, const SparseGraph& graph,
                       int num_classes, const SmoothingConfig& config, std::uint64_t seed);

// Rebuilds the model's message matrix for every sampled adjacency.
VoteRecord SampleVotes(const GnnModel& model, const SparseGraph& graph,
                       const SmoothingConfig& config, std::uint64_t seed);

// Exact one-sided lower bound: the p with P(Binomial(n, p) >= count) = alpha,
// found by bisection on the regularized incomplete Beta function.
double ClopperPearsonLower(int count, int n, double alpha);

// Smallest probability of the majority class at any x' differing from x by
// r_a added and r_d deleted bits, over all classifiers with probability
// pa_lower at x (Neyman-Pearson).
double WorstCaseProbability(double pa_lower, double p_plus, double p_minus, int r_a, int r_d);

// WorstCaseProbability(...) > 0.5.
bool CertifyRadius(double pa_lower, const SmoothingConfig& config, int r_a, int r_d);

// Oracle: enumerates all 2^d outcomes of the flip distribution around x and
// x'. Throws std::invalid_argument for d > 20 or mismatched lengths.
double WorstCaseBruteforce(double pa_lower, double p_plus, double p_minus,
                           const std::vector<int>& x_bits, const std::vector<int>& x_prime_bits);
bool CertifyBruteforce(double pa_lower, const SmoothingConfig& config,
                       const std::vector<int>& x_bits, const std::vector<int>& x_prime_bits);

enum class RadiusAxis { kAddition, kDeletion };

// Largest r with CertifyRadius at (r, 0) or (0, r); 0 when not even (0, 0)
// certifies. Search stops at `cap`.
int MaxCertifiedRadius(double pa_lower, const SmoothingConfig& config, RadiusAxis axis,
                       int cap = 10000);

// Counts are kept as integers so that sums of ratios are formed exactly and
// divided once.
struct CertificationGrid {
  int max_ra = 0;
  int max_rd = 0;
  Eigen::MatrixXi certified;  // (max_ra + 1) x (max_rd + 1) node counts
  std::size_t num_nodes = 0;

  // R(r_a, r_d)
  double at(int r_a, int r_d) const {
    return static_cast<double>(certified(r_a, r_d)) / static_cast<double>(num_nodes);
  }
  Matrix Ratios() const;
};

// R(r_a, r_d): fraction of `nodes` whose majority vote equals the label and
// certifies at (r_a, r_d).
CertificationGrid ComputeCertificationGrid(const VoteRecord& votes, const std::vector<int>& labels,
                                           const std::vector<Eigen::Index>& nodes,
                                           const SmoothingConfig& config, int max_ra, int max_rd);

// Grid just large enough that every row and column beyond it is zero.
CertificationGrid FullCertificationGrid(const VoteRecord& votes, const std::vector<int>& labels,
                                        const std::vector<Eigen::Index>& nodes,
                                        const SmoothingConfig& config);

// -R(0, 0) + sum of R over the whole grid.
double AccumulatedCertifications(const CertificationGrid& grid);
// -R(0, 0) + sum over r_a with r_d = 0.
double AccumulatedAdditionCertifications(const CertificationGrid& grid);
// -R(0, 0) + sum over r_d with r_a = 0.
double AccumulatedDeletionCertifications(const CertificationGrid& grid);

// Mean of MaxCertifiedRadius over the nodes whose majority vote is correct.
// Throws std::invalid_argument when there is none.
double AverageCertifiableRadius(const VoteRecord& votes, const std::vector<int>& labels,
                                const std::vector<Eigen::Index>& nodes,
                                const SmoothingConfig& config, RadiusAxis axis);
// Same from precomputed per-node radii.
double AverageCertifiableRadius(const std::vector<int>& radii);

struct CertificationMetrics {
  double ac_add_and_del = 0.0;
  double ac_add = 0.0;
  double ac_del = 0.0;
  double r_bar_a = 0.0;
  double r_bar_d = 0.0;
  double acc_base = 0.0;
  // The smoothed classifier abstains unless pA_lower > 0.5, so this is R(0, 0).
  double acc_smooth = 0.0;
};

CertificationMetrics ComputeCertificationMetrics(const VoteRecord& votes,
                                                 const std::vector<int>& base_predictions,
                                                 const std::vector<int>& labels,
                                                 const std::vector<Eigen::Index>& nodes,
                                                 const SmoothingConfig& config);

struct DegreeBin {
  Eigen::Index min_degree = 0;
  Eigen::Index max_degree = 0;
  std::size_t size = 0;
  double ac_add_and_del = 0.0;
  double ac_add = 0.0;
  double ac_del = 0.0;
};

// Splits `nodes` sorted by degree (ties by node id) into `bins` groups of
// near-equal size and reports the accumulated certifications of each.
std::vector<DegreeBin> DegreeBinnedCertifications(const VoteRecord& votes,
                                                  const std::vector<int>& labels,
                                                  const std::vector<Eigen::Index>& nodes,
                                                  const std::vector<Eigen::Index>& degrees,
                                                  const SmoothingConfig& config, int bins = 5);

}  // namespace softmedoid

#endif  // SOFTMEDOID_SMOOTHING_HPP_
