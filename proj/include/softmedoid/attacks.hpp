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


#ifndef SOFTMEDOID_ATTACKS_HPP_
#define SOFTMEDOID_ATTACKS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "softmedoid/gnn.hpp"
#include "softmedoid/graph.hpp"
#include "softmedoid/types.hpp"

namespace softmedoid {

struct AttackBudget {
  double epsilon = 0.0;  // fraction of the clean edge count

  // floor(epsilon * num_edges). Throws std::invalid_argument for epsilon < 0.
  Eigen::Index Flips(Eigen::Index num_edges) const;
};

enum class FlipOp { kAdd, kDelete };

// Undirected flip, stored with u < v.
struct Flip {
  FlipOp op = FlipOp::kAdd;
  Eigen::Index u = 0;
  Eigen::Index v = 0;

  friend bool operator==(const Flip&, const Flip&) = default;
};

// "add(u,v)" or "del(u,v)"
std::string FormatFlip(const Flip& flip);
Flip ParseFlip(const std::string& text);

// Applies the flips symmetrically. Added edges get weight 1. Throws
// std::invalid_argument when an addition hits an existing edge or a deletion
// a missing one.
SparseMatrix ApplyFlips(const SparseMatrix& adjacency, const std::vector<Flip>& flips);

struct AttackResult {
  std::vector<Flip> flips;
  SparseMatrix adjacency;  // perturbed
  std::vector<std::string> warnings;
};

// Deletes floor(budget / 2) uniformly chosen same-class edges and adds the
// rest as uniformly chosen different-class non-edges.
AttackResult DiceAttack(const SparseGraph& graph, Eigen::Index budget, std::uint64_t seed);

// Dense two-layer GCN used as the attack surrogate. The model must use the
// weighted sum aggregator without top-k in both layers and GCN messages.
void CheckSurrogate(const GnnModel& model);

// Mean cross-entropy over `nodes` of the surrogate on a dense (unnormalized)
// adjacency.
double SurrogateLoss(const GnnModel& model, const Matrix& adjacency, const Matrix& features,
                     const std::vector<int>& labels, const std::vector<Eigen::Index>& nodes);

// Derivative of SurrogateLoss w.r.t. a symmetric change of A_uv and A_vu
// (both entries move together), backpropagated through the normalization.
// Symmetric, zero diagonal.
Matrix SurrogateAdjacencyGradient(const GnnModel& model, const Matrix& adjacency,
                                  const Matrix& features, const std::vector<int>& labels,
                                  const std::vector<Eigen::Index>& nodes);

struct GreedyOptions {
  // Pairs with the largest gradient score whose exact loss is evaluated per
  // step.
  Eigen::Index shortlist = 32;
};

// One flip per step: ranks unflipped pairs by g_uv * (1 - 2 A_uv), re-evaluates
// the exact loss of the shortlisted flips and keeps the best (ties by the
// smallest (u, v)).
AttackResult GreedyFlipAttack(const GnnModel& surrogate, const SparseGraph& graph,
                              const std::vector<Eigen::Index>& target_nodes, Eigen::Index budget,
                              const GreedyOptions& options = {});

// Clips to [0, 1]; if the sum then exceeds `budget`, subtracts the constant
// mu (found by bisection) with sum(clip(s - mu, 0, 1)) == budget.
Vector ProjectToBudget(const Vector& s, double budget);

struct PgdOptions {
  int steps = 100;
  double step_size = 1.0;  // step t moves by step_size / sqrt(t + 1) * g / max|g|
  int samples = 20;
  std::uint64_t seed = 0;
};

// Projected gradient ascent over relaxed flip indicators of every node pair,
// then the best of up to `samples` Bernoulli draws (and the top entries of s)
// with at most `budget` flips.
AttackResult PgdL0Attack(const GnnModel& surrogate, const SparseGraph& graph,
                         const std::vector<Eigen::Index>& target_nodes, Eigen::Index budget,
                         const PgdOptions& options = {});

// Accuracy on `nodes` with the message matrix rebuilt from the perturbed
// adjacency; parameters are untouched.
double EvasionAccuracy(const GnnModel& model, const SparseGraph& graph,
                       const SparseMatrix& perturbed_adjacency,
                       const std::vector<Eigen::Index>& nodes);

// One line per flip, no header.
void WritePerturbations(const std::vector<Flip>& flips, const std::filesystem::path& path);
std::vector<Flip> ReadPerturbations(const std::filesystem::path& path);

}  // namespace softmedoid

#endif  // SOFTMEDOID_ATTACKS_HPP_
