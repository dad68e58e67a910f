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

#ifndef SOFTMEDOID_ESTIMATORS_HPP_
#define SOFTMEDOID_ESTIMATORS_HPP_

#include <cstddef>
#include <utility>
#include <vector>

#include "softmedoid/types.hpp"

namespace softmedoid {

// An n x d set of finite points, one per row.
class PointSet {
 public:
  // Throws std::invalid_argument on an empty matrix or non-finite entries.
  explicit PointSet(Matrix points);

  const Matrix& points() const { return points_; }
  Eigen::Index size() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }
  auto row(Eigen::Index i) const { return points_.row(i); }

 private:
  Matrix points_;
};

// Non-negative message-passing weights with at least one positive entry.
class WeightVector {
 public:
  explicit WeightVector(Vector weights);
  static WeightVector Uniform(Eigen::Index n);
  static WeightVector Ones(Eigen::Index n);

  const Vector& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }
  double sum() const { return values_.sum(); }

 private:
  Vector values_;
};

// Softmax temperature. The exact-medoid mode stands for the T -> 0 limit and
// is evaluated with an argmin instead of a tiny numeric temperature.
class Temperature {
 public:
  explicit Temperature(double value);
  static Temperature ExactMedoid() { return Temperature(); }

  bool exact_medoid() const { return exact_; }
  // Only meaningful when !exact_medoid().
  double value() const { return value_; }

 private:
  Temperature() : value_(0.0), exact_(true) {}
  double value_;
  bool exact_;
};

// `coefficients` are the per-point multipliers such that
// location == points^T * coefficients (for the estimators that are linear
// combinations of their inputs).
struct EstimatorResult {
  Vector location;
  Vector coefficients;
};

// Weighted sum: sum_i a_i x_i. Coefficients are `a`.
EstimatorResult Mean(const PointSet& x, const WeightVector& a);

// Per-coordinate weighted lower median. Coefficients hold, for each point,
// the fraction of coordinates in which it was selected.
EstimatorResult DimensionwiseMedian(const PointSet& x, const WeightVector& a);

// Row selected in each coordinate by DimensionwiseMedian.
std::vector<Eigen::Index> DimensionwiseMedianIndices(const PointSet& x,
                                                     const WeightVector& a);

// Point of the set minimizing sum_j a_j ||x_j - x_k||; ties go to the
// smallest index. Coefficients are one-hot.
EstimatorResult Medoid(const PointSet& x, const WeightVector& a);

// Index form of Medoid.
Eigen::Index MedoidIndex(const PointSet& x, const WeightVector& a);

struct L1Options {
  double tol = 1e-10;
  int max_iter = 10000;
};

struct L1Result {
  EstimatorResult estimate;
  int iterations = 0;
  bool converged = false;
};

// Weighted geometric median via Weiszfeld iterations started at the
// weighted average, with the Vardi-Zhang modification when an iterate lands
// on a data point. Coefficients are the normalized Weiszfeld weights of the
// final iterate.
L1Result L1Estimator(const PointSet& x, const WeightVector& a,
                     const L1Options& options = {});

// Soft Medoid with unit weights: softmax over -(1/T) * sum_j ||x_j - x_i||.
EstimatorResult SoftMedoid(const PointSet& x, const Temperature& t);

// Weighted Soft Medoid. Coefficients are c * (s o a) and sum to sum(a).
// In exact-medoid mode all mass sum(a) goes to the medoid of the points
// with positive weight.
EstimatorResult WeightedSoftMedoid(const PointSet& x, const WeightVector& a,
                                   const Temperature& t);

// Indices of the k largest weights (ties by smallest index), ascending.
std::vector<Eigen::Index> TopKIndices(const Vector& weights, Eigen::Index k);

// Weighted Soft Medoid over the k largest-weight points only. Coefficients of
// the discarded points are zero. Requires k >= 1.
EstimatorResult WeightedSoftMedoidTopK(const PointSet& x, const WeightVector& a,
                                       const Temperature& t, Eigen::Index k);

// Alternative normalization: sum(a) * s^T X. The weights enter only through
// the distance sums.
EstimatorResult WeightedSoftMedoidAlt(const PointSet& x, const WeightVector& a,
                                      const Temperature& t);

struct SoftMedoidGradient {
  Matrix points;   // n x d
  Vector weights;  // n
};

// Reverse-mode derivative of upstream^T * WeightedSoftMedoid(x, a, t).
// Distances between coincident points contribute a zero subgradient. In
// exact-medoid mode only the selected row receives gradient.
SoftMedoidGradient WeightedSoftMedoidBackward(const PointSet& x,
                                              const WeightVector& a,
                                              const Temperature& t,
                                              const Vector& upstream);

// Same for WeightedSoftMedoidAlt.
SoftMedoidGradient WeightedSoftMedoidAltBackward(const PointSet& x,
                                                 const WeightVector& a,
                                                 const Temperature& t,
                                                 const Vector& upstream);

// Diameter of the set (largest pairwise distance).
double Diameter(const PointSet& x);

// Unchecked kernels shared with the message-passing engine. Callers guarantee
// finite inputs, matching sizes, a positive weight sum and t > 0.
namespace kernel {

enum class Normalization {
  kWeighted,     // c * (s o a)
  kAlternative,  // sum(a) * s
};

// Pairwise Euclidean distances, n x n.
Matrix PairwiseDistances(const Eigen::Ref<const Matrix>& x);

// Coefficients of the (weighted) Soft Medoid. `distances` must come from
// PairwiseDistances(x).
Vector SoftMedoidCoefficients(const Matrix& distances,
                              const Eigen::Ref<const Vector>& a,
                              double temperature, Normalization norm);

// Accumulates d(upstream^T x^T coeff)/dx into grad_x and, when non-null,
// d/da into grad_a.
void SoftMedoidBackward(const Eigen::Ref<const Matrix>& x,
                        const Matrix& distances,
                        const Eigen::Ref<const Vector>& a, double temperature,
                        Normalization norm,
                        const Eigen::Ref<const Vector>& upstream,
                        Eigen::Ref<Matrix> grad_x, Vector* grad_a);

// Weighted medoid index restricted to rows with positive weight.
Eigen::Index SupportMedoidIndex(const Matrix& distances,
                                const Eigen::Ref<const Vector>& a);

}  // namespace kernel

}  // namespace softmedoid

#endif  // SOFTMEDOID_ESTIMATORS_HPP_
