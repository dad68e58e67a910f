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

#include "softmedoid/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace softmedoid {

namespace {

void CheckSizes(const PointSet& x, const WeightVector& a) {
  if (x.size() != a.size()) {
    throw std::invalid_argument("weight vector has length " +
                                std::to_string(a.size()) + " but point set has " +
                                std::to_string(x.size()) + " rows");
  }
}

EstimatorResult Combine(const PointSet& x, Vector coefficients) {
  EstimatorResult result;
  result.location = x.points().transpose() * coefficients;
  result.coefficients = std::move(coefficients);
  return result;
}

EstimatorResult ExactModeResult(const PointSet& x, const WeightVector& a) {
  const Matrix distances = kernel::PairwiseDistances(x.points());
  const Eigen::Index k = kernel::SupportMedoidIndex(distances, a.values());
  Vector coefficients = Vector::Zero(x.size());
  coefficients[k] = a.sum();
  return Combine(x, std::move(coefficients));
}

SoftMedoidGradient Backward(const PointSet& x, const WeightVector& a,
                            const Temperature& t, const Vector& upstream,
                            kernel::Normalization norm) {
  CheckSizes(x, a);
  if (upstream.size() != x.dim()) {
    throw std::invalid_argument("upstream gradient has wrong dimension");
  }
  SoftMedoidGradient grad{Matrix::Zero(x.size(), x.dim()),
                          Vector::Zero(x.size())};
  const Matrix distances = kernel::PairwiseDistances(x.points());
  if (t.exact_medoid()) {
    const Eigen::Index k = kernel::SupportMedoidIndex(distances, a.values());
    grad.points.row(k) = a.sum() * upstream.transpose();
    grad.weights.setConstant(upstream.dot(x.points().row(k)));
    return grad;
  }
  kernel::SoftMedoidBackward(x.points(), distances, a.values(), t.value(), norm,
                             upstream, grad.points, &grad.weights);
  return grad;
}

}  // namespace

PointSet::PointSet(Matrix points) : points_(std::move(points)) {
  if (points_.rows() < 1 || points_.cols() < 1) {
    throw std::invalid_argument("point set must have at least one point and one dimension");
  }
  if (!points_.allFinite()) {
    throw std::invalid_argument("point set contains non-finite entries");
  }
}

WeightVector::WeightVector(Vector weights) : values_(std::move(weights)) {
  if (values_.size() < 1) throw std::invalid_argument("empty weight vector");
  if (!values_.allFinite()) {
    throw std::invalid_argument("weight vector contains non-finite entries");
  }
  if ((values_.array() < 0.0).any()) {
    throw std::invalid_argument("weights must be non-negative");
  }
  if (!(values_.array() > 0.0).any()) {
    throw std::invalid_argument("weights must contain a positive entry");
  }
}

WeightVector WeightVector::Uniform(Eigen::Index n) {
  return WeightVector(Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

WeightVector WeightVector::Ones(Eigen::Index n) {
  return WeightVector(Vector::Ones(n));
}

Temperature::Temperature(double value) : value_(value), exact_(false) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument("temperature must be a positive finite number");
  }
}

EstimatorResult Mean(const PointSet& x, const WeightVector& a) {
  CheckSizes(x, a);
  return Combine(x, a.values());
}

std::vector<Eigen::Index> DimensionwiseMedianIndices(const PointSet& x,
                                                     const WeightVector& a) {
  CheckSizes(x, a);
  const Eigen::Index n = x.size();
  const double half = 0.5 * a.sum() * (1.0 - 1e-12);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> selected(static_cast<std::size_t>(x.dim()));
  for (Eigen::Index col = 0; col < x.dim(); ++col) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const auto column = x.points().col(col);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
      return column[i] < column[j];
    });
    double cumulative = 0.0;
    Eigen::Index pick = order.back();
    for (Eigen::Index i : order) {
      cumulative += a[i];
      if (a[i] > 0.0 && cumulative >= half) {
        pick = i;
        break;
      }
    }
    selected[static_cast<std::size_t>(col)] = pick;
  }
  return selected;
}

EstimatorResult DimensionwiseMedian(const PointSet& x, const WeightVector& a) {
  const auto selected = DimensionwiseMedianIndices(x, a);
  EstimatorResult result;
  result.location.resize(x.dim());
  result.coefficients = Vector::Zero(x.size());
  const double share = 1.0 / static_cast<double>(x.dim());
  for (Eigen::Index col = 0; col < x.dim(); ++col) {
    const Eigen::Index row = selected[static_cast<std::size_t>(col)];
    result.location[col] = x.points()(row, col);
    result.coefficients[row] += share;
  }
  return result;
}

Eigen::Index MedoidIndex(const PointSet& x, const WeightVector& a) {
  CheckSizes(x, a);
  const Vector sums = kernel::PairwiseDistances(x.points()) * a.values();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < sums.size(); ++i) {
    if (sums[i] < sums[best]) best = i;
  }
  return best;
}

EstimatorResult Medoid(const PointSet& x, const WeightVector& a) {
  const Eigen::Index k = MedoidIndex(x, a);
  Vector coefficients = Vector::Zero(x.size());
  coefficients[k] = 1.0;
  return Combine(x, std::move(coefficients));
}

L1Result L1Estimator(const PointSet& x, const WeightVector& a,
                     const L1Options& options) {
  CheckSizes(x, a);
  if (!(options.tol > 0.0)) throw std::invalid_argument("tol must be positive");
  constexpr double kCoincident = 1e-12;
  const Matrix& pts = x.points();
  const Eigen::Index n = x.size();
  const Vector& w = a.values();

  Vector y = pts.transpose() * w / a.sum();
  Vector dist(n);
  L1Result result;

  for (int iter = 0; iter < options.max_iter; ++iter) {
    result.iterations = iter + 1;
    for (Eigen::Index i = 0; i < n; ++i) dist[i] = (pts.row(i).transpose() - y).norm();

    // Weight resting on the current iterate (possibly several duplicates).
    double mass_at_y = 0.0;
    Vector numerator = Vector::Zero(x.dim());
    Vector pull = Vector::Zero(x.dim());
    double denominator = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (dist[i] < kCoincident) {
        mass_at_y += w[i];
        continue;
      }
      const double inv = w[i] / dist[i];
      numerator += inv * pts.row(i).transpose();
      pull += inv * (pts.row(i).transpose() - y);
      denominator += inv;
    }

    Vector next;
    if (denominator == 0.0) {
      // All mass sits on y.
      result.converged = true;
      break;
    }
    const Vector weiszfeld = numerator / denominator;
    if (mass_at_y > 0.0) {
      const double pull_norm = pull.norm();
      if (pull_norm <= mass_at_y) {
        result.converged = true;
        break;
      }
      const double eta = mass_at_y / pull_norm;
      next = (1.0 - eta) * weiszfeld + eta * y;
    } else {
      next = weiszfeld;
    }
    const double step = (next - y).norm();
    y = std::move(next);
    if (step <= options.tol) {
      result.converged = true;
      break;
    }
  }

  Vector coefficients = Vector::Zero(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = (pts.row(i).transpose() - y).norm();
    if (d < kCoincident) {
      coefficients.setZero();
      coefficients[i] = 1.0;
      total = 1.0;
      break;
    }
    coefficients[i] = w[i] / d;
    total += coefficients[i];
  }
  result.estimate.location = std::move(y);
  result.estimate.coefficients = coefficients / total;
  return result;
}

EstimatorResult SoftMedoid(const PointSet& x, const Temperature& t) {
  if (t.exact_medoid()) return Medoid(x, WeightVector::Ones(x.size()));
  const Matrix distances = kernel::PairwiseDistances(x.points());
  const Vector ones = Vector::Ones(x.size());
  // Unit weights: c * (s o 1) == s * n / n.
  Vector coefficients = kernel::SoftMedoidCoefficients(
      distances, ones, t.value(), kernel::Normalization::kWeighted);
  coefficients /= static_cast<double>(x.size());
  return Combine(x, std::move(coefficients));
}

EstimatorResult WeightedSoftMedoid(const PointSet& x, const WeightVector& a,
                                   const Temperature& t) {
  CheckSizes(x, a);
  if (t.exact_medoid()) return ExactModeResult(x, a);
  const Matrix distances = kernel::PairwiseDistances(x.points());
  return Combine(x, kernel::SoftMedoidCoefficients(distances, a.values(), t.value(),
                                                   kernel::Normalization::kWeighted));
}

std::vector<Eigen::Index> TopKIndices(const Vector& weights, Eigen::Index k) {
  const Eigen::Index n = weights.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  if (k >= n) return order;
  const auto by_weight = [&](Eigen::Index i, Eigen::Index j) {
    if (weights[i] != weights[j]) return weights[i] > weights[j];
    return i < j;
  };
  std::partial_sort(order.begin(), order.begin() + k, order.end(), by_weight);
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

EstimatorResult WeightedSoftMedoidTopK(const PointSet& x, const WeightVector& a,
                                       const Temperature& t, Eigen::Index k) {
  CheckSizes(x, a);
  if (k < 1) throw std::invalid_argument("top-k truncation requires k >= 1");
  if (k >= x.size()) return WeightedSoftMedoid(x, a, t);

  const auto keep = TopKIndices(a.values(), k);
  Matrix sub_points(k, x.dim());
  Vector sub_weights(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index src = keep[static_cast<std::size_t>(i)];
    sub_points.row(i) = x.points().row(src);
    sub_weights[i] = a[src];
  }
  EstimatorResult sub = WeightedSoftMedoid(PointSet(std::move(sub_points)),
                                           WeightVector(std::move(sub_weights)), t);
  EstimatorResult result;
  result.location = std::move(sub.location);
  result.coefficients = Vector::Zero(x.size());
  for (Eigen::Index i = 0; i < k; ++i) {
    result.coefficients[keep[static_cast<std::size_t>(i)]] = sub.coefficients[i];
  }
  return result;
}

EstimatorResult WeightedSoftMedoidAlt(const PointSet& x, const WeightVector& a,
                                      const Temperature& t) {
  CheckSizes(x, a);
  if (t.exact_medoid()) return ExactModeResult(x, a);
  const Matrix distances = kernel::PairwiseDistances(x.points());
  return Combine(x, kernel::SoftMedoidCoefficients(distances, a.values(), t.value(),
                                                   kernel::Normalization::kAlternative));
}

SoftMedoidGradient WeightedSoftMedoidBackward(const PointSet& x,
                                              const WeightVector& a,
                                              const Temperature& t,
                                              const Vector& upstream) {
  return Backward(x, a, t, upstream, kernel::Normalization::kWeighted);
}

SoftMedoidGradient WeightedSoftMedoidAltBackward(const PointSet& x,
                                                 const WeightVector& a,
                                                 const Temperature& t,
                                                 const Vector& upstream) {
  return Backward(x, a, t, upstream, kernel::Normalization::kAlternative);
}

double Diameter(const PointSet& x) {
  return kernel::PairwiseDistances(x.points()).maxCoeff();
}

namespace kernel {

Matrix PairwiseDistances(const Eigen::Ref<const Matrix>& x) {
  const Eigen::Index n = x.rows();
  // Points as contiguous columns.
  const Matrix xt = x.transpose();
  Matrix distances(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    distances(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (xt.col(i) - xt.col(j)).norm();
      distances(i, j) = d;
      distances(j, i) = d;
    }
  }
  return distances;
}

namespace {

// Unnormalized softmax terms exp(-(D_i - D_ref)/T), where D_ref is the
// smallest distance sum among the rows that carry outer mass.
Vector SoftmaxTerms(const Vector& distance_sums, const Eigen::Ref<const Vector>& a,
                    double temperature, Normalization norm) {
  double reference = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < distance_sums.size(); ++i) {
    if (norm == Normalization::kAlternative || a[i] > 0.0) {
      reference = std::min(reference, distance_sums[i]);
    }
  }
  return (-(distance_sums.array() - reference) / temperature).exp().matrix();
}

}  // namespace

Vector SoftMedoidCoefficients(const Matrix& distances,
                              const Eigen::Ref<const Vector>& a,
                              double temperature, Normalization norm) {
  const Vector sums = distances * a;
  const Vector terms = SoftmaxTerms(sums, a, temperature, norm);
  const double total_weight = a.sum();
  if (norm == Normalization::kWeighted) {
    const Vector mass = terms.cwiseProduct(a);
    return total_weight * mass / mass.sum();
  }
  return total_weight * terms / terms.sum();
}

void SoftMedoidBackward(const Eigen::Ref<const Matrix>& x,
                        const Matrix& distances,
                        const Eigen::Ref<const Vector>& a, double temperature,
                        Normalization norm,
                        const Eigen::Ref<const Vector>& upstream,
                        Eigen::Ref<Matrix> grad_x, Vector* grad_a) {
  const Eigen::Index n = x.rows();
  const Vector sums = distances * a;
  const Vector terms = SoftmaxTerms(sums, a, temperature, norm);
  const double total_weight = a.sum();
  const bool weighted = norm == Normalization::kWeighted;
  const double partition = weighted ? terms.dot(a) : terms.sum();
  const Vector coefficients =
      weighted ? Vector(total_weight * terms.cwiseProduct(a) / partition)
               : Vector(total_weight * terms / partition);

  const Vector projections = x * upstream;  // u_i = g . x_i
  const double mean_projection = coefficients.dot(projections) / total_weight;
  // gamma_k = d(g . location) / d(distance sum k)
  const Vector gamma = -(coefficients.array() *
                         (projections.array() - mean_projection)).matrix() /
                       temperature;

  grad_x.noalias() += coefficients * upstream.transpose();
  // sum_j S_kj (x_k - x_j) with S_kj = (gamma_k a_j + gamma_j a_k) / d_kj,
  // and S_kj = 0 for coinciding points.
  const Matrix inverse = distances.unaryExpr([](double d) { return d == 0.0 ? 0.0 : 1.0 / d; });
  const Matrix s = (gamma * a.transpose() + a * gamma.transpose()).cwiseProduct(inverse);
  grad_x.noalias() += s.rowwise().sum().asDiagonal() * x;
  grad_x.noalias() -= s * x;

  if (grad_a != nullptr) {
    Vector& ga = *grad_a;
    ga = Vector::Constant(n, mean_projection);
    if (weighted) {
      ga.array() += total_weight * terms.array() *
                    (projections.array() - mean_projection) / partition;
    }
    ga.noalias() += distances * gamma;
  }
}

Eigen::Index SupportMedoidIndex(const Matrix& distances,
                                const Eigen::Ref<const Vector>& a) {
  const Vector sums = distances * a;
  Eigen::Index best = -1;
  for (Eigen::Index i = 0; i < sums.size(); ++i) {
    if (a[i] <= 0.0) continue;
    if (best < 0 || sums[i] < sums[best]) best = i;
  }
  return best;
}

}  // namespace kernel

}  // namespace softmedoid
