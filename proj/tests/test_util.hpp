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

#ifndef SOFTMEDOID_TESTS_TEST_UTIL_HPP_
#define SOFTMEDOID_TESTS_TEST_UTIL_HPP_

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/QR>

#include "softmedoid/graph.hpp"
#include "softmedoid/types.hpp"

namespace softmedoid::testing {

inline Matrix RandomGaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

inline Vector RandomVector(Rng& rng, Eigen::Index n) {
  return RandomGaussian(rng, n, 1).col(0);
}

// Haar-ish orthogonal matrix from the QR decomposition of a Gaussian matrix.
inline Matrix RandomOrthogonal(Rng& rng, Eigen::Index d) {
  const Matrix g = RandomGaussian(rng, d, d);
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(d, d);
}

// Erdos-Renyi adjacency with unit weights.
inline SparseMatrix RandomAdjacency(Rng& rng, Eigen::Index n, double p) {
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (Eigen::Index u = 0; u < n; ++u)
    for (Eigen::Index v = u + 1; v < n; ++v)
      if (coin(rng)) edges.push_back({u, v, 1.0});
  return BuildAdjacency(n, edges);
}

// max |got - want| / max |want|
inline double RelativeError(const Matrix& got, const Matrix& want) {
  const double scale = std::max(1e-12, want.cwiseAbs().maxCoeff());
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

}  // namespace softmedoid::testing

#endif  // SOFTMEDOID_TESTS_TEST_UTIL_HPP_
