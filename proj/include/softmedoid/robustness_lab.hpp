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

#ifndef SOFTMEDOID_ROBUSTNESS_LAB_HPP_
#define SOFTMEDOID_ROBUSTNESS_LAB_HPP_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "softmedoid/estimators.hpp"

namespace softmedoid {

enum class EstimatorKind { kMean, kMedoid, kL1, kDimensionwiseMedian, kSoftMedoid };

// A location estimator with unit weights, as used by the simulations.
struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::kSoftMedoid;
  // Only used by kSoftMedoid; nullopt selects the exact-medoid mode.
  std::optional<double> temperature = 1.0;

  std::string Tag() const;
  double TemperatureOrZero() const { return temperature.value_or(0.0); }
};

// Parses "mean", "medoid", "l1", "dimmedian", "soft_medoid".
EstimatorKind ParseEstimatorKind(const std::string& name);
std::string EstimatorKindName(EstimatorKind kind);

// Location of `x` under the estimator. Mean uses weights 1/n.
Vector Estimate(const EstimatorSpec& spec, const PointSet& x);

// m rows replaced by the point mass p * axis.
struct PerturbationSpec {
  Eigen::Index m = 0;
  double p = 1.0;
  // Unit direction; empty means the first coordinate axis.
  Vector axis;
};

// Replaces m uniformly chosen rows of x (without replacement) by p * axis.
// Throws std::invalid_argument if m > n or p <= 0.
PointSet PointMassPerturb(const PointSet& x, const PerturbationSpec& spec,
                          std::uint64_t seed);

// Rows chosen by PointMassPerturb for the given seed, ascending.
std::vector<Eigen::Index> PerturbedRows(Eigen::Index n, Eigen::Index m,
                                        std::uint64_t seed);

struct BiasCurve {
  std::string estimator;
  double temperature = 0.0;
  Eigen::Index n = 0;
  Eigen::Index d = 0;
  double p = 0.0;
  std::vector<double> epsilons;
  std::vector<double> bias_mean;
  std::vector<double> bias_std;
};

struct BiasCurveOptions {
  Eigen::Index n = 50;
  Eigen::Index d = 2;
  double p = 1000.0;
  std::vector<double> epsilons;
  int trials = 20;
  std::uint64_t seed = 0;
};

// For each trial draws n standard-normal samples in R^d and translates them so
// the estimator's clean estimate sits at the origin. Each epsilon then replaces
// floor(epsilon * n) rows by the point mass and records ||t(clean) - t(pert)||.
// Trial t uses RNG stream (seed, t), so trials are order independent.
BiasCurve EmpiricalBiasCurve(const EstimatorSpec& spec, const BiasCurveOptions& options);

void WriteBiasCurveCsvHeader(std::ostream& out);
void WriteBiasCurveCsv(const BiasCurve& curve, std::ostream& out);

struct BreakdownRow {
  double p = 0.0;
  double norm = 0.0;
};

// Applies the same m replaced rows at every magnitude of the (increasing)
// schedule and records ||t(X~)||.
std::vector<BreakdownRow> BreakdownSweep(const EstimatorSpec& spec, const PointSet& x,
                                         Eigen::Index m, const std::vector<double>& p_schedule,
                                         std::uint64_t seed);

enum class BreakdownVerdict { kBounded, kDiverged, kInconclusive };
std::string VerdictName(BreakdownVerdict verdict);

// "bounded": consecutive norm ratios stay below 1.01.
// "diverged": every ||t(p)||/p lies in [1e-3, 1] and the norm increases.
BreakdownVerdict ClassifyBreakdown(const std::vector<BreakdownRow>& rows);

// Worst-case guarantee 2 M (m + 1) with M the largest clean norm.
double WorstCaseBound(const PointSet& clean, Eigen::Index m);

struct WeightRatioTerms {
  double alpha1 = 0.0;  // perturbed -> chosen perturbed point
  double alpha2 = 0.0;  // clean -> chosen perturbed point
  double alpha3 = 0.0;  // perturbed -> chosen clean point
  double alpha4 = 0.0;  // clean -> chosen clean point
  double log_ratio = 0.0;
  double ratio = 1.0;   // s_pert / s_clean = exp(-(a1 + a2 - a3 - a4) / T)
};

// Softmax weight ratio between perturbed row `pert_index` and clean row
// `clean_index` of the union of both sets.
WeightRatioTerms WeightRatioDiagnostic(const PointSet& clean, const PointSet& perturbed,
                                       const Temperature& t, Eigen::Index pert_index = 0,
                                       Eigen::Index clean_index = 0);

}  // namespace softmedoid

#endif  // SOFTMEDOID_ROBUSTNESS_LAB_HPP_
