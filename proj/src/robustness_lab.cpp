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

#include "softmedoid/robustness_lab.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace softmedoid {

std::string EstimatorKindName(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kMean: return "mean";
    case EstimatorKind::kMedoid: return "medoid";
    case EstimatorKind::kL1: return "l1";
    case EstimatorKind::kDimensionwiseMedian: return "dimmedian";
    case EstimatorKind::kSoftMedoid: return "soft_medoid";
  }
  return "unknown";
}

EstimatorKind ParseEstimatorKind(const std::string& name) {
  for (EstimatorKind kind : {EstimatorKind::kMean, EstimatorKind::kMedoid, EstimatorKind::kL1,
                             EstimatorKind::kDimensionwiseMedian, EstimatorKind::kSoftMedoid}) {
    if (EstimatorKindName(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

std::string EstimatorSpec::Tag() const {
  if (kind != EstimatorKind::kSoftMedoid) return EstimatorKindName(kind);
  if (!temperature) return "soft_medoid_exact";
  std::ostringstream out;
  out << "soft_medoid_T" << *temperature;
  return out.str();
}

Vector Estimate(const EstimatorSpec& spec, const PointSet& x) {
  const Eigen::Index n = x.size();
  switch (spec.kind) {
    case EstimatorKind::kMean:
      return Mean(x, WeightVector::Uniform(n)).location;
    case EstimatorKind::kMedoid:
      return Medoid(x, WeightVector::Ones(n)).location;
    case EstimatorKind::kL1:
      return L1Estimator(x, WeightVector::Ones(n), {1e-10, 10000}).estimate.location;
    case EstimatorKind::kDimensionwiseMedian:
      return DimensionwiseMedian(x, WeightVector::Ones(n)).location;
    case EstimatorKind::kSoftMedoid:
      return SoftMedoid(x, spec.temperature ? Temperature(*spec.temperature)
                                            : Temperature::ExactMedoid())
          .location;
  }
  throw std::logic_error("unhandled estimator kind");
}

std::vector<Eigen::Index> PerturbedRows(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
  if (m < 0 || m > n) throw std::invalid_argument("cannot replace more rows than the set holds");
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  Rng rng(MixSeed(seed, 0));
  // Partial Fisher-Yates: the first m entries are a uniform m-subset.
  for (Eigen::Index i = 0; i < m; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
    std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(pick(rng))]);
  }
  rows.resize(static_cast<std::size_t>(m));
  std::sort(rows.begin(), rows.end());
  return rows;
}

PointSet PointMassPerturb(const PointSet& x, const PerturbationSpec& spec, std::uint64_t seed) {
  if (!(spec.p > 0.0)) throw std::invalid_argument("point-mass magnitude must be positive");
  Vector axis = spec.axis;
  if (axis.size() == 0) {
    axis = Vector::Zero(x.dim());
    axis[0] = 1.0;
  }
  if (axis.size() != x.dim()) throw std::invalid_argument("axis has wrong dimension");
  const Vector target = spec.p * axis;
  Matrix out = x.points();
  for (Eigen::Index row : PerturbedRows(x.size(), spec.m, seed)) out.row(row) = target.transpose();
  return PointSet(std::move(out));
}

BiasCurve EmpiricalBiasCurve(const EstimatorSpec& spec, const BiasCurveOptions& options) {
  if (options.trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (!std::is_sorted(options.epsilons.begin(), options.epsilons.end()) ||
      std::adjacent_find(options.epsilons.begin(), options.epsilons.end()) !=
          options.epsilons.end()) {
    throw std::invalid_argument("epsilon grid must be strictly increasing");
  }
  BiasCurve curve;
  curve.estimator = EstimatorKindName(spec.kind);
  curve.temperature = spec.TemperatureOrZero();
  curve.n = options.n;
  curve.d = options.d;
  curve.p = options.p;
  curve.epsilons = options.epsilons;

  const std::size_t grid = options.epsilons.size();
  std::vector<std::vector<double>> samples(grid);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < options.trials; ++trial) {
    Rng rng = StreamRng(options.seed, static_cast<std::uint64_t>(trial));
    Matrix raw(options.n, options.d);
    for (Eigen::Index i = 0; i < raw.rows(); ++i)
      for (Eigen::Index j = 0; j < raw.cols(); ++j) raw(i, j) = normal(rng);
    const Vector shift = Estimate(spec, PointSet(raw));
    const PointSet centered(raw.rowwise() - shift.transpose());
    const Vector clean = Estimate(spec, centered);

    const std::uint64_t trial_seed = MixSeed(options.seed, static_cast<std::uint64_t>(trial));
    for (std::size_t e = 0; e < grid; ++e) {
      const double eps = options.epsilons[e];
      if (eps < 0.0 || eps > 1.0) throw std::invalid_argument("epsilon outside [0, 1]");
      PerturbationSpec pert;
      pert.m = static_cast<Eigen::Index>(std::floor(eps * static_cast<double>(options.n) + 1e-9));
      pert.p = options.p;
      const PointSet perturbed = PointMassPerturb(centered, pert, MixSeed(trial_seed, e));
      samples[e].push_back((Estimate(spec, perturbed) - clean).norm());
    }
  }
  for (const auto& values : samples) {
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                        static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    curve.bias_mean.push_back(mean);
    curve.bias_std.push_back(values.size() > 1
                                 ? std::sqrt(var / static_cast<double>(values.size() - 1))
                                 : 0.0);
  }
  return curve;
}

void WriteBiasCurveCsvHeader(std::ostream& out) {
  out << "estimator,T,n,d,p,epsilon,bias_mean,bias_std\n";
}

void WriteBiasCurveCsv(const BiasCurve& curve, std::ostream& out) {
  const auto old = out.precision(12);
  for (std::size_t i = 0; i < curve.epsilons.size(); ++i) {
    out << curve.estimator << ',' << curve.temperature << ',' << curve.n << ',' << curve.d
        << ',' << curve.p << ',' << curve.epsilons[i] << ',' << curve.bias_mean[i] << ','
        << curve.bias_std[i] << '\n';
  }
  out.precision(old);
}

std::vector<BreakdownRow> BreakdownSweep(const EstimatorSpec& spec, const PointSet& x,
                                         Eigen::Index m, const std::vector<double>& p_schedule,
                                         std::uint64_t seed) {
  if (!std::is_sorted(p_schedule.begin(), p_schedule.end())) {
    throw std::invalid_argument("p schedule must be increasing");
  }
  std::vector<BreakdownRow> rows;
  for (double p : p_schedule) {
    PerturbationSpec pert;
    pert.m = m;
    pert.p = p;
    rows.push_back({p, Estimate(spec, PointMassPerturb(x, pert, seed)).norm()});
  }
  return rows;
}

std::string VerdictName(BreakdownVerdict verdict) {
  switch (verdict) {
    case BreakdownVerdict::kBounded: return "bounded";
    case BreakdownVerdict::kDiverged: return "diverged";
    case BreakdownVerdict::kInconclusive: return "inconclusive";
  }
  return "inconclusive";
}

BreakdownVerdict ClassifyBreakdown(const std::vector<BreakdownRow>& rows) {
  if (rows.size() < 2) return BreakdownVerdict::kInconclusive;
  bool bounded = true;
  bool diverged = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double slope = rows[i].norm / rows[i].p;
    if (slope < 1e-3 || slope > 1.0 + 1e-9) diverged = false;
    if (i == 0) continue;
    const double prev = rows[i - 1].norm;
    const double cur = rows[i].norm;
    if (!(cur > prev)) diverged = false;
    if (prev == 0.0 ? cur != 0.0 : cur / prev >= 1.01) bounded = false;
  }
  if (bounded) return BreakdownVerdict::kBounded;
  if (diverged) return BreakdownVerdict::kDiverged;
  return BreakdownVerdict::kInconclusive;
}

double WorstCaseBound(const PointSet& clean, Eigen::Index m) {
  const double max_norm = clean.points().rowwise().norm().maxCoeff();
  return 2.0 * max_norm * static_cast<double>(m + 1);
}

WeightRatioTerms WeightRatioDiagnostic(const PointSet& clean, const PointSet& perturbed,
                                       const Temperature& t, Eigen::Index pert_index,
                                       Eigen::Index clean_index) {
  if (clean.dim() != perturbed.dim()) throw std::invalid_argument("dimension mismatch");
  if (pert_index < 0 || pert_index >= perturbed.size() || clean_index < 0 ||
      clean_index >= clean.size()) {
    throw std::invalid_argument("reference index out of range");
  }
  if (t.exact_medoid()) throw std::invalid_argument("weight ratio needs a numeric temperature");
  const auto pert_point = perturbed.row(pert_index);
  const auto clean_point = clean.row(clean_index);
  WeightRatioTerms terms;
  for (Eigen::Index q = 0; q < perturbed.size(); ++q) {
    terms.alpha1 += (perturbed.row(q) - pert_point).norm();
    terms.alpha3 += (perturbed.row(q) - clean_point).norm();
  }
  for (Eigen::Index o = 0; o < clean.size(); ++o) {
    terms.alpha2 += (clean.row(o) - pert_point).norm();
    terms.alpha4 += (clean.row(o) - clean_point).norm();
  }
  terms.log_ratio = -(terms.alpha1 + terms.alpha2 - terms.alpha3 - terms.alpha4) / t.value();
  terms.ratio = std::exp(terms.log_ratio);
  return terms;
}

}  // namespace softmedoid
