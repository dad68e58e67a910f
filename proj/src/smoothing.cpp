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


#include "softmedoid/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

namespace softmedoid {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double SafeLog(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

// count * log_value with 0 * -inf == 0.
double Term(int count, double log_value) {
  return count == 0 ? 0.0 : count * log_value;
}

double LogBinomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

struct Region {
  double log_ratio;  // log P_x' - log P_x
  double px;
  double px_prime;
};

// Greedy Neyman-Pearson allocation of pa_lower over the regions, lowest
// likelihood ratio first. For pa_lower > 1/2 the unallocated mass 1 - pa_lower
// is placed from the top instead: subtracting the allocated mass from 1 would
// cancel away regions with tiny P_x but large P_x'.
double FillWorstCase(std::vector<Region> regions, double pa_lower) {
  std::sort(regions.begin(), regions.end(),
            [](const Region& a, const Region& b) { return a.log_ratio < b.log_ratio; });
  const auto take = [](const Region& r, double& budget) {
    if (r.px <= budget) {
      budget -= r.px;
      return r.px_prime;
    }
    const double part = budget * std::exp(r.log_ratio);
    budget = 0.0;
    return part;
  };
  if (pa_lower <= 0.5) {
    double budget = pa_lower;
    double worst = 0.0;
    for (auto it = regions.begin(); it != regions.end() && budget > 0.0; ++it) {
      worst += take(*it, budget);
    }
    return worst;
  }
  double budget = 1.0 - pa_lower;
  double excluded = 0.0;
  for (auto it = regions.rbegin(); it != regions.rend() && budget > 0.0; ++it) {
    excluded += take(*it, budget);
  }
  double total = 0.0;
  for (const Region& r : regions) total += r.px_prime;
  return total - excluded;
}

void CheckProbabilities(double p_plus, double p_minus) {
  if (!(p_plus >= 0.0 && p_plus < 1.0 && p_minus >= 0.0 && p_minus < 1.0)) {
    throw std::invalid_argument("flip probabilities must lie in [0, 1)");
  }
}

// Lower-triangle pair index k <-> (u, v) with u > v, k = u (u - 1) / 2 + v.
std::pair<Eigen::Index, Eigen::Index> PairFromIndex(long long k) {
  auto u = static_cast<long long>((1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(k))) / 2.0);
  while (u * (u - 1) / 2 > k) --u;
  while ((u + 1) * u / 2 <= k) ++u;
  return {static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(k - u * (u - 1) / 2)};
}

std::vector<int> RadiiOfCorrect(const VoteRecord& votes, const std::vector<int>& labels,
                                const std::vector<Eigen::Index>& nodes,
                                const SmoothingConfig& config, RadiusAxis axis) {
  std::vector<int> radii;
  for (Eigen::Index v : nodes) {
    const auto i = static_cast<std::size_t>(v);
    if (votes.majority.at(i) != labels.at(i)) continue;
    radii.push_back(MaxCertifiedRadius(votes.pa_lower[v], config, axis));
  }
  return radii;
}

double GridFraction(const CertificationGrid& grid, long long count) {
  if (grid.num_nodes == 0) throw std::invalid_argument("grid over zero nodes");
  return static_cast<double>(count) / static_cast<double>(grid.num_nodes);
}

}  // namespace

std::string SmoothingTargetName(SmoothingTarget target) {
  switch (target) {
    case SmoothingTarget::kEdges: return "edges";
    case SmoothingTarget::kFeatures: return "features";
    case SmoothingTarget::kBoth: return "both";
  }
  return "unknown";
}

SmoothingTarget ParseSmoothingTarget(const std::string& name) {
  for (auto t : {SmoothingTarget::kEdges, SmoothingTarget::kFeatures, SmoothingTarget::kBoth}) {
    if (SmoothingTargetName(t) == name) return t;
  }
  throw std::invalid_argument("unknown smoothing target '" + name + "'");
}

void SmoothingConfig::Validate() const {
  CheckProbabilities(p_plus, p_minus);
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
}

SparseMatrix SampleAdjacency(const SparseMatrix& adjacency, double p_plus, double p_minus,
                             Rng& rng) {
  CheckProbabilities(p_plus, p_minus);
  const Eigen::Index n = adjacency.rows();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Eigen::Triplet<double>> kept;
  kept.reserve(static_cast<std::size_t>(adjacency.nonZeros()) + 16);
  for (Eigen::Index u = 0; u < n; ++u) {
    for (SparseMatrix::InnerIterator it(adjacency, u); it; ++it) {
      if (it.col() <= u) continue;
      if (p_minus > 0.0 && unif(rng) < p_minus) continue;
      kept.emplace_back(u, it.col(), it.value());
      kept.emplace_back(it.col(), u, it.value());
    }
  }
  if (p_plus > 0.0) {
    const long long pairs = static_cast<long long>(n) * (n - 1) / 2;
    std::geometric_distribution<long long> skip(p_plus);
    for (long long k = skip(rng); k < pairs; k += 1 + skip(rng)) {
      const auto [u, v] = PairFromIndex(k);
      if (adjacency.coeff(u, v) != 0.0) continue;
      kept.emplace_back(u, v, 1.0);
      kept.emplace_back(v, u, 1.0);
    }
  }
  SparseMatrix out(n, n);
  out.setFromTriplets(kept.begin(), kept.end());
  return out;
}

Matrix SampleFeatures(const Matrix& features, double p_plus, double p_minus, Rng& rng) {
  CheckProbabilities(p_plus, p_minus);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix out = (features.array() != 0.0).cast<double>();
  // Column-major storage order is the flat index used for skipping.
  if (p_minus > 0.0) {
    for (Eigen::Index k = 0; k < out.size(); ++k) {
      if (out.data()[k] != 0.0 && unif(rng) < p_minus) out.data()[k] = 0.0;
    }
  }
  if (p_plus > 0.0) {
    std::geometric_distribution<long long> skip(p_plus);
    for (long long k = skip(rng); k < out.size(); k += 1 + skip(rng)) {
      if (features.data()[k] == 0.0) out.data()[k] = 1.0;
    }
  }
  return out;
}

VoteRecord SampleVotes(const GraphPredictor& predictor, const SparseGraph& graph,
                       int num_classes, const SmoothingConfig& config, std::uint64_t seed) {
  config.Validate();
  if (num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");
  const Eigen::Index n = graph.num_nodes();
  const bool edges = config.target != SmoothingTarget::kFeatures;
  const bool feats = config.target != SmoothingTarget::kEdges;
  VoteRecord votes;
  votes.n_samples = config.n_samples;
  votes.counts = Eigen::MatrixXi::Zero(n, num_classes);
  for (int s = 0; s < config.n_samples; ++s) {
    Rng rng = StreamRng(seed, static_cast<std::uint64_t>(s));
    const SparseMatrix adjacency =
        edges ? SampleAdjacency(graph.adjacency(), config.p_plus, config.p_minus, rng)
              : graph.adjacency();
    const Matrix features =
        feats ? SampleFeatures(graph.features(), config.p_plus, config.p_minus, rng)
              : graph.features();
    const std::vector<int> predicted = predictor(adjacency, features);
    if (static_cast<Eigen::Index>(predicted.size()) != n) {
      throw std::invalid_argument("predictor returned the wrong number of nodes");
    }
    for (Eigen::Index v = 0; v < n; ++v) {
      const int c = predicted[static_cast<std::size_t>(v)];
      if (c < 0 || c >= num_classes) throw std::invalid_argument("predicted class out of range");
      ++votes.counts(v, c);
    }
  }
  votes.majority.resize(static_cast<std::size_t>(n));
  votes.pa_lower.resize(n);
  for (Eigen::Index v = 0; v < n; ++v) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < num_classes; ++c) {
      if (votes.counts(v, c) > votes.counts(v, best)) best = c;
    }
    votes.majority[static_cast<std::size_t>(v)] = static_cast<int>(best);
    votes.pa_lower[v] = ClopperPearsonLower(votes.counts(v, best), config.n_samples, config.alpha);
  }
  return votes;
}

VoteRecord SampleVotes(const GnnModel& model, const SparseGraph& graph,
                       const SmoothingConfig& config, std::uint64_t seed) {
  const GraphPredictor predictor = [&model](const SparseMatrix& adjacency,
                                            const Matrix& features) {
    return Predict(Forward(model, BuildMessageMatrix(adjacency, model.config.message), features));
  };
  return SampleVotes(predictor, graph, static_cast<int>(model.num_classes()), config, seed);
}

double ClopperPearsonLower(int count, int n, double alpha) {
  if (n < 1 || count < 0 || count > n) throw std::invalid_argument("need 0 <= count <= n, n >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (count == 0) return 0.0;
  // P(Binomial(n, p) >= count) = I_p(count, n - count + 1), increasing in p.
  const double a = count;
  const double b = n - count + 1.0;
  double lo = 0.0;
  double hi = 1.0;
  for (int iter = 0; iter < 200 && hi - lo > 0.0; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (boost::math::ibeta(a, b, mid) < alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double WorstCaseProbability(double pa_lower, double p_plus, double p_minus, int r_a, int r_d) {
  CheckProbabilities(p_plus, p_minus);
  if (r_a < 0 || r_d < 0) throw std::invalid_argument("radii must be >= 0");
  if (r_a == 0 && r_d == 0) return pa_lower;
  const double on_x_add = SafeLog(p_plus);        // absent at x, present in sample
  const double off_x_add = SafeLog(1.0 - p_plus);
  const double on_x_del = SafeLog(1.0 - p_minus);  // present at x, present in sample
  const double off_x_del = SafeLog(p_minus);
  std::vector<Region> regions;
  regions.reserve(static_cast<std::size_t>((r_a + 1) * (r_d + 1)));
  // i of the r_a bits present only in x' and j of the r_d bits present only
  // in x are on in the sample.
  for (int i = 0; i <= r_a; ++i) {
    for (int j = 0; j <= r_d; ++j) {
      const double log_c = LogBinomial(r_a, i) + LogBinomial(r_d, j);
      const double log_px = log_c + Term(i, on_x_add) + Term(r_a - i, off_x_add) +
                            Term(j, on_x_del) + Term(r_d - j, off_x_del);
      const double log_pxp = log_c + Term(i, on_x_del) + Term(r_a - i, off_x_del) +
                             Term(j, on_x_add) + Term(r_d - j, off_x_add);
      if (log_px == kNegInf) continue;
      regions.push_back({log_pxp - log_px, std::exp(log_px), std::exp(log_pxp)});
    }
  }
  return FillWorstCase(std::move(regions), pa_lower);
}

bool CertifyRadius(double pa_lower, const SmoothingConfig& config, int r_a, int r_d) {
  // The worst case never exceeds pa_lower; checking first keeps rounding in
  // the sums from certifying a non-majority.
  return pa_lower > 0.5 &&
         WorstCaseProbability(pa_lower, config.p_plus, config.p_minus, r_a, r_d) > 0.5;
}

double WorstCaseBruteforce(double pa_lower, double p_plus, double p_minus,
                           const std::vector<int>& x_bits, const std::vector<int>& x_prime_bits) {
  CheckProbabilities(p_plus, p_minus);
  if (x_bits.size() != x_prime_bits.size()) throw std::invalid_argument("bit vectors differ in length");
  if (x_bits.size() > 20) throw std::invalid_argument("brute force supports at most 20 bits");
  const std::size_t d = x_bits.size();
  // P(sample bit on | clean bit)
  const auto on = [&](int bit) { return bit != 0 ? 1.0 - p_minus : p_plus; };
  std::vector<Region> regions;
  regions.reserve(std::size_t{1} << d);
  for (std::uint32_t z = 0; z < (std::uint32_t{1} << d); ++z) {
    double px = 1.0;
    double pxp = 1.0;
    for (std::size_t b = 0; b < d; ++b) {
      const bool set = (z >> b) & 1U;
      px *= set ? on(x_bits[b]) : 1.0 - on(x_bits[b]);
      pxp *= set ? on(x_prime_bits[b]) : 1.0 - on(x_prime_bits[b]);
    }
    if (px == 0.0) continue;
    regions.push_back({SafeLog(pxp) - std::log(px), px, pxp});
  }
  return FillWorstCase(std::move(regions), pa_lower);
}

bool CertifyBruteforce(double pa_lower, const SmoothingConfig& config,
                       const std::vector<int>& x_bits, const std::vector<int>& x_prime_bits) {
  return pa_lower > 0.5 &&
         WorstCaseBruteforce(pa_lower, config.p_plus, config.p_minus, x_bits, x_prime_bits) > 0.5;
}

int MaxCertifiedRadius(double pa_lower, const SmoothingConfig& config, RadiusAxis axis, int cap) {
  const auto certified = [&](int r) {
    return axis == RadiusAxis::kAddition ? CertifyRadius(pa_lower, config, r, 0)
                                         : CertifyRadius(pa_lower, config, 0, r);
  };
  if (!certified(0)) return 0;
  int r = 0;
  while (r < cap && certified(r + 1)) ++r;
  return r;
}

CertificationGrid ComputeCertificationGrid(const VoteRecord& votes, const std::vector<int>& labels,
                                           const std::vector<Eigen::Index>& nodes,
                                           const SmoothingConfig& config, int max_ra, int max_rd) {
  if (nodes.empty()) throw std::invalid_argument("certification grid over an empty node set");
  if (max_ra < 0 || max_rd < 0) throw std::invalid_argument("radii must be >= 0");
  CertificationGrid grid;
  grid.max_ra = max_ra;
  grid.max_rd = max_rd;
  grid.certified = Eigen::MatrixXi::Zero(max_ra + 1, max_rd + 1);
  grid.num_nodes = nodes.size();
  for (Eigen::Index v : nodes) {
    const auto i = static_cast<std::size_t>(v);
    if (votes.majority.at(i) != labels.at(i)) continue;
    const double pa = votes.pa_lower[v];
    // Certificates are nested, so each row stops at its first failure.
    for (int ra = 0; ra <= max_ra; ++ra) {
      int rd = 0;
      for (; rd <= max_rd && CertifyRadius(pa, config, ra, rd); ++rd) ++grid.certified(ra, rd);
      if (rd == 0) break;
    }
  }
  return grid;
}

CertificationGrid FullCertificationGrid(const VoteRecord& votes, const std::vector<int>& labels,
                                        const std::vector<Eigen::Index>& nodes,
                                        const SmoothingConfig& config) {
  int max_ra = 0;
  int max_rd = 0;
  for (int r : RadiiOfCorrect(votes, labels, nodes, config, RadiusAxis::kAddition)) {
    max_ra = std::max(max_ra, r);
  }
  for (int r : RadiiOfCorrect(votes, labels, nodes, config, RadiusAxis::kDeletion)) {
    max_rd = std::max(max_rd, r);
  }
  return ComputeCertificationGrid(votes, labels, nodes, config, max_ra, max_rd);
}

Matrix CertificationGrid::Ratios() const {
  return certified.cast<double>() / static_cast<double>(num_nodes);
}

double AccumulatedCertifications(const CertificationGrid& grid) {
  return GridFraction(grid, grid.certified.sum() - grid.certified(0, 0));
}

double AccumulatedAdditionCertifications(const CertificationGrid& grid) {
  return GridFraction(grid, grid.certified.col(0).sum() - grid.certified(0, 0));
}

double AccumulatedDeletionCertifications(const CertificationGrid& grid) {
  return GridFraction(grid, grid.certified.row(0).sum() - grid.certified(0, 0));
}

double AverageCertifiableRadius(const std::vector<int>& radii) {
  if (radii.empty()) throw std::invalid_argument("no correctly classified nodes");
  double total = 0.0;
  for (int r : radii) total += r;
  return total / static_cast<double>(radii.size());
}

double AverageCertifiableRadius(const VoteRecord& votes, const std::vector<int>& labels,
                                const std::vector<Eigen::Index>& nodes,
                                const SmoothingConfig& config, RadiusAxis axis) {
  return AverageCertifiableRadius(RadiiOfCorrect(votes, labels, nodes, config, axis));
}

CertificationMetrics ComputeCertificationMetrics(const VoteRecord& votes,
                                                 const std::vector<int>& base_predictions,
                                                 const std::vector<int>& labels,
                                                 const std::vector<Eigen::Index>& nodes,
                                                 const SmoothingConfig& config) {
  CertificationMetrics m;
  const CertificationGrid grid = FullCertificationGrid(votes, labels, nodes, config);
  m.ac_add_and_del = AccumulatedCertifications(grid);
  m.ac_add = AccumulatedAdditionCertifications(grid);
  m.ac_del = AccumulatedDeletionCertifications(grid);
  const auto radii_a = RadiiOfCorrect(votes, labels, nodes, config, RadiusAxis::kAddition);
  const auto radii_d = RadiiOfCorrect(votes, labels, nodes, config, RadiusAxis::kDeletion);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m.r_bar_a = radii_a.empty() ? nan : AverageCertifiableRadius(radii_a);
  m.r_bar_d = radii_d.empty() ? nan : AverageCertifiableRadius(radii_d);
  m.acc_base = Accuracy(base_predictions, labels, nodes);
  m.acc_smooth = grid.at(0, 0);
  return m;
}

std::vector<DegreeBin> DegreeBinnedCertifications(const VoteRecord& votes,
                                                  const std::vector<int>& labels,
                                                  const std::vector<Eigen::Index>& nodes,
                                                  const std::vector<Eigen::Index>& degrees,
                                                  const SmoothingConfig& config, int bins) {
  if (bins < 1) throw std::invalid_argument("bins must be >= 1");
  std::vector<Eigen::Index> order = nodes;
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const auto da = degrees.at(static_cast<std::size_t>(a));
    const auto db = degrees.at(static_cast<std::size_t>(b));
    return da != db ? da < db : a < b;
  });
  std::vector<DegreeBin> out;
  const std::size_t m = order.size();
  for (int b = 0; b < bins; ++b) {
    const std::size_t begin = m * static_cast<std::size_t>(b) / static_cast<std::size_t>(bins);
    const std::size_t end = m * static_cast<std::size_t>(b + 1) / static_cast<std::size_t>(bins);
    if (begin == end) continue;
    const std::vector<Eigen::Index> members(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                            order.begin() + static_cast<std::ptrdiff_t>(end));
    const CertificationGrid grid = FullCertificationGrid(votes, labels, members, config);
    DegreeBin bin;
    bin.min_degree = degrees[static_cast<std::size_t>(members.front())];
    bin.max_degree = degrees[static_cast<std::size_t>(members.back())];
    bin.size = members.size();
    bin.ac_add_and_del = AccumulatedCertifications(grid);
    bin.ac_add = AccumulatedAdditionCertifications(grid);
    bin.ac_del = AccumulatedDeletionCertifications(grid);
    out.push_back(bin);
  }
  return out;
}

}  // namespace softmedoid
