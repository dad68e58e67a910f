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
#include <numeric>

#include <boost/math/special_functions/beta.hpp>
#include <gtest/gtest.h>

#include "test_util.hpp"

namespace softmedoid {
namespace {

using testing::RandomAdjacency;

SmoothingConfig Smoothing(double p_plus, double p_minus, int samples = 100) {
  SmoothingConfig c;
  c.p_plus = p_plus;
  c.p_minus = p_minus;
  c.n_samples = samples;
  return c;
}

std::vector<Eigen::Index> Range(Eigen::Index n) {
  std::vector<Eigen::Index> out(static_cast<std::size_t>(n));
  std::iota(out.begin(), out.end(), Eigen::Index{0});
  return out;
}

// P(Binomial(n, p) >= k) by direct summation.
double UpperTail(int k, int n, double p) {
  double total = 0.0;
  for (int i = k; i <= n; ++i) {
    total += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) +
                      i * std::log(p) + (n - i) * std::log1p(-p));
  }
  return total;
}

TEST(SmoothingConfigTest, Validation) {
  EXPECT_NO_THROW(Smoothing(0.001, 0.4).Validate());
  EXPECT_THROW(Smoothing(1.0, 0.4).Validate(), std::invalid_argument);
  EXPECT_THROW(Smoothing(0.1, -0.1).Validate(), std::invalid_argument);
  SmoothingConfig c;
  c.n_samples = 0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  c = SmoothingConfig{};
  c.alpha = 1.0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  EXPECT_EQ(ParseSmoothingTarget("both"), SmoothingTarget::kBoth);
}

TEST(SampleAdjacencyTest, DeletionAndAdditionCountsMatchBinomialMoments) {
  Rng rng(1);
  const Eigen::Index n = 120;
  const SparseMatrix adjacency = RandomAdjacency(rng, n, 0.08);
  const double edges = static_cast<double>(adjacency.nonZeros() / 2);
  const double absent = static_cast<double>(n * (n - 1) / 2) - edges;
  const double p_plus = 0.01;
  const double p_minus = 0.4;
  const int samples = 400;
  double deleted = 0.0;
  double added = 0.0;
  for (int s = 0; s < samples; ++s) {
    Rng draw = StreamRng(7, static_cast<std::uint64_t>(s));
    const SparseMatrix sample = SampleAdjacency(adjacency, p_plus, p_minus, draw);
    ASSERT_TRUE(sample.isApprox(SparseMatrix(sample.transpose())));
    for (Eigen::Index u = 0; u < n; ++u) {
      EXPECT_EQ(sample.coeff(u, u), 0.0);
      for (Eigen::Index v = u + 1; v < n; ++v) {
        const bool before = adjacency.coeff(u, v) != 0.0;
        const bool after = sample.coeff(u, v) != 0.0;
        deleted += before && !after;
        added += !before && after;
      }
    }
  }
  const double del_sd = std::sqrt(edges * p_minus * (1 - p_minus) / samples);
  const double add_sd = std::sqrt(absent * p_plus * (1 - p_plus) / samples);
  EXPECT_NEAR(deleted / samples, p_minus * edges, 3 * del_sd);
  EXPECT_NEAR(added / samples, p_plus * absent, 3 * add_sd);
}

TEST(SampleAdjacencyTest, NearCertainAdditionCoversEveryPair) {
  // Exercises the pair-index mapping: every lower-triangle pair must appear.
  Rng rng(2);
  const SparseMatrix sample = SampleAdjacency(SparseMatrix(40, 40), 1.0 - 1e-12, 0.0, rng);
  EXPECT_EQ(sample.nonZeros(), 40 * 39);
}

TEST(SampleAdjacencyTest, ZeroProbabilitiesKeepGraph) {
  Rng rng(3);
  const SparseMatrix adjacency = RandomAdjacency(rng, 30, 0.2);
  const SparseMatrix sample = SampleAdjacency(adjacency, 0.0, 0.0, rng);
  EXPECT_TRUE(sample.isApprox(adjacency));
  EXPECT_EQ(sample.nonZeros(), adjacency.nonZeros());
}

TEST(SampleFeaturesTest, FlipRates) {
  Rng rng(4);
  Matrix features = Matrix::Zero(200, 50);
  std::bernoulli_distribution coin(0.2);
  for (Eigen::Index i = 0; i < features.size(); ++i) features.data()[i] = coin(rng) ? 1.0 : 0.0;
  const double ones = features.sum();
  const double zeros = static_cast<double>(features.size()) - ones;
  const Matrix sample = SampleFeatures(features, 0.05, 0.3, rng);
  const double removed = (features.array() * (1.0 - sample.array())).sum();
  const double switched = ((1.0 - features.array()) * sample.array()).sum();
  EXPECT_NEAR(removed, 0.3 * ones, 4 * std::sqrt(ones * 0.3 * 0.7));
  EXPECT_NEAR(switched, 0.05 * zeros, 4 * std::sqrt(zeros * 0.05 * 0.95));
}

SparseGraph SmallGraph(std::uint64_t seed) {
  SbmOptions o;
  o.n = 40;
  o.p_in = 0.2;
  o.p_out = 0.02;
  o.seed = seed;
  return SyntheticSbm(o);
}

TEST(SampleVotesTest, NoFlipsReproduceCleanPrediction) {
  const SparseGraph graph = SmallGraph(1);
  ModelConfig config;
  config.hidden = 8;
  const GnnModel model = InitModel(config, graph.features().cols(), 2, 5);
  const auto clean = Predict(Forward(model, GcnNormalize(graph.adjacency()), graph.features()));
  const VoteRecord votes = SampleVotes(model, graph, Smoothing(0.0, 0.0, 25), 3);
  for (Eigen::Index v = 0; v < graph.num_nodes(); ++v) {
    EXPECT_EQ(votes.counts(v, clean[static_cast<std::size_t>(v)]), 25);
    EXPECT_EQ(votes.counts.row(v).sum(), 25);
    EXPECT_EQ(votes.majority[static_cast<std::size_t>(v)], clean[static_cast<std::size_t>(v)]);
  }
}

TEST(SampleVotesTest, ConstantClassifierAndDeterminism) {
  const SparseGraph graph = SmallGraph(2);
  const GraphPredictor constant = [](const SparseMatrix& a, const Matrix&) {
    return std::vector<int>(static_cast<std::size_t>(a.rows()), 2);
  };
  const VoteRecord votes = SampleVotes(constant, graph, 3, Smoothing(0.01, 0.4, 50), 1);
  for (Eigen::Index v = 0; v < graph.num_nodes(); ++v) {
    EXPECT_EQ(votes.majority[static_cast<std::size_t>(v)], 2);
    EXPECT_EQ(votes.counts(v, 2), 50);
    EXPECT_DOUBLE_EQ(votes.pa_lower[v], std::pow(0.05, 1.0 / 50));
  }
  // A predictor that depends on the sample is reproducible from the seed.
  const GraphPredictor parity = [](const SparseMatrix& a, const Matrix&) {
    std::vector<int> out(static_cast<std::size_t>(a.rows()));
    for (Eigen::Index v = 0; v < a.rows(); ++v) {
      out[static_cast<std::size_t>(v)] = static_cast<int>(a.row(v).nonZeros() % 2);
    }
    return out;
  };
  const auto a = SampleVotes(parity, graph, 2, Smoothing(0.01, 0.4, 30), 9);
  const auto b = SampleVotes(parity, graph, 2, Smoothing(0.01, 0.4, 30), 9);
  EXPECT_EQ(a.counts, b.counts);
}

TEST(ClopperPearsonTest, ClosedFormsAndTailOracle) {
  EXPECT_EQ(ClopperPearsonLower(0, 100, 0.05), 0.0);
  const double all = ClopperPearsonLower(10000, 10000, 0.05);
  EXPECT_NEAR(all, std::pow(0.05, 1.0 / 10000), 1e-12);
  EXPECT_NEAR(all, 0.99970, 5e-6);
  EXPECT_LT(ClopperPearsonLower(5000, 10000, 0.05), 0.5);
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 300);
    const int k = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
    const double alpha = trial % 2 ? 0.05 : 0.01;
    const double p = ClopperPearsonLower(k, n, alpha);
    EXPECT_NEAR(p, boost::math::ibeta_inv(k, n - k + 1.0, alpha), 1e-10);
    if (p > 0.0 && p < 1.0) {
      EXPECT_NEAR(UpperTail(k, n, p), alpha, 1e-8);
    }
  }
  EXPECT_THROW(ClopperPearsonLower(5, 4, 0.05), std::invalid_argument);
}

TEST(CertifyRadiusTest, HandComputedSingleDeletion) {
  const auto cfg = Smoothing(0.001, 0.4);
  EXPECT_NEAR(WorstCaseProbability(0.9, 0.001, 0.4, 0, 1), 0.75025, 1e-12);
  EXPECT_NEAR(WorstCaseProbability(0.7, 0.001, 0.4, 0, 1), 0.25075, 1e-12);
  EXPECT_TRUE(CertifyRadius(0.9, cfg, 0, 1));
  EXPECT_FALSE(CertifyRadius(0.7, cfg, 0, 1));
  EXPECT_NEAR(WorstCaseBruteforce(0.9, 0.001, 0.4, {1}, {0}), 0.75025, 1e-12);
  EXPECT_NEAR(WorstCaseBruteforce(0.7, 0.001, 0.4, {1}, {0}), 0.25075, 1e-12);
}

TEST(CertifyRadiusTest, CertainAndHalfMass) {
  for (auto cfg : {Smoothing(0.001, 0.4), Smoothing(0.2, 0.6), Smoothing(0.3, 0.1)}) {
    for (int ra = 0; ra <= 12; ++ra) {
      for (int rd = 0; rd <= 12; ++rd) {
        EXPECT_TRUE(CertifyRadius(1.0, cfg, ra, rd)) << ra << "," << rd;
        EXPECT_FALSE(CertifyRadius(0.5, cfg, ra, rd)) << ra << "," << rd;
      }
    }
  }
}

// x' = x with `ra` zero bits switched on and `rd` one bits switched off at
// random positions.
std::pair<std::vector<int>, std::vector<int>> RandomPair(Rng& rng, int d, int ra, int rd) {
  std::vector<int> positions(static_cast<std::size_t>(d));
  std::iota(positions.begin(), positions.end(), 0);
  std::shuffle(positions.begin(), positions.end(), rng);
  std::vector<int> x(static_cast<std::size_t>(d));
  std::bernoulli_distribution coin(0.5);
  for (auto& b : x) b = coin(rng);
  for (int i = 0; i < ra; ++i) x[static_cast<std::size_t>(positions[static_cast<std::size_t>(i)])] = 0;
  for (int i = ra; i < ra + rd; ++i) x[static_cast<std::size_t>(positions[static_cast<std::size_t>(i)])] = 1;
  std::vector<int> xp = x;
  for (int i = 0; i < ra + rd; ++i) {
    auto& bit = xp[static_cast<std::size_t>(positions[static_cast<std::size_t>(i)])];
    bit = 1 - bit;
  }
  return {x, xp};
}

TEST(CertifyRadiusTest, MatchesBruteforceOracle) {
  Rng rng(6);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int instances = 0;
  for (double p_plus : {0.001, 0.2}) {
    for (double p_minus : {0.4, 0.6}) {
      const auto cfg = Smoothing(p_plus, p_minus);
      for (int ra = 0; ra <= 2; ++ra) {
        for (int rd = 0; rd <= 2; ++rd) {
          for (int rep = 0; rep < 20; ++rep) {
            const int d = std::max(ra + rd, 1) + static_cast<int>(rng() % 8);
            const auto [x, xp] = RandomPair(rng, d, ra, rd);
            const double pa = unif(rng);
            EXPECT_EQ(CertifyRadius(pa, cfg, ra, rd), CertifyBruteforce(pa, cfg, x, xp));
            EXPECT_NEAR(WorstCaseProbability(pa, p_plus, p_minus, ra, rd),
                        WorstCaseBruteforce(pa, p_plus, p_minus, x, xp), 1e-12);
            ++instances;
          }
        }
      }
    }
  }
  EXPECT_GE(instances, 500);
}

TEST(CertifyRadiusTest, BruteforceDependsOnlyOnCounts) {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const int ra = static_cast<int>(rng() % 3);
    const int rd = static_cast<int>(rng() % 3);
    const auto [x1, xp1] = RandomPair(rng, 10, ra, rd);
    const auto [x2, xp2] = RandomPair(rng, 10, ra, rd);
    EXPECT_NEAR(WorstCaseBruteforce(0.8, 0.01, 0.4, x1, xp1),
                WorstCaseBruteforce(0.8, 0.01, 0.4, x2, xp2), 1e-12);
  }
}

TEST(CertifyRadiusTest, BruteforceEdgeCases) {
  const auto cfg = Smoothing(0.001, 0.4);
  const std::vector<int> x = {1, 0, 1, 1, 0};
  EXPECT_TRUE(CertifyBruteforce(0.51, cfg, x, x));
  EXPECT_FALSE(CertifyBruteforce(0.5, cfg, x, x));
  EXPECT_THROW(CertifyBruteforce(0.9, cfg, std::vector<int>(21, 0), std::vector<int>(21, 1)),
               std::invalid_argument);
  EXPECT_THROW(CertifyBruteforce(0.9, cfg, {0, 1}, {0}), std::invalid_argument);
}

TEST(CertifyRadiusTest, Monotonicity) {
  const auto cfg = Smoothing(0.001, 0.4);
  for (double pa = 0.5; pa <= 1.0; pa += 0.01) {
    for (int ra = 0; ra <= 4; ++ra) {
      for (int rd = 0; rd <= 8; ++rd) {
        if (!CertifyRadius(pa, cfg, ra, rd)) continue;
        if (ra > 0) EXPECT_TRUE(CertifyRadius(pa, cfg, ra - 1, rd));
        if (rd > 0) EXPECT_TRUE(CertifyRadius(pa, cfg, ra, rd - 1));
        EXPECT_TRUE(CertifyRadius(std::min(1.0, pa + 0.01), cfg, ra, rd));
      }
    }
  }
}

VoteRecord SyntheticVotes(const std::vector<int>& majority, const std::vector<double>& pa) {
  VoteRecord votes;
  votes.majority = majority;
  votes.pa_lower = Eigen::Map<const Vector>(pa.data(), static_cast<Eigen::Index>(pa.size()));
  return votes;
}

TEST(CertificationGridTest, WrongNodesAndSmoothAccuracy) {
  const auto cfg = Smoothing(0.001, 0.4);
  const std::vector<int> labels = {0, 1, 1, 0, 1};
  const auto wrong = SyntheticVotes({1, 0, 0, 1, 0}, {0.99, 0.99, 0.99, 0.99, 0.99});
  EXPECT_EQ(ComputeCertificationGrid(wrong, labels, Range(5), cfg, 3, 3).certified.sum(), 0);
  const auto votes = SyntheticVotes({0, 1, 0, 0, 1}, {0.999, 0.95, 0.9, 0.8, 0.7});
  const auto grid = ComputeCertificationGrid(votes, labels, Range(5), cfg, 3, 6);
  EXPECT_DOUBLE_EQ(grid.at(0, 0), Accuracy(votes.majority, labels, Range(5)));
  for (int ra = 0; ra <= 3; ++ra) {
    for (int rd = 0; rd <= 6; ++rd) {
      if (ra < 3) EXPECT_LE(grid.at(ra + 1, rd), grid.at(ra, rd));
      if (rd < 6) EXPECT_LE(grid.at(ra, rd + 1), grid.at(ra, rd));
    }
  }
}

TEST(CertificationGridTest, FullGridCoversEveryCertifiedRadius) {
  const auto cfg = Smoothing(0.001, 0.4);
  const std::vector<int> labels = {0, 0, 0};
  const auto votes = SyntheticVotes({0, 0, 0}, {0.9997, 0.99, 0.9});
  const auto grid = FullCertificationGrid(votes, labels, Range(3), cfg);
  EXPECT_GT(grid.certified.row(grid.max_ra).sum(), 0);
  EXPECT_GT(grid.certified.col(grid.max_rd).sum(), 0);
  const auto bigger = ComputeCertificationGrid(votes, labels, Range(3), cfg, grid.max_ra + 2,
                                               grid.max_rd + 2);
  EXPECT_EQ(AccumulatedCertifications(grid), AccumulatedCertifications(bigger));
}

TEST(AccumulatedCertificationsTest, ThreeEntryGrid) {
  CertificationGrid grid;
  grid.max_ra = 1;
  grid.max_rd = 1;
  grid.num_nodes = 10;
  grid.certified = Eigen::MatrixXi::Zero(2, 2);
  grid.certified(0, 0) = 8;
  grid.certified(1, 0) = 6;
  grid.certified(0, 1) = 7;
  EXPECT_EQ(AccumulatedCertifications(grid), 1.3);
  EXPECT_EQ(AccumulatedAdditionCertifications(grid), 0.6);
  EXPECT_EQ(AccumulatedDeletionCertifications(grid), 0.7);
  grid.certified.setZero();
  EXPECT_EQ(AccumulatedCertifications(grid), 0.0);
}

TEST(AverageCertifiableRadiusTest, Arithmetic) {
  EXPECT_EQ(AverageCertifiableRadius(std::vector<int>{2, 4}), 3.0);
  EXPECT_THROW(AverageCertifiableRadius(std::vector<int>{}), std::invalid_argument);
  // Correct nodes certified only at radius 0.
  const auto cfg = Smoothing(0.001, 0.4);
  const auto votes = SyntheticVotes({0, 1}, {0.55, 0.6});
  EXPECT_EQ(AverageCertifiableRadius(votes, {0, 1}, Range(2), cfg, RadiusAxis::kAddition), 0.0);
  EXPECT_EQ(AverageCertifiableRadius(votes, {0, 1}, Range(2), cfg, RadiusAxis::kDeletion), 0.0);
  EXPECT_THROW(AverageCertifiableRadius(votes, {1, 0}, Range(2), cfg, RadiusAxis::kDeletion),
               std::invalid_argument);
}

TEST(AverageCertifiableRadiusTest, MaxRadiusIsLastCertified) {
  const auto cfg = Smoothing(0.001, 0.4);
  for (double pa : {0.6, 0.9, 0.99, 0.9997}) {
    for (auto axis : {RadiusAxis::kAddition, RadiusAxis::kDeletion}) {
      const int r = MaxCertifiedRadius(pa, cfg, axis);
      const bool add = axis == RadiusAxis::kAddition;
      EXPECT_TRUE(CertifyRadius(pa, cfg, add ? r : 0, add ? 0 : r));
      EXPECT_FALSE(CertifyRadius(pa, cfg, add ? r + 1 : 0, add ? 0 : r + 1));
    }
  }
}

TEST(MetricsTest, DegreeBinsPartitionNodes) {
  const auto cfg = Smoothing(0.001, 0.4);
  std::vector<int> labels(12, 0);
  std::vector<double> pa;
  for (int i = 0; i < 12; ++i) pa.push_back(0.6 + 0.03 * i);
  const auto votes = SyntheticVotes(std::vector<int>(12, 0), pa);
  std::vector<Eigen::Index> degrees = {5, 1, 3, 3, 9, 2, 7, 1, 4, 6, 8, 2};
  const auto bins = DegreeBinnedCertifications(votes, labels, Range(12), degrees, cfg, 5);
  ASSERT_EQ(bins.size(), 5U);
  std::size_t total = 0;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    total += bins[b].size;
    EXPECT_LE(bins[b].min_degree, bins[b].max_degree);
    if (b > 0) EXPECT_LE(bins[b - 1].max_degree, bins[b].min_degree);
  }
  EXPECT_EQ(total, 12U);
  const auto metrics = ComputeCertificationMetrics(votes, std::vector<int>(12, 1), labels,
                                                   Range(12), cfg);
  EXPECT_EQ(metrics.acc_base, 0.0);
  EXPECT_EQ(metrics.acc_smooth, 1.0);
  EXPECT_GE(metrics.ac_add_and_del, metrics.ac_del);
}

TEST(MetricsTest, SmoothAccuracyAbstainsBelowHalf) {
  const auto cfg = Smoothing(0.001, 0.4);
  const auto votes = SyntheticVotes({0, 0, 1, 0}, {0.9, 0.45, 0.9, 0.5});
  const auto metrics =
      ComputeCertificationMetrics(votes, {0, 0, 0, 0}, {0, 0, 0, 0}, Range(4), cfg);
  EXPECT_EQ(metrics.acc_base, 1.0);
  EXPECT_EQ(metrics.acc_smooth, 0.25);
}

}  // namespace
}  // namespace softmedoid
