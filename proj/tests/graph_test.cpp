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

#include "softmedoid/graph.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

namespace softmedoid {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("softmedoid_graph_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path Write(const std::string& name, const std::string& contents) const {
    const fs::path p = path_ / name;
    std::ofstream(p) << contents;
    return p;
  }

 private:
  fs::path path_;
};

SparseGraph FromEdges(Eigen::Index n, const std::vector<Edge>& edges,
                      std::vector<int> labels = {}) {
  return SparseGraph(BuildAdjacency(n, edges), Matrix::Zero(n, 1), std::move(labels));
}

TEST(LoadGraphTest, EmptyEdgeFile) {
  TempDir dir;
  const auto g = LoadGraph(dir.Write("e.txt", ""), dir.Write("f.csv", "1,0\n0,1\n1,1\n"));
  EXPECT_EQ(g.num_nodes(), 3);
  EXPECT_EQ(g.num_edges(), 0);
  EXPECT_FALSE(g.has_labels());
}

TEST(LoadGraphTest, SymmetrizesAndCollapsesDuplicates) {
  TempDir dir;
  const auto g = LoadGraph(dir.Write("e.txt", "0 1\n1 0\n"), dir.Write("f.csv", "1\n2\n"));
  EXPECT_EQ(g.num_edges(), 1);
  EXPECT_TRUE(g.HasEdge(0, 1));
  EXPECT_TRUE(g.HasEdge(1, 0));
}

TEST(LoadGraphTest, PathDegreesAndLabels) {
  TempDir dir;
  const auto g = LoadGraph(dir.Write("e.txt", "0 1\n1 2\n2 3 1.0\n3 4\n"),
                           dir.Write("f.csv", "0\n0\n0\n0\n0\n"),
                           dir.Write("l.csv", "0,0\n1,1\n2,0\n3,1\n4,2\n"));
  EXPECT_EQ(g.Degrees(), (std::vector<Eigen::Index>{1, 2, 2, 2, 1}));
  EXPECT_EQ(g.num_classes(), 3);
  EXPECT_EQ(g.labels()[4], 2);
}

TEST(LoadGraphTest, ReportsLineNumbers) {
  TempDir dir;
  const auto features = dir.Write("f.csv", "0\n0\n0\n");
  try {
    LoadGraph(dir.Write("e.txt", "0 1\n# comment\n1 x\n"), features);
    FAIL() << "expected a parse error";
  } catch (const GraphFormatError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  try {
    LoadGraph(dir.Write("e2.txt", "0 1 2.0\n2 1\n1 0 3.0\n"), features);
    FAIL() << "expected a weight conflict";
  } catch (const GraphFormatError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("asymmetric weight conflict"), std::string::npos);
  }
  EXPECT_THROW(LoadGraph(dir.Write("e3.txt", "0 7\n"), features), GraphFormatError);
  EXPECT_THROW(LoadGraph(dir.Write("e4.txt", ""), dir.Write("f2.csv", "1,2\n3\n")),
               GraphFormatError);
  EXPECT_THROW(LoadGraph(dir.Write("e5.txt", ""), features, dir.Write("l.csv", "0,1\n")),
               GraphFormatError);
}

TEST(SparseGraphTest, RejectsAsymmetricAdjacency) {
  SparseMatrix a(2, 2);
  a.insert(0, 1) = 1.0;
  EXPECT_THROW(SparseGraph(a, Matrix::Zero(2, 1)), std::invalid_argument);
}

TEST(RowNormalizeTest, UnitMassRows) {
  Matrix f(3, 3);
  f << 1, 1, 0, 0, 0, 0, 1, 1, 2;
  const Matrix r = RowNormalizeL1(f);
  EXPECT_DOUBLE_EQ(r.row(0).sum(), 1.0);
  EXPECT_DOUBLE_EQ(r.row(1).sum(), 0.0);
  EXPECT_DOUBLE_EQ(r(2, 2), 0.5);
}

TEST(LargestConnectedComponentTest, KeepsLargest) {
  const auto g = FromEdges(5, {{0, 1}, {1, 2}, {3, 4}}, {0, 1, 0, 1, 1});
  const auto lcc = LargestConnectedComponent(g);
  EXPECT_EQ(lcc.graph.num_nodes(), 3);
  EXPECT_EQ(lcc.graph.num_edges(), 2);
  EXPECT_EQ(lcc.index_map, (std::vector<Eigen::Index>{0, 1, 2, -1, -1}));
  EXPECT_EQ(lcc.graph.labels(), (std::vector<int>{0, 1, 0}));
}

TEST(LargestConnectedComponentTest, ConnectedGraphIsIdentity) {
  const auto g = FromEdges(4, {{0, 1}, {1, 2}, {2, 3}});
  const auto lcc = LargestConnectedComponent(g);
  EXPECT_EQ(lcc.index_map, (std::vector<Eigen::Index>{0, 1, 2, 3}));
  EXPECT_TRUE(lcc.graph.adjacency().isApprox(g.adjacency(), 0.0));
}

TEST(LargestConnectedComponentTest, TiesGoToComponentWithNodeZero) {
  // {0,3} and {1,2} have equal size; node 0's component wins.
  const auto lcc = LargestConnectedComponent(FromEdges(4, {{1, 2}, {0, 3}}));
  EXPECT_EQ(lcc.index_map, (std::vector<Eigen::Index>{0, -1, -1, 1}));
  // Idempotent.
  const auto twice = LargestConnectedComponent(lcc.graph);
  EXPECT_EQ(twice.graph.num_nodes(), lcc.graph.num_nodes());
  EXPECT_TRUE(twice.graph.adjacency().isApprox(lcc.graph.adjacency(), 0.0));
}

TEST(GcnNormalizeTest, Examples) {
  const Matrix two = Matrix(GcnNormalize(FromEdges(2, {{0, 1}}).adjacency()));
  EXPECT_TRUE(two.isApprox(Matrix::Constant(2, 2, 0.5), 1e-15));
  const Matrix one = Matrix(GcnNormalize(FromEdges(1, {}).adjacency()));
  EXPECT_EQ(one(0, 0), 1.0);
}

TEST(GcnNormalizeTest, SymmetricNonNegativeWithPositiveDiagonal) {
  const auto g = SyntheticSbm({60, 3, 0.2, 0.02, 4, 1.0, 1.0, 3});
  const Matrix a = Matrix(GcnNormalize(g.adjacency()));
  EXPECT_EQ(a, a.transpose());
  EXPECT_GE(a.minCoeff(), 0.0);
  EXPECT_GT(a.diagonal().minCoeff(), 0.0);
  // Entry formula: (A + I)_ij / sqrt(d_i d_j).
  const Matrix tilde = Matrix(g.adjacency()) + Matrix::Identity(60, 60);
  const Vector d = tilde.rowwise().sum();
  for (Eigen::Index i = 0; i < 60; ++i)
    for (Eigen::Index j = 0; j < 60; ++j)
      EXPECT_NEAR(a(i, j), tilde(i, j) / std::sqrt(d[i] * d[j]), 1e-15);
}

TEST(GdcDiffusionTest, TwoNodeClosedForm) {
  const SparseMatrix a = GcnNormalize(FromEdges(2, {{0, 1}}).adjacency());
  const Matrix s = PersonalizedPageRank(a, 0.15);
  Matrix expected(2, 2);
  expected << 0.575, 0.425, 0.425, 0.575;
  EXPECT_LE((s - expected).cwiseAbs().maxCoeff(), 1e-5);

  const Matrix k1 = Matrix(TopKPerRow(s, 1));
  EXPECT_GT(k1(0, 0), 0.0);
  EXPECT_EQ(k1(0, 1), 0.0);
  EXPECT_EQ(k1(1, 0), 0.0);
  EXPECT_GT(k1(1, 1), 0.0);
  EXPECT_TRUE(Matrix(GdcDiffusion(a, 0.15, 1)).isApprox(Matrix::Identity(2, 2), 1e-12));

  const Matrix full = Matrix(GdcDiffusion(a, 0.15, 2));
  EXPECT_NEAR(full(0, 1), 0.425, 1e-5);  // rows already sum to one
}

TEST(GdcDiffusionTest, TeleportLimitIsIdentity) {
  const auto g = SyntheticSbm({20, 2, 0.4, 0.1, 2, 1.0, 1.0, 5});
  const Matrix s = PersonalizedPageRank(GcnNormalize(g.adjacency()), 0.999);
  EXPECT_LE((s - Matrix::Identity(20, 20)).cwiseAbs().maxCoeff(), 2e-3);
}

TEST(GdcDiffusionTest, ResidualAndSparsity) {
  const auto g = SyntheticSbm({80, 2, 0.1, 0.01, 2, 1.0, 1.0, 6});
  const SparseMatrix a = GcnNormalize(g.adjacency());
  const double alpha = 0.15;
  const Matrix s = PersonalizedPageRank(a, alpha);
  const Matrix residual =
      (Matrix::Identity(80, 80) - (1 - alpha) * Matrix(a)) * s - alpha * Matrix::Identity(80, 80);
  EXPECT_LE(residual.cwiseAbs().maxCoeff(), 1e-5);

  const SparseMatrix gdc = GdcDiffusion(a, alpha, 8);
  for (Eigen::Index r = 0; r < 80; ++r) {
    EXPECT_LE(gdc.outerIndexPtr()[r + 1] - gdc.outerIndexPtr()[r], 8);
  }
}

TEST(GdcDiffusionTest, RejectsBadAlpha) {
  const SparseMatrix a = GcnNormalize(FromEdges(2, {{0, 1}}).adjacency());
  EXPECT_THROW(PersonalizedPageRank(a, 0.0), std::invalid_argument);
  EXPECT_THROW(PersonalizedPageRank(a, 1.0), std::invalid_argument);
}

TEST(SplitNodesTest, Sizes) {
  const auto g = SyntheticSbm({200, 2, 0.05, 0.005, 4, 1.0, 1.0, 1});
  const auto split = SplitNodes(g, 20, 3);
  EXPECT_EQ(split.train.size(), 40u);
  EXPECT_EQ(split.val.size(), 40u);
  EXPECT_EQ(split.test.size(), 120u);
  EXPECT_TRUE(split.warnings.empty());

  std::set<Eigen::Index> all(split.train.begin(), split.train.end());
  all.insert(split.val.begin(), split.val.end());
  all.insert(split.test.begin(), split.test.end());
  EXPECT_EQ(all.size(), 200u);

  std::vector<int> per_class(2, 0);
  for (auto v : split.train) ++per_class[static_cast<std::size_t>(g.labels()[v])];
  EXPECT_EQ(per_class, (std::vector<int>{20, 20}));
}

TEST(SplitNodesTest, DeterministicAndSmallClasses) {
  const auto g = SyntheticSbm({30, 3, 0.1, 0.01, 3, 1.0, 1.0, 2});
  const auto a = SplitNodes(g, 1, 9);
  const auto b = SplitNodes(g, 1, 9);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
  EXPECT_EQ(a.train.size(), 3u);

  const auto small = SplitNodes(g, 8, 9);  // 10 nodes per class
  EXPECT_EQ(small.train.size(), 15u);
  EXPECT_EQ(small.warnings.size(), 3u);
}

TEST(SyntheticSbmTest, Examples) {
  const auto no_inter = SyntheticSbm({100, 2, 0.1, 0.0, 2, 1.0, 1.0, 4});
  for (Eigen::Index r = 0; r < 100; ++r) {
    for (SparseMatrix::InnerIterator it(no_inter.adjacency(), r); it; ++it) {
      EXPECT_EQ(no_inter.labels()[r], no_inter.labels()[it.col()]);
    }
  }
  EXPECT_EQ(SyntheticSbm({50, 2, 0.0, 0.0, 2, 1.0, 1.0, 4}).num_edges(), 0);
  EXPECT_THROW(SyntheticSbm({50, 2, 0.0, 0.1, 2, 1.0, 1.0, 4}), std::invalid_argument);
}

TEST(SyntheticSbmTest, InterClassEdgeCountMatchesBinomialMoments) {
  // 100 * 100 inter-class pairs at p = 0.005: mean 50, sigma ~ 7.05.
  const double mean = 50.0, sigma = std::sqrt(10000 * 0.005 * 0.995);
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = SyntheticSbm({200, 2, 0.05, 0.005, 2, 1.0, 1.0, seed});
    int inter = 0;
    for (Eigen::Index r = 0; r < 200; ++r)
      for (SparseMatrix::InnerIterator it(g.adjacency(), r); it; ++it)
        if (r < it.col() && g.labels()[r] != g.labels()[it.col()]) ++inter;
    EXPECT_NEAR(inter, mean, 3 * sigma);
    total += inter;
  }
  EXPECT_NEAR(total / 10, mean, 3 * sigma / std::sqrt(10.0));
}

TEST(SyntheticSbmTest, FeatureScaleSpread) {
  SbmOptions plain{60, 2, 0.1, 0.01, 3, 1.0, 1.0, 7};
  SbmOptions spread = plain;
  spread.feature_scale_spread = 1.0;
  const auto a = SyntheticSbm(plain);
  const auto b = SyntheticSbm(spread);
  EXPECT_TRUE(a.adjacency().isApprox(b.adjacency()));
  // Rows stay parallel; the log-scales look like a standard normal sample.
  double sum = 0.0, sum_sq = 0.0;
  for (Eigen::Index v = 0; v < 60; ++v) {
    const double scale = b.features().row(v).norm() / a.features().row(v).norm();
    EXPECT_NEAR((b.features().row(v) - scale * a.features().row(v)).norm(), 0.0, 1e-9);
    sum += std::log(scale);
    sum_sq += std::log(scale) * std::log(scale);
  }
  EXPECT_NEAR(sum / 60, 0.0, 4.0 / std::sqrt(60.0));
  EXPECT_NEAR(sum_sq / 60, 1.0, 0.5);
  spread.feature_scale_spread = -1.0;
  EXPECT_THROW(SyntheticSbm(spread), std::invalid_argument);
}

}  // namespace
}  // namespace softmedoid
