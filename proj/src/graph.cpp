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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>

namespace softmedoid {

namespace {

using Triplet = Eigen::Triplet<double>;

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::ifstream OpenOrThrow(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GraphFormatError(path.string(), 0, "cannot open file");
  return in;
}

double ParseDouble(const std::string& token, const std::string& file, std::size_t line) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(token, &used);
  } catch (const std::exception&) {
    throw GraphFormatError(file, line, "expected a number, got '" + token + "'");
  }
  if (used != token.size()) {
    throw GraphFormatError(file, line, "expected a number, got '" + token + "'");
  }
  return value;
}

long long ParseIndex(const std::string& token, const std::string& file, std::size_t line) {
  std::size_t used = 0;
  long long value = 0;
  try {
    value = std::stoll(token, &used);
  } catch (const std::exception&) {
    throw GraphFormatError(file, line, "expected a node id, got '" + token + "'");
  }
  if (used != token.size() || value < 0) {
    throw GraphFormatError(file, line, "expected a node id, got '" + token + "'");
  }
  return value;
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(Trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

GraphFormatError::GraphFormatError(const std::string& file, std::size_t line,
                                   const std::string& what)
    : std::runtime_error(file + (line > 0 ? ":" + std::to_string(line) : std::string()) +
                         ": " + what),
      line_(line) {}

SparseGraph::SparseGraph(SparseMatrix adjacency, Matrix features, std::vector<int> labels)
    : adjacency_(std::move(adjacency)), features_(std::move(features)), labels_(std::move(labels)) {
  if (adjacency_.rows() != adjacency_.cols()) {
    throw std::invalid_argument("adjacency must be square");
  }
  if (features_.rows() != adjacency_.rows()) {
    throw std::invalid_argument("feature rows must match the node count");
  }
  if (!features_.allFinite()) throw std::invalid_argument("features contain non-finite values");
  if (!labels_.empty() && static_cast<Eigen::Index>(labels_.size()) != adjacency_.rows()) {
    throw std::invalid_argument("label count must match the node count");
  }
  adjacency_.makeCompressed();
  for (Eigen::Index r = 0; r < adjacency_.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(adjacency_, r); it; ++it) {
      if (it.col() == r) throw std::invalid_argument("adjacency must not contain self-loops");
      if (it.value() < 0.0) throw std::invalid_argument("edge weights must be non-negative");
    }
  }
  if (!adjacency_.isApprox(SparseMatrix(adjacency_.transpose()), 0.0)) {
    throw std::invalid_argument("adjacency must be symmetric");
  }
  for (int label : labels_) {
    if (label < 0) throw std::invalid_argument("labels must be non-negative");
    num_classes_ = std::max(num_classes_, label + 1);
  }
}

bool SparseGraph::HasEdge(Eigen::Index u, Eigen::Index v) const {
  return adjacency_.coeff(u, v) != 0.0;
}

std::vector<Eigen::Index> SparseGraph::Degrees() const {
  std::vector<Eigen::Index> degrees(static_cast<std::size_t>(num_nodes()));
  for (Eigen::Index r = 0; r < num_nodes(); ++r) {
    degrees[static_cast<std::size_t>(r)] =
        adjacency_.outerIndexPtr()[r + 1] - adjacency_.outerIndexPtr()[r];
  }
  return degrees;
}

SparseGraph SparseGraph::WithAdjacency(SparseMatrix adjacency) const {
  return SparseGraph(std::move(adjacency), features_, labels_);
}

SparseMatrix BuildAdjacency(Eigen::Index n, const std::vector<Edge>& edges) {
  std::map<std::pair<Eigen::Index, Eigen::Index>, double> unique;
  for (const Edge& e : edges) {
    if (e.u < 0 || e.v < 0 || e.u >= n || e.v >= n) {
      throw std::invalid_argument("edge endpoint out of range");
    }
    if (e.weight < 0.0 || !std::isfinite(e.weight)) {
      throw std::invalid_argument("edge weight must be finite and non-negative");
    }
    if (e.u == e.v || e.weight == 0.0) continue;
    const auto key = std::minmax(e.u, e.v);
    const auto [it, inserted] = unique.emplace(key, e.weight);
    if (!inserted && it->second != e.weight) {
      throw std::invalid_argument("conflicting weights for edge " + std::to_string(key.first) +
                                  "-" + std::to_string(key.second));
    }
  }
  std::vector<Triplet> triplets;
  triplets.reserve(2 * unique.size());
  for (const auto& [key, w] : unique) {
    triplets.emplace_back(key.first, key.second, w);
    triplets.emplace_back(key.second, key.first, w);
  }
  SparseMatrix adjacency(n, n);
  adjacency.setFromTriplets(triplets.begin(), triplets.end());
  adjacency.makeCompressed();
  return adjacency;
}

SparseGraph LoadGraph(const std::filesystem::path& edge_file,
                      const std::filesystem::path& feature_file,
                      const std::filesystem::path& label_file) {
  // Features fix the node count.
  std::vector<std::vector<double>> rows;
  {
    auto in = OpenOrThrow(feature_file);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (Trim(line).empty()) continue;
      std::vector<double> row;
      for (const auto& field : SplitCsv(Trim(line))) {
        row.push_back(ParseDouble(field, feature_file.string(), lineno));
      }
      if (!rows.empty() && row.size() != rows.front().size()) {
        throw GraphFormatError(feature_file.string(), lineno,
                               "expected " + std::to_string(rows.front().size()) +
                                   " columns, got " + std::to_string(row.size()));
      }
      rows.push_back(std::move(row));
    }
  }
  if (rows.empty()) throw GraphFormatError(feature_file.string(), 0, "no feature rows");
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Matrix features(n, static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < features.cols(); ++j)
      features(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];

  std::vector<Edge> edges;
  {
    auto in = OpenOrThrow(edge_file);
    std::map<std::pair<Eigen::Index, Eigen::Index>, std::pair<double, std::size_t>> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string trimmed = Trim(line);
      if (trimmed.empty() || trimmed.front() == '#') continue;
      std::istringstream tokens(trimmed);
      std::vector<std::string> parts;
      for (std::string t; tokens >> t;) parts.push_back(t);
      if (parts.size() < 2 || parts.size() > 3) {
        throw GraphFormatError(edge_file.string(), lineno, "expected 'u v [w]'");
      }
      Edge e;
      e.u = static_cast<Eigen::Index>(ParseIndex(parts[0], edge_file.string(), lineno));
      e.v = static_cast<Eigen::Index>(ParseIndex(parts[1], edge_file.string(), lineno));
      if (parts.size() == 3) e.weight = ParseDouble(parts[2], edge_file.string(), lineno);
      if (e.u >= n || e.v >= n) {
        throw GraphFormatError(edge_file.string(), lineno,
                               "node id exceeds feature row count " + std::to_string(n));
      }
      if (e.weight < 0.0) throw GraphFormatError(edge_file.string(), lineno, "negative weight");
      const auto key = std::minmax(e.u, e.v);
      const auto [it, inserted] = seen.emplace(key, std::make_pair(e.weight, lineno));
      if (!inserted && it->second.first != e.weight) {
        throw GraphFormatError(edge_file.string(), lineno,
                               "asymmetric weight conflict with line " +
                                   std::to_string(it->second.second));
      }
      if (inserted) edges.push_back(e);
    }
  }

  std::vector<int> labels;
  if (!label_file.empty()) {
    auto in = OpenOrThrow(label_file);
    labels.assign(static_cast<std::size_t>(n), -1);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (Trim(line).empty()) continue;
      const auto fields = SplitCsv(Trim(line));
      if (fields.size() != 2) throw GraphFormatError(label_file.string(), lineno, "expected 'node,label'");
      const auto node = ParseIndex(fields[0], label_file.string(), lineno);
      const auto label = ParseIndex(fields[1], label_file.string(), lineno);
      if (node >= n) throw GraphFormatError(label_file.string(), lineno, "node id out of range");
      labels[static_cast<std::size_t>(node)] = static_cast<int>(label);
    }
    const auto missing = std::find(labels.begin(), labels.end(), -1);
    if (missing != labels.end()) {
      throw GraphFormatError(label_file.string(), 0,
                             "no label for node " + std::to_string(missing - labels.begin()));
    }
  }
  return SparseGraph(BuildAdjacency(n, edges), std::move(features), std::move(labels));
}

Matrix RowNormalizeL1(const Matrix& features) {
  Matrix out = features;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double mass = out.row(i).cwiseAbs().sum();
    if (mass > 0.0) out.row(i) /= mass;
  }
  return out;
}

ComponentResult LargestConnectedComponent(const SparseGraph& graph) {
  const Eigen::Index n = graph.num_nodes();
  const SparseMatrix& adj = graph.adjacency();
  std::vector<Eigen::Index> component(static_cast<std::size_t>(n), -1);
  Eigen::Index best = -1, best_size = 0, count = 0;
  for (Eigen::Index start = 0; start < n; ++start) {
    if (component[static_cast<std::size_t>(start)] >= 0) continue;
    Eigen::Index size = 0;
    std::queue<Eigen::Index> frontier;
    frontier.push(start);
    component[static_cast<std::size_t>(start)] = count;
    while (!frontier.empty()) {
      const Eigen::Index u = frontier.front();
      frontier.pop();
      ++size;
      for (SparseMatrix::InnerIterator it(adj, u); it; ++it) {
        auto& c = component[static_cast<std::size_t>(it.col())];
        if (c < 0) {
          c = count;
          frontier.push(it.col());
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best = count;
    }
    ++count;
  }

  ComponentResult result;
  result.index_map.assign(static_cast<std::size_t>(n), -1);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index u = 0; u < n; ++u) {
    if (component[static_cast<std::size_t>(u)] == best) {
      result.index_map[static_cast<std::size_t>(u)] = static_cast<Eigen::Index>(kept.size());
      kept.push_back(u);
    }
  }
  const Eigen::Index m = static_cast<Eigen::Index>(kept.size());
  std::vector<Triplet> triplets;
  Matrix features(m, graph.features().cols());
  std::vector<int> labels;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index old = kept[static_cast<std::size_t>(i)];
    features.row(i) = graph.features().row(old);
    if (graph.has_labels()) labels.push_back(graph.labels()[static_cast<std::size_t>(old)]);
    for (SparseMatrix::InnerIterator it(adj, old); it; ++it) {
      triplets.emplace_back(i, result.index_map[static_cast<std::size_t>(it.col())], it.value());
    }
  }
  SparseMatrix sub(m, m);
  sub.setFromTriplets(triplets.begin(), triplets.end());
  result.graph = SparseGraph(std::move(sub), std::move(features), std::move(labels));
  return result;
}

SparseMatrix GcnNormalize(const SparseMatrix& adjacency) {
  const Eigen::Index n = adjacency.rows();
  SparseMatrix identity(n, n);
  identity.setIdentity();
  SparseMatrix with_loops = adjacency + identity;
  const Vector degree = with_loops * Vector::Ones(n);
  const Vector inv_sqrt = degree.cwiseSqrt().cwiseInverse();
  SparseMatrix normalized = inv_sqrt.asDiagonal() * with_loops * inv_sqrt.asDiagonal();
  normalized.makeCompressed();
  return normalized;
}

Matrix PersonalizedPageRank(const SparseMatrix& transition, double alpha, double tolerance) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  const Eigen::Index n = transition.rows();
  const int cap = 10 * static_cast<int>(std::ceil(std::log(tolerance) / std::log(1.0 - alpha)));
  const Matrix teleport = alpha * Matrix::Identity(n, n);
  Matrix current = teleport;
  for (int iter = 0; iter <= cap; ++iter) {
    Matrix next = teleport;
    next.noalias() += (1.0 - alpha) * (transition * current);
    // next - current is exactly the residual (I - (1 - alpha) A) S - alpha I
    // of `current`.
    const double residual = (next - current).cwiseAbs().maxCoeff();
    if (residual <= tolerance) return current;
    current = std::move(next);
  }
  throw NumericError("personalized PageRank did not converge within " + std::to_string(cap) +
                     " iterations");
}

SparseMatrix TopKPerRow(const Matrix& dense, Eigen::Index k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  const Eigen::Index n = dense.rows();
  std::vector<Triplet> triplets;
  std::vector<Eigen::Index> cols(static_cast<std::size_t>(dense.cols()));
  for (Eigen::Index r = 0; r < n; ++r) {
    std::iota(cols.begin(), cols.end(), Eigen::Index{0});
    const Eigen::Index keep = std::min<Eigen::Index>(k, dense.cols());
    std::partial_sort(cols.begin(), cols.begin() + keep, cols.end(),
                      [&](Eigen::Index a, Eigen::Index b) {
                        if (dense(r, a) != dense(r, b)) return dense(r, a) > dense(r, b);
                        return a < b;
                      });
    for (Eigen::Index i = 0; i < keep; ++i) {
      const Eigen::Index c = cols[static_cast<std::size_t>(i)];
      if (dense(r, c) != 0.0) triplets.emplace_back(r, c, dense(r, c));
    }
  }
  SparseMatrix out(n, dense.cols());
  out.setFromTriplets(triplets.begin(), triplets.end());
  out.makeCompressed();
  return out;
}

SparseMatrix SymmetricNormalize(const SparseMatrix& matrix) {
  const Vector degree = matrix * Vector::Ones(matrix.cols());
  Vector inv_sqrt(degree.size());
  for (Eigen::Index i = 0; i < degree.size(); ++i) {
    inv_sqrt[i] = degree[i] > 0.0 ? 1.0 / std::sqrt(degree[i]) : 0.0;
  }
  SparseMatrix out = inv_sqrt.asDiagonal() * matrix * inv_sqrt.asDiagonal();
  out.makeCompressed();
  return out;
}

SparseMatrix GdcDiffusion(const SparseMatrix& transition, double alpha, Eigen::Index k) {
  return SymmetricNormalize(TopKPerRow(PersonalizedPageRank(transition, alpha), k));
}

SplitAssignment SplitNodes(const SparseGraph& graph, int per_class, std::uint64_t seed) {
  if (!graph.has_labels()) throw std::invalid_argument("splitting requires labels");
  if (per_class < 1) throw std::invalid_argument("per_class must be >= 1");
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(graph.num_classes()));
  for (Eigen::Index v = 0; v < graph.num_nodes(); ++v) {
    members[static_cast<std::size_t>(graph.labels()[static_cast<std::size_t>(v)])].push_back(v);
  }
  SplitAssignment split;
  std::vector<bool> used(static_cast<std::size_t>(graph.num_nodes()), false);
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto& nodes = members[c];
    Rng rng = StreamRng(seed, c);
    std::shuffle(nodes.begin(), nodes.end(), rng);
    std::size_t take = static_cast<std::size_t>(per_class);
    if (nodes.size() < 2 * take) {
      take = nodes.size() / 2;
      split.warnings.push_back("class " + std::to_string(c) + " has " +
                               std::to_string(nodes.size()) + " nodes; using " +
                               std::to_string(take) + " for train and val");
    }
    for (std::size_t i = 0; i < take; ++i) {
      split.train.push_back(nodes[i]);
      split.val.push_back(nodes[take + i]);
      used[static_cast<std::size_t>(nodes[i])] = true;
      used[static_cast<std::size_t>(nodes[take + i])] = true;
    }
  }
  for (Eigen::Index v = 0; v < graph.num_nodes(); ++v) {
    if (!used[static_cast<std::size_t>(v)]) split.test.push_back(v);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  return split;
}

SparseGraph SyntheticSbm(const SbmOptions& options) {
  if (options.n < 1 || options.classes < 1 || options.feature_dim < 1) {
    throw std::invalid_argument("SBM needs positive n, classes and feature_dim");
  }
  if (options.p_in < options.p_out) throw std::invalid_argument("SBM requires p_in >= p_out");
  if (!(options.feature_scale_spread >= 0.0)) {
    throw std::invalid_argument("SBM feature_scale_spread must be non-negative");
  }
  const Eigen::Index n = options.n;
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index v = 0; v < n; ++v) {
    labels[static_cast<std::size_t>(v)] = static_cast<int>(v * options.classes / n);
  }
  Rng edge_rng = StreamRng(options.seed, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Edge> edges;
  for (Eigen::Index u = 0; u < n; ++u) {
    for (Eigen::Index v = u + 1; v < n; ++v) {
      const bool same = labels[static_cast<std::size_t>(u)] == labels[static_cast<std::size_t>(v)];
      if (unif(edge_rng) < (same ? options.p_in : options.p_out)) edges.push_back({u, v, 1.0});
    }
  }
  Rng feature_rng = StreamRng(options.seed, 1);
  std::normal_distribution<double> normal(0.0, options.feature_noise);
  Matrix features(n, options.feature_dim);
  for (Eigen::Index v = 0; v < n; ++v) {
    for (Eigen::Index j = 0; j < options.feature_dim; ++j) features(v, j) = normal(feature_rng);
    features(v, labels[static_cast<std::size_t>(v)] % options.feature_dim) += options.feature_shift;
  }
  if (options.feature_scale_spread > 0.0) {
    Rng scale_rng = StreamRng(options.seed, 2);
    std::normal_distribution<double> standard(0.0, 1.0);
    for (Eigen::Index v = 0; v < n; ++v) {
      features.row(v) *= std::exp(options.feature_scale_spread * standard(scale_rng));
    }
  }
  return SparseGraph(BuildAdjacency(n, edges), std::move(features), std::move(labels));
}

}  // namespace softmedoid
