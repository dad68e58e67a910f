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


#include "softmedoid/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <regex>
#include <set>
#include <stdexcept>
#include <tuple>

namespace softmedoid {
namespace {

using Pair = std::pair<Eigen::Index, Eigen::Index>;

Flip MakeFlip(FlipOp op, Eigen::Index u, Eigen::Index v) {
  if (u > v) std::swap(u, v);
  return Flip{op, u, v};
}

struct DenseState {
  Vector inv_sqrt_degree;
  Matrix a_hat;
  Matrix z1;
  Matrix p;
  Matrix m2;
  Matrix logits;
};

DenseState DenseForward(const GnnModel& model, const Matrix& adjacency, const Matrix& features) {
  const Eigen::Index n = adjacency.rows();
  DenseState s;
  const Matrix tilde = adjacency + Matrix::Identity(n, n);
  s.inv_sqrt_degree = tilde.rowwise().sum().cwiseSqrt().cwiseInverse();
  s.a_hat = s.inv_sqrt_degree.asDiagonal() * tilde * s.inv_sqrt_degree.asDiagonal();
  s.z1.noalias() = features * model.w1;
  s.p.noalias() = s.a_hat * s.z1;
  s.m2.noalias() = s.p.cwiseMax(0.0) * model.w2;
  s.logits.noalias() = s.a_hat * s.m2;
  return s;
}

// Entry (u, v) of the flipped matrix: 1 for additions, 0 for deletions.
double FlipTarget(double value) { return value != 0.0 ? 0.0 : 1.0; }

void Toggle(Matrix& a, Eigen::Index u, Eigen::Index v) {
  a(u, v) = FlipTarget(a(u, v));
  a(v, u) = a(u, v);
}

std::vector<Pair> AllPairs(Eigen::Index n) {
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index u = 0; u < n; ++u)
    for (Eigen::Index v = u + 1; v < n; ++v) pairs.emplace_back(u, v);
  return pairs;
}

void CheckTargets(const SparseGraph& graph, const std::vector<Eigen::Index>& nodes) {
  if (!graph.has_labels()) throw std::invalid_argument("attacks require labels");
  if (nodes.empty()) throw std::invalid_argument("attacks need at least one target node");
}

AttackResult Finish(const SparseGraph& graph, std::vector<Flip> flips,
                    std::vector<std::string> warnings = {}) {
  AttackResult result;
  result.adjacency = ApplyFlips(graph.adjacency(), flips);
  result.flips = std::move(flips);
  result.warnings = std::move(warnings);
  return result;
}

}  // namespace

Eigen::Index AttackBudget::Flips(Eigen::Index num_edges) const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("attack epsilon must be finite and >= 0");
  }
  // The small slack keeps e.g. 0.3 * 10 from flooring to 2.
  return static_cast<Eigen::Index>(std::floor(epsilon * static_cast<double>(num_edges) + 1e-9));
}

std::string FormatFlip(const Flip& flip) {
  return std::string(flip.op == FlipOp::kAdd ? "add" : "del") + "(" + std::to_string(flip.u) +
         "," + std::to_string(flip.v) + ")";
}

Flip ParseFlip(const std::string& text) {
  static const std::regex kPattern(R"(^\s*(add|del)\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, kPattern)) {
    throw std::invalid_argument("malformed flip '" + text + "'");
  }
  const auto u = static_cast<Eigen::Index>(std::stoll(m[2]));
  const auto v = static_cast<Eigen::Index>(std::stoll(m[3]));
  if (u == v) throw std::invalid_argument("flip '" + text + "' is a self-loop");
  return MakeFlip(m[1] == "add" ? FlipOp::kAdd : FlipOp::kDelete, u, v);
}

SparseMatrix ApplyFlips(const SparseMatrix& adjacency, const std::vector<Flip>& flips) {
  const Eigen::Index n = adjacency.rows();
  std::map<Pair, double> edges;
  for (Eigen::Index u = 0; u < n; ++u)
    for (SparseMatrix::InnerIterator it(adjacency, u); it; ++it)
      if (it.col() > u && it.value() != 0.0) edges[{u, it.col()}] = it.value();
  for (const Flip& f : flips) {
    const Flip g = MakeFlip(f.op, f.u, f.v);
    if (g.u < 0 || g.v >= n || g.u == g.v) {
      throw std::invalid_argument("flip " + FormatFlip(g) + " is out of range");
    }
    const auto it = edges.find({g.u, g.v});
    if (g.op == FlipOp::kAdd) {
      if (it != edges.end()) throw std::invalid_argument(FormatFlip(g) + " adds an existing edge");
      edges[{g.u, g.v}] = 1.0;
    } else {
      if (it == edges.end()) throw std::invalid_argument(FormatFlip(g) + " deletes a missing edge");
      edges.erase(it);
    }
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * edges.size());
  for (const auto& [pair, w] : edges) {
    trips.emplace_back(pair.first, pair.second, w);
    trips.emplace_back(pair.second, pair.first, w);
  }
  SparseMatrix out(n, n);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

AttackResult DiceAttack(const SparseGraph& graph, Eigen::Index budget, std::uint64_t seed) {
  if (!graph.has_labels()) throw std::invalid_argument("DICE requires labels");
  if (budget < 0) throw std::invalid_argument("budget must be >= 0");
  const Eigen::Index n = graph.num_nodes();
  const auto& labels = graph.labels();
  const auto label = [&](Eigen::Index v) { return labels[static_cast<std::size_t>(v)]; };
  const Eigen::Index deletions = budget / 2;
  const Eigen::Index additions = budget - deletions;
  std::vector<Flip> flips;
  std::vector<std::string> warnings;

  std::vector<Pair> intra;
  Eigen::Index inter_edges = 0;
  for (Eigen::Index u = 0; u < n; ++u) {
    for (SparseMatrix::InnerIterator it(graph.adjacency(), u); it; ++it) {
      if (it.col() <= u) continue;
      if (label(u) == label(it.col())) {
        intra.emplace_back(u, it.col());
      } else {
        ++inter_edges;
      }
    }
  }
  Rng del_rng = StreamRng(seed, 0);
  const auto take_del = std::min<Eigen::Index>(deletions, static_cast<Eigen::Index>(intra.size()));
  if (take_del < deletions) {
    warnings.push_back("only " + std::to_string(intra.size()) + " same-class edges for " +
                       std::to_string(deletions) + " deletions");
  }
  for (Eigen::Index i = 0; i < take_del; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, static_cast<Eigen::Index>(intra.size()) - 1);
    std::swap(intra[static_cast<std::size_t>(i)], intra[static_cast<std::size_t>(pick(del_rng))]);
    const Pair& e = intra[static_cast<std::size_t>(i)];
    flips.push_back(MakeFlip(FlipOp::kDelete, e.first, e.second));
  }

  std::map<int, Eigen::Index> class_sizes;
  for (int c : labels) ++class_sizes[c];
  Eigen::Index same_pairs = 0;
  for (const auto& [c, size] : class_sizes) same_pairs += size * (size - 1) / 2;
  const Eigen::Index pool = n * (n - 1) / 2 - same_pairs - inter_edges;
  Rng add_rng = StreamRng(seed, 1);
  if (additions * 2 >= pool) {
    std::vector<Pair> candidates;
    for (const Pair& p : AllPairs(n)) {
      if (label(p.first) != label(p.second) && !graph.HasEdge(p.first, p.second)) {
        candidates.push_back(p);
      }
    }
    std::shuffle(candidates.begin(), candidates.end(), add_rng);
    if (additions > pool) {
      warnings.push_back("only " + std::to_string(pool) + " different-class non-edges for " +
                         std::to_string(additions) + " additions");
    }
    const auto take = std::min<Eigen::Index>(additions, pool);
    for (Eigen::Index i = 0; i < take; ++i) {
      const Pair& p = candidates[static_cast<std::size_t>(i)];
      flips.push_back(MakeFlip(FlipOp::kAdd, p.first, p.second));
    }
  } else {
    std::uniform_int_distribution<Eigen::Index> node(0, n - 1);
    std::set<Pair> chosen;
    while (static_cast<Eigen::Index>(chosen.size()) < additions) {
      Eigen::Index u = node(add_rng);
      Eigen::Index v = node(add_rng);
      if (u == v || label(u) == label(v) || graph.HasEdge(u, v)) continue;
      if (u > v) std::swap(u, v);
      if (chosen.insert({u, v}).second) flips.push_back(MakeFlip(FlipOp::kAdd, u, v));
    }
  }
  return Finish(graph, std::move(flips), std::move(warnings));
}

void CheckSurrogate(const GnnModel& model) {
  model.Validate();
  for (const auto& agg : model.config.aggregators) {
    if (agg.kind != AggregatorKind::kWeightedSum || agg.k != 0) {
      throw std::invalid_argument("the surrogate must be a weighted-sum GCN without top-k");
    }
  }
  if (model.config.message.source != MessageSource::kGcn) {
    throw std::invalid_argument("the surrogate must use GCN messages");
  }
}

double SurrogateLoss(const GnnModel& model, const Matrix& adjacency, const Matrix& features,
                     const std::vector<int>& labels, const std::vector<Eigen::Index>& nodes) {
  return CrossEntropy(DenseForward(model, adjacency, features).logits, labels, nodes);
}

Matrix SurrogateAdjacencyGradient(const GnnModel& model, const Matrix& adjacency,
                                  const Matrix& features, const std::vector<int>& labels,
                                  const std::vector<Eigen::Index>& nodes) {
  const DenseState s = DenseForward(model, adjacency, features);
  Matrix g_logits;
  CrossEntropy(s.logits, labels, nodes, &g_logits);
  // Gradient w.r.t. the normalized matrix, from both layers.
  Matrix g_hat = g_logits * s.m2.transpose();
  const Matrix g_h = (s.a_hat.transpose() * g_logits) * model.w2.transpose();
  const Matrix g_p = g_h.cwiseProduct((s.p.array() > 0.0).cast<double>().matrix());
  g_hat.noalias() += g_p * s.z1.transpose();
  // A_hat_ij = tilde_ij / sqrt(d_i d_j) with d the row sums of tilde.
  const Matrix weighted = g_hat.cwiseProduct(s.a_hat);
  const Vector inv_degree = s.inv_sqrt_degree.cwiseAbs2();
  const Vector g_degree =
      -0.5 * inv_degree.cwiseProduct(weighted.rowwise().sum() + weighted.colwise().sum().transpose());
  Matrix g_tilde = s.inv_sqrt_degree.asDiagonal() * g_hat * s.inv_sqrt_degree.asDiagonal();
  g_tilde.colwise() += g_degree;
  Matrix g = g_tilde + g_tilde.transpose();
  g.diagonal().setZero();
  return g;
}

AttackResult GreedyFlipAttack(const GnnModel& surrogate, const SparseGraph& graph,
                              const std::vector<Eigen::Index>& target_nodes, Eigen::Index budget,
                              const GreedyOptions& options) {
  CheckSurrogate(surrogate);
  CheckTargets(graph, target_nodes);
  if (budget < 0) throw std::invalid_argument("budget must be >= 0");
  if (options.shortlist < 1) throw std::invalid_argument("shortlist must be >= 1");
  const Eigen::Index n = graph.num_nodes();
  const auto& x = graph.features();
  const auto& y = graph.labels();
  Matrix a = Matrix(graph.adjacency());
  std::set<Pair> flipped;
  std::vector<Flip> flips;
  const std::vector<Pair> pairs = AllPairs(n);
  for (Eigen::Index step = 0; step < budget && flipped.size() < pairs.size(); ++step) {
    const Matrix g = SurrogateAdjacencyGradient(surrogate, a, x, y, target_nodes);
    std::vector<std::tuple<double, Eigen::Index, Eigen::Index>> ranked;
    for (const Pair& p : pairs) {
      if (flipped.count(p)) continue;
      const double score = g(p.first, p.second) * (1.0 - 2.0 * (a(p.first, p.second) != 0.0));
      ranked.emplace_back(-score, p.first, p.second);
    }
    const auto keep = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(options.shortlist));
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end());
    ranked.resize(keep);
    std::sort(ranked.begin(), ranked.end(), [](const auto& l, const auto& r) {
      return std::tie(std::get<1>(l), std::get<2>(l)) < std::tie(std::get<1>(r), std::get<2>(r));
    });
    double best_loss = -std::numeric_limits<double>::infinity();
    Pair best{-1, -1};
    for (const auto& [neg_score, u, v] : ranked) {
      Toggle(a, u, v);
      const double loss = SurrogateLoss(surrogate, a, x, y, target_nodes);
      Toggle(a, u, v);
      if (loss > best_loss) {
        best_loss = loss;
        best = {u, v};
      }
    }
    const FlipOp op = a(best.first, best.second) != 0.0 ? FlipOp::kDelete : FlipOp::kAdd;
    Toggle(a, best.first, best.second);
    flipped.insert(best);
    flips.push_back(MakeFlip(op, best.first, best.second));
  }
  return Finish(graph, std::move(flips));
}

Vector ProjectToBudget(const Vector& s, double budget) {
  if (budget <= 0.0) return Vector::Zero(s.size());
  const Vector clipped = s.cwiseMax(0.0).cwiseMin(1.0);
  if (clipped.sum() <= budget) return clipped;
  const auto mass = [&clipped](double mu) {
    return (clipped.array() - mu).cwiseMax(0.0).cwiseMin(1.0).sum();
  };
  double lo = 0.0;  // mass(lo) > budget
  double hi = 1.0;  // mass(hi) == 0
  for (int iter = 0; iter < 100; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mass(mid) > budget) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return (clipped.array() - hi).cwiseMax(0.0).cwiseMin(1.0);
}

AttackResult PgdL0Attack(const GnnModel& surrogate, const SparseGraph& graph,
                         const std::vector<Eigen::Index>& target_nodes, Eigen::Index budget,
                         const PgdOptions& options) {
  CheckSurrogate(surrogate);
  CheckTargets(graph, target_nodes);
  if (budget < 0) throw std::invalid_argument("budget must be >= 0");
  if (options.steps < 1) throw std::invalid_argument("PGD needs at least one step");
  if (budget == 0) return Finish(graph, {});
  const Eigen::Index n = graph.num_nodes();
  const auto& x = graph.features();
  const auto& y = graph.labels();
  const Matrix clean = Matrix(graph.adjacency());
  const std::vector<Pair> pairs = AllPairs(n);
  const auto np = static_cast<Eigen::Index>(pairs.size());
  Vector direction(np);  // d A_uv / d s_k
  for (Eigen::Index k = 0; k < np; ++k) {
    const auto [u, v] = pairs[static_cast<std::size_t>(k)];
    direction[k] = FlipTarget(clean(u, v)) - clean(u, v);
  }

  Vector s = Vector::Zero(np);
  for (int t = 0; t < options.steps; ++t) {
    Matrix a = clean;
    for (Eigen::Index k = 0; k < np; ++k) {
      if (s[k] == 0.0) continue;
      const auto [u, v] = pairs[static_cast<std::size_t>(k)];
      a(u, v) += s[k] * direction[k];
      a(v, u) = a(u, v);
    }
    const Matrix g = SurrogateAdjacencyGradient(surrogate, a, x, y, target_nodes);
    Vector grad(np);
    for (Eigen::Index k = 0; k < np; ++k) {
      const auto [u, v] = pairs[static_cast<std::size_t>(k)];
      grad[k] = g(u, v) * direction[k];
    }
    const double scale = grad.cwiseAbs().maxCoeff();
    if (scale == 0.0) break;
    s += options.step_size / std::sqrt(t + 1.0) * grad / scale;
    s = ProjectToBudget(s, static_cast<double>(budget));
  }

  const auto loss_of = [&](const std::vector<Eigen::Index>& chosen) {
    Matrix a = clean;
    for (Eigen::Index k : chosen) {
      const auto [u, v] = pairs[static_cast<std::size_t>(k)];
      Toggle(a, u, v);
    }
    return SurrogateLoss(surrogate, a, x, y, target_nodes);
  };
  // Deterministic candidate: the `budget` largest positive entries.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(np));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&s](Eigen::Index i, Eigen::Index j) { return s[i] > s[j]; });
  std::vector<Eigen::Index> best;
  for (Eigen::Index k : order) {
    if (static_cast<Eigen::Index>(best.size()) == budget || s[k] <= 0.0) break;
    best.push_back(k);
  }
  double best_loss = loss_of(best);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int draw = 0; draw < options.samples; ++draw) {
    Rng rng = StreamRng(options.seed, static_cast<std::uint64_t>(draw));
    std::vector<Eigen::Index> chosen;
    for (Eigen::Index k = 0; k < np; ++k) {
      if (s[k] > 0.0 && unif(rng) < s[k]) chosen.push_back(k);
    }
    if (static_cast<Eigen::Index>(chosen.size()) > budget) continue;
    const double loss = loss_of(chosen);
    if (loss > best_loss) {
      best_loss = loss;
      best = std::move(chosen);
    }
  }
  std::sort(best.begin(), best.end());
  std::vector<Flip> flips;
  for (Eigen::Index k : best) {
    const auto [u, v] = pairs[static_cast<std::size_t>(k)];
    flips.push_back(MakeFlip(clean(u, v) != 0.0 ? FlipOp::kDelete : FlipOp::kAdd, u, v));
  }
  return Finish(graph, std::move(flips));
}

double EvasionAccuracy(const GnnModel& model, const SparseGraph& graph,
                       const SparseMatrix& perturbed_adjacency,
                       const std::vector<Eigen::Index>& nodes) {
  return PredictAccuracy(model, BuildMessageMatrix(perturbed_adjacency, model.config.message),
                         graph.features(), graph.labels(), nodes);
}

void WritePerturbations(const std::vector<Flip>& flips, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const Flip& f : flips) out << FormatFlip(f) << "\n";
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<Flip> ReadPerturbations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<Flip> flips;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    try {
      flips.push_back(ParseFlip(line));
    } catch (const std::invalid_argument& e) {
      throw GraphFormatError(path.string(), number, e.what());
    }
  }
  return flips;
}

}  // namespace softmedoid
