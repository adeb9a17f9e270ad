// Copyright 2026 The MAERec-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "maerec/masking.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>
#include <glog/logging.h>

#include "maerec/errors.h"
#include "maerec/random.h"

namespace maerec {

std::vector<std::vector<int>> SampleNeighborhoods(const TransitionGraph& graph,
                                                  int k, int cap, uint64_t seed) {
  std::vector<std::vector<int>> out(graph.num_nodes());
  for (int v = 0; v < graph.num_nodes(); ++v) {
    out[v] = KHopNeighbors(graph, v, k, cap, seed);
  }
  return out;
}

std::vector<double> RelatednessScores(
    const Eigen::MatrixXd& embeddings,
    const std::vector<std::vector<int>>& neighborhoods) {
  if (static_cast<size_t>(embeddings.rows()) != neighborhoods.size()) {
    throw ArgumentError("embedding rows must equal node count");
  }
  Eigen::VectorXd norms = embeddings.rowwise().norm();
  int floored = 0;
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (norms(i) < kNormFloor) {
      norms(i) = kNormFloor;
      ++floored;
    }
  }
  if (floored > 0) {
    LOG(WARNING) << floored << " embedding row(s) below norm floor " << kNormFloor;
  }
  std::vector<double> gamma(neighborhoods.size(), 0.0);
  for (size_t v = 0; v < neighborhoods.size(); ++v) {
    const auto& nbrs = neighborhoods[v];
    if (nbrs.empty()) continue;
    double sum = 0.0;
    for (int w : nbrs) {
      sum += embeddings.row(v).dot(embeddings.row(w)) / (norms(v) * norms(w));
    }
    gamma[v] = sum / static_cast<double>(nbrs.size());
  }
  return gamma;
}

RelatednessTable SemanticRelatedness(const TransitionGraph& graph,
                                     const Eigen::MatrixXd& embeddings, int k,
                                     int cap, uint64_t seed) {
  RelatednessTable table;
  table.neighborhoods = SampleNeighborhoods(graph, k, cap, seed);
  table.gamma = RelatednessScores(embeddings, table.neighborhoods);
  table.gumbel_noise = GumbelNoise(graph.num_nodes(), DeriveSeed(seed, 0x67756d));
  table.gamma_perturbed.resize(table.gamma.size());
  for (size_t v = 0; v < table.gamma.size(); ++v) {
    table.gamma_perturbed[v] = table.gamma[v] + table.gumbel_noise[v];
  }
  return table;
}

double GumbelFromUniform(double mu) {
  mu = std::clamp(mu, kGumbelClamp, 1.0 - kGumbelClamp);
  return -std::log(-std::log(mu));
}

std::vector<double> GumbelNoise(int n, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> noise(n);
  for (auto& g : noise) g = GumbelFromUniform(UniformOpen(rng));
  return noise;
}

std::vector<double> GumbelPerturb(std::span<const double> gamma, uint64_t seed) {
  auto noise = GumbelNoise(static_cast<int>(gamma.size()), seed);
  for (size_t i = 0; i < gamma.size(); ++i) noise[i] += gamma[i];
  return noise;
}

std::vector<int> TopNodes(std::span<const double> scores, int count) {
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  count = std::clamp(count, 0, n);
  std::partial_sort(order.begin(), order.begin() + count, order.end(),
                    [&](int a, int b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<int> SelectAnchors(std::span<const double> gamma_perturbed, int alpha) {
  const int n = static_cast<int>(gamma_perturbed.size());
  if (alpha > n) {
    LOG(WARNING) << "anchor count " << alpha << " exceeds node count " << n
                 << "; selecting all nodes";
  }
  return TopNodes(gamma_perturbed, alpha);
}

std::vector<int> RandomAnchors(int num_nodes, int alpha, uint64_t seed) {
  alpha = std::clamp(alpha, 0, num_nodes);
  std::vector<int> nodes(num_nodes);
  std::iota(nodes.begin(), nodes.end(), 0);
  Rng rng(seed);
  for (int i = 0; i < alpha; ++i) {
    std::swap(nodes[i], nodes[i + UniformIndex(rng, num_nodes - i)]);
  }
  nodes.resize(alpha);
  std::sort(nodes.begin(), nodes.end());
  return nodes;
}

PathMask ExpandSample(const TransitionGraph& graph, std::span<const int> anchors,
                      int max_depth, const AdmissionFn& admission, uint64_t seed) {
  if (max_depth < 1) throw ArgumentError("path scale k must be >= 1");
  PathMask mask;
  mask.max_depth = max_depth;
  mask.node_depth.assign(graph.num_nodes(), -1);
  for (int a : anchors) {
    if (a < 0 || a >= graph.num_nodes()) throw ArgumentError("anchor out of range");
    mask.node_depth[a] = 0;
  }
  mask.anchors.assign(anchors.begin(), anchors.end());
  std::sort(mask.anchors.begin(), mask.anchors.end());
  mask.anchors.erase(std::unique(mask.anchors.begin(), mask.anchors.end()),
                     mask.anchors.end());

  Rng rng(seed);
  std::vector<int> members = mask.anchors;
  for (int depth = 1; depth <= max_depth; ++depth) {
    // Frontier in ascending node order so draws are reproducible.
    std::vector<int> frontier;
    for (int x : members) {
      for (int y : graph.Neighbors(x)) {
        if (mask.node_depth[y] < 0) frontier.push_back(y);
      }
    }
    std::sort(frontier.begin(), frontier.end());
    frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
    if (frontier.empty()) break;
    const double prob = admission(depth);
    std::vector<int> admitted;
    for (int y : frontier) {
      if (UniformOpen(rng) < prob) admitted.push_back(y);
    }
    for (int y : admitted) {
      for (int x : graph.Neighbors(y)) {
        const int dx = mask.node_depth[x];
        if (dx >= 0 && dx < depth) mask.masked_edges.push_back(CanonicalEdge(x, y));
      }
    }
    for (int y : admitted) mask.node_depth[y] = depth;
    members.insert(members.end(), admitted.begin(), admitted.end());
  }
  std::sort(members.begin(), members.end());
  mask.walk_nodes = std::move(members);
  std::sort(mask.masked_edges.begin(), mask.masked_edges.end());
  mask.masked_edges.erase(
      std::unique(mask.masked_edges.begin(), mask.masked_edges.end()),
      mask.masked_edges.end());
  return mask;
}

PathMask ExpandSample(const TransitionGraph& graph, std::span<const int> anchors,
                      double drop_ratio, int max_depth, uint64_t seed) {
  if (!(drop_ratio > 0.0 && drop_ratio < 1.0)) {
    throw ArgumentError("drop ratio p must lie in (0, 1)");
  }
  auto mask = ExpandSample(
      graph, anchors, max_depth,
      [drop_ratio](int depth) { return std::pow(drop_ratio, depth); }, seed);
  mask.drop_ratio = drop_ratio;
  return mask;
}

double TaskReward(std::span<const double> history, int delta, double epsilon) {
  const int n = static_cast<int>(history.size());
  if (n < 3) return 1.0;
  const double current = history[n - 2] - history[n - 1];
  const int previous = std::min(delta, n - 2);
  double sum = 0.0;
  for (int i = 0; i < previous; ++i) {
    const int at = n - 2 - i;  // improvement ending at history[at]
    sum += history[at - 1] - history[at];
  }
  const double mean = sum / previous;
  return current > mean ? 1.0 : epsilon;
}

TaskAdaptiveState::TaskAdaptiveState(int delta, double epsilon)
    : delta_(delta), epsilon_(epsilon) {
  if (delta <= 1) throw ArgumentError("delta must be > 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ArgumentError("epsilon must lie in (0, 1)");
}

double TaskAdaptiveState::Update(double current_loss) {
  history_.push_back(current_loss);
  // The current improvement plus delta before it span delta + 2 losses.
  while (static_cast<int>(history_.size()) > delta_ + 2) history_.pop_front();
  std::vector<double> h(history_.begin(), history_.end());
  return TaskReward(h, delta_, epsilon_);
}

ag::Var RelatednessOnTape(const ag::Var& embeddings,
                          const std::vector<std::vector<int>>& neighborhoods,
                          std::span<const int> nodes) {
  std::vector<int> left;
  std::vector<int> right;
  std::vector<Eigen::Triplet<double>> weights;
  for (size_t r = 0; r < nodes.size(); ++r) {
    const auto& nbrs = neighborhoods.at(nodes[r]);
    for (int w : nbrs) {
      weights.emplace_back(static_cast<int>(r), static_cast<int>(left.size()),
                           1.0 / static_cast<double>(nbrs.size()));
      left.push_back(nodes[r]);
      right.push_back(w);
    }
  }
  auto* tape = embeddings.tape();
  if (left.empty()) {
    return tape->Constant(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nodes.size()), 1));
  }
  auto averaging = std::make_shared<ag::SparseMatrix>(
      static_cast<Eigen::Index>(nodes.size()), static_cast<Eigen::Index>(left.size()));
  averaging->setFromTriplets(weights.begin(), weights.end());
  auto unit = ag::RowNormalize(embeddings, kNormFloor);
  auto cosines = ag::RowDot(ag::GatherRows(unit, left), ag::GatherRows(unit, right));
  return ag::SparseMatMul(averaging, cosines);
}

ag::Var MaskLoss(const ag::Var& gamma, std::span<const double> noise, double reward) {
  if (gamma.rows() == 0) throw ArgumentError("mask loss over an empty node set");
  const double noise_sum = std::accumulate(noise.begin(), noise.end(), 0.0);
  return ag::Scale(ag::AddScalar(ag::Sum(gamma), noise_sum), -reward);
}

double MaskLossValue(std::span<const double> gamma_perturbed,
                     std::span<const int> nodes, double reward) {
  if (nodes.empty()) throw ArgumentError("mask loss over an empty node set");
  double sum = 0.0;
  for (int v : nodes) sum += gamma_perturbed[v];
  return -reward * sum;
}

void WriteRelatedness(std::ostream& out, const RelatednessTable& table,
                      std::span<const std::string> item_ids) {
  for (size_t v = 0; v < table.gamma.size(); ++v) {
    const std::string id = v < item_ids.size() ? item_ids[v] : std::to_string(v);
    out << fmt::format("{}\t{:.9g}\t{:.9g}\n", id, table.gamma[v],
                       table.gamma_perturbed[v]);
  }
}

}  // namespace maerec
