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

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "maerec/autograd.h"
#include "maerec/transition_graph.h"

namespace maerec {

inline constexpr double kNormFloor = 1e-12;
inline constexpr double kGumbelClamp = 1e-12;

// Per-node relatedness scores and the neighborhoods they were computed over.
struct RelatednessTable {
  std::vector<double> gamma;            // mean cosine to k-hop neighbors
  std::vector<double> gamma_perturbed;  // gamma plus Gumbel(0,1) noise
  std::vector<double> gumbel_noise;     // the noise term alone
  std::vector<std::vector<int>> neighborhoods;
};

// k-hop neighborhoods of every node, each capped at `cap` samples.
std::vector<std::vector<int>> SampleNeighborhoods(const TransitionGraph& graph,
                                                  int k, int cap, uint64_t seed);

// Mean cosine similarity between each node's embedding row and those of its
// neighborhood; 0 for empty neighborhoods. Norms are floored at kNormFloor.
std::vector<double> RelatednessScores(
    const Eigen::MatrixXd& embeddings,
    const std::vector<std::vector<int>>& neighborhoods);

// Samples neighborhoods, scores them and draws the Gumbel perturbation.
RelatednessTable SemanticRelatedness(const TransitionGraph& graph,
                                     const Eigen::MatrixXd& embeddings, int k,
                                     int cap, uint64_t seed);

// -log(-log(mu)) with mu clamped to [kGumbelClamp, 1 - kGumbelClamp].
double GumbelFromUniform(double mu);
std::vector<double> GumbelNoise(int n, uint64_t seed);
// gamma - log(-log(mu)), one independent mu per node.
std::vector<double> GumbelPerturb(std::span<const double> gamma, uint64_t seed);

// The `alpha` nodes with largest perturbed score (Gumbel-top-k), sorted by
// node index. alpha >= n selects everything.
std::vector<int> SelectAnchors(std::span<const double> gamma_perturbed, int alpha);
// Uniform sample of `alpha` nodes without replacement, sorted.
std::vector<int> RandomAnchors(int num_nodes, int alpha, uint64_t seed);
// Indices of the `count` largest scores, sorted by node index.
std::vector<int> TopNodes(std::span<const double> scores, int count);

// Edges hidden from the autoencoder plus the walk that produced them.
struct PathMask {
  std::vector<int> anchors;
  std::vector<int> walk_nodes;     // sorted; includes the anchors
  std::vector<int> node_depth;     // per graph node, -1 if not on the walk
  std::vector<Edge> masked_edges;  // sorted canonical pairs
  int max_depth = 0;
  double drop_ratio = 0.0;
};

// Admission probability for a frontier node first reached at `depth` (>= 1).
using AdmissionFn = std::function<double(int depth)>;

// Walk outward from the anchors for `max_depth` expand steps. At step j the
// frontier N(P) \ P is formed and each node is admitted independently with
// admission(j); an admitted node joins P and every edge linking it to the
// previous P is masked.
PathMask ExpandSample(const TransitionGraph& graph, std::span<const int> anchors,
                      int max_depth, const AdmissionFn& admission, uint64_t seed);

// Admission probability drop_ratio^depth.
PathMask ExpandSample(const TransitionGraph& graph, std::span<const int> anchors,
                      double drop_ratio, int max_depth, uint64_t seed);

// r(L_rec) from a loss history (oldest first). The current improvement is
// history[n-2] - history[n-1]; it earns reward 1 only if it strictly exceeds
// the mean of up to `delta` improvements before it, otherwise epsilon.
// Returns 1 while fewer than two improvements exist.
double TaskReward(std::span<const double> history, int delta, double epsilon);

// Ring buffer of recent recommendation losses.
class TaskAdaptiveState {
 public:
  TaskAdaptiveState(int delta, double epsilon);

  // Records the loss of the current step and returns its reward.
  double Update(double current_loss);
  const std::deque<double>& history() const { return history_; }
  int delta() const { return delta_; }
  double epsilon() const { return epsilon_; }

 private:
  int delta_;
  double epsilon_;
  std::deque<double> history_;
};

// Relatedness of `nodes` as a |nodes| x 1 Var differentiable w.r.t. the
// embedding table.
ag::Var RelatednessOnTape(const ag::Var& embeddings,
                          const std::vector<std::vector<int>>& neighborhoods,
                          std::span<const int> nodes);

// -r * sum_v (gamma(v) + noise(v)); noise is a constant.
ag::Var MaskLoss(const ag::Var& gamma, std::span<const double> noise, double reward);

// Same quantity on plain numbers.
double MaskLossValue(std::span<const double> gamma_perturbed,
                     std::span<const int> nodes, double reward);

// item<TAB>gamma<TAB>gamma' per line.
void WriteRelatedness(std::ostream& out, const RelatednessTable& table,
                      std::span<const std::string> item_ids);

}  // namespace maerec
