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
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "maerec/autograd.h"
#include "maerec/corpus.h"
#include "maerec/evaluation.h"
#include "maerec/masking.h"
#include "maerec/parameters.h"
#include "maerec/transition_graph.h"

namespace maerec {

// Mean over packed positions t of
//   -[log sigmoid(out_t . table[target_t]) + sum_j log(1 - sigmoid(out_t . table[neg_tj]))]
// with sigmoid outputs clipped to [1e-8, 1 - 1e-8]. `negatives` holds
// n_neg consecutive entries per position.
ag::Var RecommendationLoss(const ag::Var& outputs, const ag::Var& item_table,
                           std::span<const int> targets,
                           std::span<const int> negatives);

// lambda * sum of squared entries of `params`.
ag::Var WeightDecay(std::span<const ag::Var> params, double lambda);
double WeightDecayValue(const ParameterStore& params, double lambda);

// rec + mask + con + lambda * |Theta|^2.
ag::Var TotalLoss(const ag::Var& rec, const ag::Var& mask, const ag::Var& con,
                  double lambda, std::span<const ag::Var> params);

// Config for one of the ablated variants "L2M", "PA" or "TA".
TrainConfig AblationVariant(const TrainConfig& base, const std::string& variant);

// One contiguous training window: inputs[t] predicts targets[t].
struct TrainingWindow {
  int user = 0;
  std::vector<int> inputs;
  std::vector<int> targets;
};

// Windows of every training sequence. A sequence of n items yields the n-1
// next-item pairs; more than max_len pairs are cut into consecutive windows
// of at most max_len.
std::vector<TrainingWindow> MakeWindows(std::span<const UserSequence> train,
                                        int max_len);

// Scores items for user histories with fixed parameters: graph encoding on
// the unmasked graph, then the sequence encoder's last position.
class Recommender {
 public:
  Recommender(const ParameterStore& params, const TrainConfig& config,
              const TransitionGraph& graph);

  // |histories| x |V|; every history must be nonempty.
  Eigen::MatrixXd Score(std::span<const std::vector<int>> histories) const;
  const Eigen::MatrixXd& item_table() const { return item_table_; }
  ScoreFn AsScoreFn() const;

 private:
  const ParameterStore* params_;
  TrainConfig config_;
  Eigen::MatrixXd item_table_;
};

// Loss terms of one optimization step, all recorded on the same tape.
struct StepTerms {
  std::vector<ag::Var> leaves;  // aligned with ParameterStore::Arrays()
  ag::Var rec, mask, con, decay, total;
  double reward = 1.0;
};

struct EpochStats {
  int epoch = 0;
  int64_t step = 0;
  double rec = 0.0;
  double mask = 0.0;
  double con = 0.0;
  double total = 0.0;
  double reward = 0.0;
  std::optional<double> val_hr10;
  std::optional<double> val_ndcg10;
};

struct TrainingLog {
  std::vector<EpochStats> epochs;
  void WriteCsv(std::ostream& out) const;
};

class Trainer {
 public:
  Trainer(const SplitCorpus& split, const TrainConfig& config);
  Trainer(const SplitCorpus& split, const TrainConfig& config,
          ParameterStore initial);

  // Recomputes relatedness, anchors, the path mask and the masked view.
  void Resample(int epoch);

  // Records every loss term for the given windows. `reward_for` maps the
  // step's recommendation loss to the mask-loss reward.
  StepTerms BuildStep(ag::Tape& tape, std::span<const int> window_ids,
                      int64_t step,
                      const std::function<double(double)>& reward_for);

  // One optimizer update; throws NumericalError on non-finite losses or
  // parameters.
  EpochStats Step(std::span<const int> window_ids);

  using EpochCallback = std::function<void(const EpochStats&, const Trainer&)>;
  TrainingLog Train(const EpochCallback& on_epoch = {});

  const TrainConfig& config() const { return config_; }
  const ParameterStore& params() const { return params_; }
  ParameterStore& mutable_params() { return params_; }
  const TransitionGraph& graph() const { return graph_; }
  const std::vector<TrainingWindow>& windows() const { return windows_; }
  const PathMask& mask() const { return mask_; }
  const RelatednessTable& relatedness() const { return relatedness_; }
  const std::vector<int>& mask_loss_nodes() const { return mask_loss_nodes_; }
  int64_t steps_taken() const { return step_; }

 private:
  std::vector<int> SampleRecNegatives(const std::vector<int>& window_ids,
                                      int64_t step) const;

  const SplitCorpus* split_;
  TrainConfig config_;
  ParameterStore params_;
  AdamOptimizer optimizer_;
  TaskAdaptiveState reward_state_;
  TransitionGraph graph_;
  std::vector<TrainingWindow> windows_;
  std::vector<std::vector<int>> user_items_;  // sorted train items per user
  RelatednessTable relatedness_;
  PathMask mask_;
  std::vector<int> mask_loss_nodes_;
  std::shared_ptr<const ag::SparseMatrix> propagation_;
  int64_t step_ = 0;
};

}  // namespace maerec
