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

#include "maerec/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <glog/logging.h>

#include "maerec/errors.h"
#include "maerec/graph_autoencoder.h"
#include "maerec/random.h"
#include "maerec/sequence_encoder.h"

namespace maerec {
namespace {

constexpr double kProbFloor = 1e-8;
constexpr double kProbCeil = 1.0 - 1e-8;

// Stream tags for DeriveSeed.
constexpr uint64_t kShuffleStream = 0x73687566;
constexpr uint64_t kDropoutStream = 0x64726f70;
constexpr uint64_t kRecNegStream = 0x72656e67;
constexpr uint64_t kConNegStream = 0x636e6567;
constexpr uint64_t kRelateStream = 0x72656c61;
constexpr uint64_t kAnchorStream = 0x616e6368;
constexpr uint64_t kWalkStream = 0x77616c6b;
constexpr uint64_t kEvalStream = 0x76616c69;

TransformerVars ConstantTransformer(ag::Tape& tape, const TransformerParams& p) {
  TransformerVars vars;
  vars.positional = tape.Constant(p.positional);
  vars.heads = p.heads;
  for (const auto& b : p.blocks) {
    vars.blocks.push_back({tape.Constant(b.query), tape.Constant(b.key),
                           tape.Constant(b.value), tape.Constant(b.ffn_w1),
                           tape.Constant(b.ffn_w2), tape.Constant(b.ffn_b1),
                           tape.Constant(b.ffn_b2), tape.Constant(b.norm_gain),
                           tape.Constant(b.norm_bias)});
  }
  return vars;
}

}  // namespace

ag::Var RecommendationLoss(const ag::Var& outputs, const ag::Var& item_table,
                           std::span<const int> targets,
                           std::span<const int> negatives) {
  const auto positions = static_cast<size_t>(outputs.rows());
  if (targets.size() != positions || positions == 0 ||
      negatives.size() % positions != 0 || negatives.empty()) {
    throw ArgumentError("recommendation loss: targets/negatives do not match outputs");
  }
  const size_t per = negatives.size() / positions;
  auto pos_logits = ag::RowDot(outputs, ag::GatherRows(item_table, targets));
  auto pos_term = ag::Sum(ag::LogSigmoidClipped(pos_logits, kProbFloor, kProbCeil));
  ag::Var repeated = outputs;
  if (per > 1) {
    std::vector<int> rows(negatives.size());
    for (size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i / per);
    repeated = ag::GatherRows(outputs, rows);
  }
  // log(1 - sigmoid(x)) = log sigmoid(-x); clipping the latter to the same
  // range clips 1 - sigmoid(x).
  auto neg_logits = ag::Scale(ag::RowDot(repeated, ag::GatherRows(item_table, negatives)), -1.0);
  auto neg_term = ag::Sum(ag::LogSigmoidClipped(neg_logits, kProbFloor, kProbCeil));
  return ag::Scale(ag::Add(pos_term, neg_term), -1.0 / static_cast<double>(positions));
}

ag::Var WeightDecay(std::span<const ag::Var> params, double lambda) {
  if (params.empty()) throw ArgumentError("weight decay over no parameters");
  std::vector<ag::Var> norms;
  norms.reserve(params.size());
  for (const auto& p : params) norms.push_back(ag::SquaredNorm(p));
  return ag::Scale(ag::AddN(norms), lambda);
}

double WeightDecayValue(const ParameterStore& params, double lambda) {
  return lambda * params.SquaredNorm();
}

ag::Var TotalLoss(const ag::Var& rec, const ag::Var& mask, const ag::Var& con,
                  double lambda, std::span<const ag::Var> params) {
  const ag::Var terms[] = {rec, mask, con, WeightDecay(params, lambda)};
  return ag::AddN(terms);
}

TrainConfig AblationVariant(const TrainConfig& base, const std::string& variant) {
  TrainConfig out = base;
  if (variant == "L2M") {
    out.disable_learned_mask = true;
  } else if (variant == "PA") {
    out.disable_path_masking = true;
  } else if (variant == "TA") {
    out.disable_task_adaptive = true;
  } else {
    throw ArgumentError("unknown ablation variant '" + variant + "' (L2M, PA, TA)");
  }
  return out;
}

std::vector<TrainingWindow> MakeWindows(std::span<const UserSequence> train,
                                        int max_len) {
  if (max_len < 1) throw ArgumentError("max_len must be positive");
  std::vector<TrainingWindow> windows;
  for (const auto& seq : train) {
    const int pairs = seq.length() - 1;
    for (int start = 0; start < pairs; start += max_len) {
      const int end = std::min(pairs, start + max_len);
      TrainingWindow w;
      w.user = seq.user;
      w.inputs.assign(seq.items.begin() + start, seq.items.begin() + end);
      w.targets.assign(seq.items.begin() + start + 1, seq.items.begin() + end + 1);
      windows.push_back(std::move(w));
    }
  }
  return windows;
}

Recommender::Recommender(const ParameterStore& params, const TrainConfig& config,
                         const TransitionGraph& graph)
    : params_(&params), config_(config) {
  item_table_ = EncodeGraph(MaskedGraphView(graph), params.item_embeddings,
                            config.gnn_layers, config.normalize_graph)
                    .final_embedding;
}

Eigen::MatrixXd Recommender::Score(std::span<const std::vector<int>> histories) const {
  for (const auto& h : histories) {
    if (h.empty()) throw ArgumentError("cannot score an empty history");
  }
  ag::Tape tape;
  const auto batch = SequenceBatch::FromSequences(histories, config_.max_len);
  auto table = tape.Constant(item_table_);
  auto vars = ConstantTransformer(tape, params_->transformer);
  auto packed = EmbedSequence(batch, table, vars.positional);
  auto out = EncodeSequence(packed, vars, config_.Encoder(false), nullptr);
  const auto last = LastPositions(packed.offsets);
  Eigen::MatrixXd users(static_cast<Eigen::Index>(last.size()), out.cols());
  for (size_t b = 0; b < last.size(); ++b) {
    users.row(static_cast<Eigen::Index>(b)) = out.value().row(last[b]);
  }
  return users * item_table_.transpose();
}

ScoreFn Recommender::AsScoreFn() const {
  return [this](std::span<const std::vector<int>> h) { return Score(h); };
}

void TrainingLog::WriteCsv(std::ostream& out) const {
  out << "epoch,step,L_rec,L_mask,L_con,total,r,val_HR@10,val_NDCG@10\n";
  for (const auto& e : epochs) {
    out << fmt::format("{},{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},", e.epoch,
                       e.step, e.rec, e.mask, e.con, e.total, e.reward);
    if (e.val_hr10) out << fmt::format("{:.10g}", *e.val_hr10);
    out << ',';
    if (e.val_ndcg10) out << fmt::format("{:.10g}", *e.val_ndcg10);
    out << '\n';
  }
}

Trainer::Trainer(const SplitCorpus& split, const TrainConfig& config)
    : Trainer(split, config, InitializeParameters(config, split.num_items)) {}

Trainer::Trainer(const SplitCorpus& split, const TrainConfig& config,
                 ParameterStore initial)
    : split_(&split),
      config_(config),
      params_(std::move(initial)),
      optimizer_(config.learning_rate, config.adam_beta1, config.adam_beta2,
                 config.adam_eps),
      reward_state_(config.delta, config.epsilon) {
  config_.Validate();
  if (params_.item_embeddings.rows() != split.num_items) {
    throw ConfigError("parameter table does not match the corpus item count");
  }
  graph_ = BuildGraph(split.train, split.num_items, config_.graph_window);
  windows_ = MakeWindows(split.train, config_.max_len);
  int max_user = -1;
  for (const auto& s : split.train) max_user = std::max(max_user, s.user);
  user_items_.resize(static_cast<size_t>(max_user + 1));
  for (const auto& s : split.train) {
    auto& items = user_items_[s.user];
    items = s.items;
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }
  propagation_ = PropagationMatrix(MaskedGraphView(graph_), config_.normalize_graph);
}

void Trainer::Resample(int epoch) {
  if (config_.disable_ssl) return;
  const int n = graph_.num_nodes();
  const int hops = config_.EffectiveRelatednessHops();
  relatedness_ = SemanticRelatedness(graph_, params_.item_embeddings, hops,
                                     config_.neighborhood_cap,
                                     DeriveSeed(config_.seed, kRelateStream, epoch));
  std::vector<int> anchors;
  if (config_.disable_learned_mask) {
    anchors = RandomAnchors(n, config_.anchors,
                            DeriveSeed(config_.seed, kAnchorStream, epoch));
  } else {
    anchors = SelectAnchors(relatedness_.gamma_perturbed, config_.anchors);
  }
  mask_ = ExpandSample(graph_, anchors, config_.drop_ratio,
                       config_.EffectivePathScale(),
                       DeriveSeed(config_.seed, kWalkStream, epoch));
  switch (config_.Scope()) {
    case MaskLossScope::kPool:
      mask_loss_nodes_ = TopNodes(relatedness_.gamma_perturbed,
                                  std::min(4 * config_.anchors, n));
      break;
    case MaskLossScope::kAnchors:
      mask_loss_nodes_ = mask_.anchors;
      break;
    case MaskLossScope::kAll:
      mask_loss_nodes_.resize(n);
      std::iota(mask_loss_nodes_.begin(), mask_loss_nodes_.end(), 0);
      break;
  }
  const MaskedGraphView view(graph_, std::set<Edge>(mask_.masked_edges.begin(),
                                                    mask_.masked_edges.end()));
  propagation_ = PropagationMatrix(view, config_.normalize_graph);
  VLOG(1) << fmt::format("epoch {}: {} anchors, {} walk nodes, {} masked edges",
                         epoch, mask_.anchors.size(), mask_.walk_nodes.size(),
                         mask_.masked_edges.size());
}

std::vector<int> Trainer::SampleRecNegatives(const std::vector<int>& window_ids,
                                             int64_t step) const {
  Rng rng(DeriveSeed(config_.seed, kRecNegStream, static_cast<uint64_t>(step)));
  const int n = split_->num_items;
  std::vector<int> out;
  for (int id : window_ids) {
    const auto& w = windows_[id];
    const auto& seen = user_items_[w.user];
    const bool saturated = static_cast<int>(seen.size()) >= n;
    for (size_t t = 0; t < w.targets.size(); ++t) {
      for (int j = 0; j < config_.n_neg_rec; ++j) {
        int item;
        do {
          item = static_cast<int>(UniformIndex(rng, n));
        } while (saturated ? item == w.targets[t]
                           : std::binary_search(seen.begin(), seen.end(), item));
        out.push_back(item);
      }
    }
  }
  return out;
}

StepTerms Trainer::BuildStep(ag::Tape& tape, std::span<const int> window_ids,
                             int64_t step,
                             const std::function<double(double)>& reward_for) {
  StepTerms terms;
  auto arrays = params_.Arrays();
  for (const auto& a : arrays) terms.leaves.push_back(tape.Leaf(*a.data));
  const ag::Var& base = terms.leaves[0];

  // Leaf order follows ParameterStore::Arrays().
  TransformerVars tvars;
  tvars.positional = terms.leaves[1];
  tvars.heads = params_.transformer.heads;
  size_t at = 2;
  for (size_t b = 0; b < params_.transformer.blocks.size(); ++b, at += 9) {
    const auto* l = &terms.leaves[at];
    tvars.blocks.push_back({l[0], l[1], l[2], l[3], l[4], l[5], l[6], l[7], l[8]});
  }
  DecoderVars dvars{terms.leaves[at], terms.leaves[at + 1], terms.leaves[at + 2],
                    terms.leaves[at + 3]};

  auto layers = EncodeGraph(propagation_, base, config_.gnn_layers);
  const ag::Var& table = layers.final_embedding;

  std::vector<int> ids(window_ids.begin(), window_ids.end());
  std::vector<std::vector<int>> inputs;
  std::vector<int> targets;
  for (int id : ids) {
    inputs.push_back(windows_[id].inputs);
    targets.insert(targets.end(), windows_[id].targets.begin(),
                   windows_[id].targets.end());
  }
  const auto batch = SequenceBatch::FromSequences(inputs, config_.max_len);
  Rng dropout_rng(DeriveSeed(config_.seed, kDropoutStream, static_cast<uint64_t>(step)));
  auto packed = EmbedSequence(batch, table, tvars.positional);
  auto out = EncodeSequence(packed, tvars, config_.Encoder(true), &dropout_rng);
  terms.rec = RecommendationLoss(out, table, targets, SampleRecNegatives(ids, step));
  terms.reward = reward_for(terms.rec.scalar());

  auto zero = tape.Constant(Eigen::MatrixXd::Zero(1, 1));
  terms.con = zero;
  terms.mask = zero;
  if (!config_.disable_ssl) {
    const auto recon = SampleReconstructionBatch(
        graph_, mask_.masked_edges, config_.n_neg_con,
        DeriveSeed(config_.seed, kConNegStream, static_cast<uint64_t>(step)));
    terms.con = ReconstructionLoss(layers, dvars, recon);
    if (config_.UsesMaskLoss() && !mask_loss_nodes_.empty()) {
      std::vector<double> noise;
      for (int v : mask_loss_nodes_) noise.push_back(relatedness_.gumbel_noise[v]);
      auto gamma = RelatednessOnTape(base, relatedness_.neighborhoods, mask_loss_nodes_);
      terms.mask = MaskLoss(gamma, noise, terms.reward);
    }
  }
  terms.decay = WeightDecay(terms.leaves, config_.weight_decay);
  const ag::Var all[] = {terms.rec, terms.mask, terms.con, terms.decay};
  terms.total = ag::AddN(all);
  return terms;
}

EpochStats Trainer::Step(std::span<const int> window_ids) {
  ag::Tape tape;
  auto terms = BuildStep(tape, window_ids, step_,
                         [this](double rec) { return reward_state_.Update(rec); });
  EpochStats stats;
  stats.step = step_;
  stats.rec = terms.rec.scalar();
  stats.mask = terms.mask.scalar();
  stats.con = terms.con.scalar();
  stats.total = terms.total.scalar();
  stats.reward = terms.reward;
  if (!std::isfinite(stats.rec) || !std::isfinite(stats.mask) ||
      !std::isfinite(stats.con) || !std::isfinite(stats.total)) {
    std::ostringstream dump;
    dump << fmt::format("non-finite loss at step {}: L_rec={} L_mask={} L_con={} total={}; windows:",
                        step_, stats.rec, stats.mask, stats.con, stats.total);
    for (int id : window_ids) {
      dump << fmt::format(" user {} [{}]", windows_[id].user,
                          fmt::join(windows_[id].inputs, ","));
    }
    LOG(ERROR) << dump.str();
    throw NumericalError(dump.str());
  }
  tape.Backward(terms.total);
  auto arrays = params_.Arrays();
  std::vector<Eigen::MatrixXd> grads;
  grads.reserve(arrays.size());
  for (const auto& leaf : terms.leaves) grads.push_back(tape.Grad(leaf));
  optimizer_.Step(arrays, grads);
  if (!params_.AllFinite()) {
    throw NumericalError(fmt::format("non-finite parameters after step {}", step_));
  }
  ++step_;
  return stats;
}

TrainingLog Trainer::Train(const EpochCallback& on_epoch) {
  TrainingLog log;
  std::vector<int> order(windows_.size());
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    if (epoch % config_.resample_interval == 0) Resample(epoch);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(DeriveSeed(config_.seed, kShuffleStream, static_cast<uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<size_t>(UniformIndex(rng, static_cast<int64_t>(i)))]);
    }
    EpochStats epoch_stats;
    epoch_stats.epoch = epoch;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += config_.batch_size) {
      const size_t end = std::min(order.size(), start + config_.batch_size);
      const auto s = Step(std::span<const int>(order.data() + start, end - start));
      epoch_stats.rec += s.rec;
      epoch_stats.mask += s.mask;
      epoch_stats.con += s.con;
      epoch_stats.total += s.total;
      epoch_stats.reward += s.reward;
      ++batches;
    }
    if (batches > 0) {
      epoch_stats.rec /= batches;
      epoch_stats.mask /= batches;
      epoch_stats.con /= batches;
      epoch_stats.total /= batches;
      epoch_stats.reward /= batches;
    }
    epoch_stats.step = step_;
    if (config_.validate_each_epoch && split_->has_validation()) {
      Recommender model(params_, config_, graph_);
      const auto report = Evaluate(model.AsScoreFn(), *split_,
                                   Protocol::Sampled(config_.eval_candidates),
                                   DeriveSeed(config_.seed, kEvalStream),
                                   EvalTarget::kValidation);
      epoch_stats.val_hr10 = report.at(10).hr;
      epoch_stats.val_ndcg10 = report.at(10).ndcg;
    }
    LOG(INFO) << fmt::format("epoch {} L_rec={:.5f} L_mask={:.5f} L_con={:.5f} r={:.3f}",
                             epoch, epoch_stats.rec, epoch_stats.mask,
                             epoch_stats.con, epoch_stats.reward);
    log.epochs.push_back(epoch_stats);
    if (on_epoch) on_epoch(epoch_stats, *this);
  }
  return log;
}

}  // namespace maerec
