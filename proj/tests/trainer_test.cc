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

#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "maerec/errors.h"
#include "oracles.h"
#include "test_corpus.h"

namespace maerec {
namespace {

using testing_util::SmallSplit;
using testing_util::TinyConfig;

Eigen::MatrixXd RandomMatrix(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = 2.0 * UniformOpen(rng) - 1.0;
  return m;
}

double RecLossOracle(const Eigen::MatrixXd& out, const Eigen::MatrixXd& table,
                     const std::vector<int>& targets, const std::vector<int>& negatives) {
  const size_t per = negatives.size() / targets.size();
  double total = 0.0;
  for (size_t t = 0; t < targets.size(); ++t) {
    total += oracle::ClippedLog(oracle::Sigmoid(out.row(t).dot(table.row(targets[t]))));
    for (size_t j = 0; j < per; ++j) {
      const double s = out.row(t).dot(table.row(negatives[t * per + j]));
      total += oracle::ClippedLog(1.0 - oracle::Sigmoid(s));
    }
  }
  return -total / static_cast<double>(targets.size());
}

TEST(RecommendationLoss, ZeroEmbeddingsGiveTwoLogTwo) {
  ag::Tape tape;
  const std::vector<int> targets = {0, 1, 2}, negatives = {3, 3, 0};
  auto loss = RecommendationLoss(tape.Constant(Eigen::MatrixXd::Zero(3, 4)),
                                 tape.Constant(Eigen::MatrixXd::Zero(5, 4)), targets, negatives);
  EXPECT_NEAR(loss.scalar(), 2.0 * std::log(2.0), 1e-15);
}

TEST(RecommendationLoss, MatchesScalarOracle) {
  Rng rng(1);
  for (int per : {1, 3}) {
    for (double scale : {0.5, 20.0}) {
      const Eigen::MatrixXd out = scale * RandomMatrix(rng, 4, 3);
      const auto table = RandomMatrix(rng, 7, 3);
      std::vector<int> targets = {1, 2, 6, 0}, negatives;
      for (int i = 0; i < 4 * per; ++i) negatives.push_back(static_cast<int>(UniformIndex(rng, 7)));
      ag::Tape tape;
      auto loss = RecommendationLoss(tape.Constant(out), tape.Constant(table), targets, negatives);
      EXPECT_NEAR(loss.scalar(), RecLossOracle(out, table, targets, negatives), 1e-7);
    }
  }
}

TEST(RecommendationLoss, GradientMatchesFiniteDifferences) {
  Rng rng(2);
  const auto out = RandomMatrix(rng, 3, 4);
  const auto table = RandomMatrix(rng, 6, 4);
  const std::vector<int> targets = {0, 5, 2}, negatives = {1, 3, 4, 4, 0, 1};
  ag::Tape tape;
  auto o = tape.Leaf(out);
  auto t = tape.Leaf(table);
  tape.Backward(RecommendationLoss(o, t, targets, negatives));
  auto f_out = [&](const Eigen::MatrixXd& x) { return RecLossOracle(x, table, targets, negatives); };
  auto f_tab = [&](const Eigen::MatrixXd& x) { return RecLossOracle(out, x, targets, negatives); };
  EXPECT_LT(oracle::RelativeError(tape.Grad(o), oracle::NumericGradient(f_out, out)), 1e-4);
  EXPECT_LT(oracle::RelativeError(tape.Grad(t), oracle::NumericGradient(f_tab, table)), 1e-4);
}

TEST(RecommendationLoss, IsPositionWeightedMeanOverBatches) {
  Rng rng(3);
  const auto table = RandomMatrix(rng, 9, 3);
  const auto a = RandomMatrix(rng, 2, 3), b = RandomMatrix(rng, 5, 3);
  const std::vector<int> ta = {1, 2}, na = {3, 4}, tb = {5, 6, 7, 8, 0}, nb = {1, 1, 2, 2, 3};
  Eigen::MatrixXd ab(7, 3);
  ab << a, b;
  std::vector<int> tab = ta, nab = na;
  tab.insert(tab.end(), tb.begin(), tb.end());
  nab.insert(nab.end(), nb.begin(), nb.end());
  ag::Tape tape;
  auto T = tape.Constant(table);
  const double la = RecommendationLoss(tape.Constant(a), T, ta, na).scalar();
  const double lb = RecommendationLoss(tape.Constant(b), T, tb, nb).scalar();
  const double lab = RecommendationLoss(tape.Constant(ab), T, tab, nab).scalar();
  EXPECT_NEAR(lab, (2.0 * la + 5.0 * lb) / 7.0, 1e-10);
  EXPECT_THROW(RecommendationLoss(tape.Constant(a), T, tb, nb), ArgumentError);
}

TEST(TotalLoss, SumsTermsWithWeightDecay) {
  Rng rng(4);
  ag::Tape tape;
  auto p1 = tape.Leaf(RandomMatrix(rng, 2, 3));
  auto p2 = tape.Leaf(RandomMatrix(rng, 4, 1));
  const ag::Var params[] = {p1, p2};
  auto rec = tape.Constant(Eigen::MatrixXd::Constant(1, 1, 0.7));
  auto mask = tape.Constant(Eigen::MatrixXd::Constant(1, 1, -0.2));
  auto con = tape.Constant(Eigen::MatrixXd::Constant(1, 1, 1.1));
  const double decay = 1e-2 * (p1.value().squaredNorm() + p2.value().squaredNorm());
  auto total = TotalLoss(rec, mask, con, 1e-2, params);
  EXPECT_NEAR(total.scalar(), 0.7 - 0.2 + 1.1 + decay, 1e-15);
  tape.Backward(total);
  EXPECT_TRUE(tape.Grad(p1).isApprox(2e-2 * p1.value()));
}

TEST(AblationVariant, SetsOneFlag) {
  const TrainConfig base;
  EXPECT_TRUE(AblationVariant(base, "L2M").disable_learned_mask);
  EXPECT_TRUE(AblationVariant(base, "PA").disable_path_masking);
  EXPECT_EQ(AblationVariant(base, "PA").EffectivePathScale(), 1);
  EXPECT_TRUE(AblationVariant(base, "TA").disable_task_adaptive);
  EXPECT_FALSE(AblationVariant(base, "TA").disable_path_masking);
  EXPECT_THROW(AblationVariant(base, "XYZ"), ArgumentError);
}

TEST(MakeWindows, ChunksLongSequencesIntoNextItemPairs) {
  std::vector<UserSequence> train = {{0, {}}, {1, {4}}, {2, {}}};
  for (int i = 0; i < 24; ++i) train[2].items.push_back(i);
  train[0].items = {7, 8, 9};
  auto windows = MakeWindows(train, 10);
  ASSERT_EQ(windows.size(), 4u);
  EXPECT_EQ(windows[0].inputs, (std::vector<int>{7, 8}));
  EXPECT_EQ(windows[0].targets, (std::vector<int>{8, 9}));
  EXPECT_EQ(windows[1].inputs.size(), 10u);
  EXPECT_EQ(windows[3].inputs, (std::vector<int>{20, 21, 22}));
  EXPECT_EQ(windows[3].targets, (std::vector<int>{21, 22, 23}));
  // Every next-item pair appears exactly once.
  int pairs = 0;
  for (const auto& w : windows) {
    for (size_t t = 0; t < w.inputs.size(); ++t) {
      if (w.user == 2) EXPECT_EQ(w.targets[t], w.inputs[t] + 1);
      ++pairs;
    }
  }
  EXPECT_EQ(pairs, 2 + 23);
  EXPECT_THROW(MakeWindows(train, 0), ArgumentError);
}

class TrainerTest : public ::testing::Test {
 protected:
  void SetUp() override { split_ = SmallSplit(80, 50, 3, true); }
  SplitCorpus split_;
};

TEST_F(TrainerTest, EveryParameterReceivesGradient) {
  auto config = TinyConfig();
  config.dropout = 0.0;
  Trainer trainer(split_, config);
  trainer.Resample(0);
  ASSERT_FALSE(trainer.mask().masked_edges.empty());
  std::vector<int> ids(trainer.windows().size());
  std::iota(ids.begin(), ids.end(), 0);
  ag::Tape tape;
  auto terms = trainer.BuildStep(tape, ids, 0, [](double) { return 1.0; });
  EXPECT_GT(terms.con.scalar(), 0.0);
  EXPECT_NE(terms.mask.scalar(), 0.0);
  tape.Backward(terms.total);
  auto arrays = trainer.mutable_params().Arrays();
  ASSERT_EQ(arrays.size(), terms.leaves.size());
  for (size_t i = 0; i < arrays.size(); ++i) {
    EXPECT_GT(tape.Grad(terms.leaves[i]).cwiseAbs().maxCoeff(), 0.0) << arrays[i].name;
  }
}

TEST_F(TrainerTest, FullStepGradientMatchesFiniteDifferences) {
  auto config = TinyConfig();
  config.dropout = 0.0;
  config.embedding_dim = 4;
  const auto small = SmallSplit(12, 50, 5, false);
  Trainer trainer(small, config);
  trainer.Resample(0);
  const int ids[] = {0, 1, 2, 3};
  auto total_at = [&](int array, const Eigen::MatrixXd& x) {
    auto arrays = trainer.mutable_params().Arrays();
    const Eigen::MatrixXd keep = *arrays[array].data;
    *arrays[array].data = x;
    ag::Tape t;
    const double v = trainer.BuildStep(t, ids, 0, [](double) { return 0.7; }).total.scalar();
    *arrays[array].data = keep;
    return v;
  };
  ag::Tape tape;
  auto terms = trainer.BuildStep(tape, ids, 0, [](double) { return 0.7; });
  tape.Backward(terms.total);
  auto arrays = trainer.mutable_params().Arrays();
  for (int a : {0, 1, 2, 4, 10, static_cast<int>(arrays.size()) - 4}) {
    const Eigen::MatrixXd x = *arrays[a].data;
    auto numeric = oracle::NumericGradient([&](const Eigen::MatrixXd& y) { return total_at(a, y); }, x);
    EXPECT_LT(oracle::RelativeError(tape.Grad(terms.leaves[a]), numeric), 1e-4) << arrays[a].name;
  }
}

TEST_F(TrainerTest, TrainingIsDeterministic) {
  auto config = TinyConfig();
  auto run = [&] {
    Trainer trainer(split_, config);
    std::ostringstream out;
    trainer.Train().WriteCsv(out);
    return out.str();
  };
  const auto a = run();
  EXPECT_EQ(a, run());
  EXPECT_NE(a.find("epoch,step,L_rec,L_mask,L_con,total,r,val_HR@10,val_NDCG@10"),
            std::string::npos);
}

TEST_F(TrainerTest, DisabledSslLogsZeroAuxiliaryLosses) {
  auto config = TinyConfig();
  config.disable_ssl = true;
  Trainer trainer(split_, config);
  auto log = trainer.Train();
  ASSERT_EQ(log.epochs.size(), 2u);
  for (const auto& e : log.epochs) {
    EXPECT_EQ(e.mask, 0.0);
    EXPECT_EQ(e.con, 0.0);
    EXPECT_GT(e.rec, 0.0);
    ASSERT_TRUE(e.val_hr10.has_value());
  }
  EXPECT_TRUE(trainer.mask().masked_edges.empty());
}

TEST_F(TrainerTest, ZeroEpochsLeavesParametersUntouched) {
  auto config = TinyConfig();
  config.epochs = 0;
  Trainer trainer(split_, config);
  const auto before = trainer.params().item_embeddings;
  EXPECT_TRUE(trainer.Train().epochs.empty());
  EXPECT_EQ(trainer.params().item_embeddings, before);
  EXPECT_EQ(trainer.steps_taken(), 0);
}

TEST_F(TrainerTest, RecommendationLossFallsDuringTraining) {
  auto config = TinyConfig();
  config.epochs = 6;
  config.learning_rate = 5e-3;
  Trainer trainer(split_, config);
  auto log = trainer.Train();
  EXPECT_LT(log.epochs.back().rec, log.epochs.front().rec);
}

TEST_F(TrainerTest, NonFiniteParametersAbortTheStep) {
  Trainer trainer(split_, TinyConfig());
  trainer.Resample(0);
  trainer.mutable_params().item_embeddings(0, 0) = std::nan("");
  const int ids[] = {0};
  EXPECT_THROW(trainer.Step(ids), NumericalError);
}

TEST_F(TrainerTest, MismatchedParametersRejected) {
  auto config = TinyConfig();
  EXPECT_THROW(Trainer(split_, config, InitializeParameters(config, split_.num_items + 1)),
               ConfigError);
}

TEST_F(TrainerTest, RecommenderScoresEveryItem) {
  Trainer trainer(split_, TinyConfig());
  Recommender model(trainer.params(), trainer.config(), trainer.graph());
  const std::vector<std::vector<int>> histories = {{1, 2, 3}, {4}};
  auto scores = model.Score(histories);
  EXPECT_EQ(scores.rows(), 2);
  EXPECT_EQ(scores.cols(), split_.num_items);
  const std::vector<std::vector<int>> one = {{4}};
  EXPECT_LT((model.Score(one).row(0) - scores.row(1)).cwiseAbs().maxCoeff(), 1e-12);
  const std::vector<std::vector<int>> empty = {{}};
  EXPECT_THROW(model.Score(empty), ArgumentError);
}

}  // namespace
}  // namespace maerec
