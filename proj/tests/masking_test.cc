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

#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "maerec/errors.h"
#include "maerec/random.h"
#include "oracles.h"

namespace maerec {
namespace {

TransitionGraph RandomGraph(Rng& rng, int n, double density) {
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (UniformOpen(rng) < density) edges.push_back({u, v});
    }
  }
  return TransitionGraph(n, edges);
}

Eigen::MatrixXd RandomMatrix(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = 2.0 * UniformOpen(rng) - 1.0;
  return m;
}

TEST(Relatedness, ParallelNeighbors) {
  Eigen::MatrixXd e(3, 2);
  e << 1, 2, 2, 4, 0.5, 1;
  auto gamma = RelatednessScores(e, {{1, 2}, {0}, {0}});
  EXPECT_NEAR(gamma[0], 1.0, 1e-12);
}

TEST(Relatedness, HalfOrthogonal) {
  Eigen::MatrixXd e(3, 2);
  e << 1, 0, 1, 0, 0, 1;
  auto gamma = RelatednessScores(e, {{1, 2}, {}, {}});
  EXPECT_NEAR(gamma[0], 0.5, 1e-12);
  EXPECT_EQ(gamma[1], 0.0);
}

TEST(Relatedness, ZeroRowIsFloored) {
  Eigen::MatrixXd e(2, 2);
  e << 0, 0, 1, 0;
  auto gamma = RelatednessScores(e, {{1}, {0}});
  EXPECT_TRUE(std::isfinite(gamma[0]));
  EXPECT_EQ(gamma[0], 0.0);
}

TEST(Relatedness, MatchesDenseOracleAndIsScaleInvariant) {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    auto g = RandomGraph(rng, 30, 0.12);
    auto e = RandomMatrix(rng, 30, 8);
    for (int k : {1, 2}) {
      auto table = SemanticRelatedness(g, e, k, kNoCap, trial);
      const auto expected = oracle::Relatedness(e, table.neighborhoods);
      for (int v = 0; v < 30; ++v) {
        EXPECT_NEAR(table.gamma[v], expected[v], 1e-12);
        EXPECT_GE(table.gamma[v], -1.0 - 1e-12);
        EXPECT_LE(table.gamma[v], 1.0 + 1e-12);
        EXPECT_DOUBLE_EQ(table.gamma_perturbed[v], table.gamma[v] + table.gumbel_noise[v]);
      }
      // Rescaling any row by c > 0 leaves every score unchanged.
      auto scaled = e;
      const int row = static_cast<int>(UniformIndex(rng, 30));
      scaled.row(row) *= 0.5 + 8.0 * UniformOpen(rng);
      auto rescored = RelatednessScores(scaled, table.neighborhoods);
      for (int v = 0; v < 30; ++v) EXPECT_NEAR(rescored[v], table.gamma[v], 1e-12);
    }
  }
}

TEST(Gumbel, ClosedFormPoints) {
  EXPECT_NEAR(GumbelFromUniform(std::exp(-1.0)), 0.0, 1e-15);
  EXPECT_NEAR(GumbelFromUniform(std::exp(-std::exp(1.0))), -1.0, 1e-12);
  EXPECT_TRUE(std::isfinite(GumbelFromUniform(0.0)));
  EXPECT_TRUE(std::isfinite(GumbelFromUniform(1.0)));
}

TEST(Gumbel, PerturbIsDeterministic) {
  std::vector<double> gamma{0.1, 0.2, 0.3};
  EXPECT_EQ(GumbelPerturb(gamma, 5), GumbelPerturb(gamma, 5));
  EXPECT_NE(GumbelPerturb(gamma, 5), GumbelPerturb(gamma, 6));
  auto noise = GumbelNoise(3, 5);
  auto perturbed = GumbelPerturb(gamma, 5);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(perturbed[i], gamma[i] + noise[i]);
}

TEST(Gumbel, MomentsMatchStandardGumbel) {
  const auto noise = GumbelNoise(100000, 2024);
  const double mean = std::accumulate(noise.begin(), noise.end(), 0.0) / noise.size();
  double var = 0.0;
  for (double g : noise) var += (g - mean) * (g - mean);
  var /= noise.size() - 1;
  EXPECT_NEAR(mean, 0.5772156649, 0.01);
  EXPECT_NEAR(var, M_PI * M_PI / 6.0, 0.05);
}

TEST(SelectAnchors, AllNodesAndOverflow) {
  std::vector<double> g{0.3, 0.1, 0.2};
  EXPECT_EQ(SelectAnchors(g, 3), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(SelectAnchors(g, 10), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(SelectAnchors(g, 1), (std::vector<int>{0}));
}

TEST(SelectAnchors, DominantNodeWins) {
  std::vector<double> gamma{10.0, 0.0, 0.0};
  int wins = 0;
  for (int s = 0; s < 2000; ++s) wins += SelectAnchors(GumbelPerturb(gamma, s), 1)[0] == 0;
  EXPECT_GT(wins, 0.99 * 2000);
}

// P(selected set) under sequential softmax sampling without replacement.
std::map<std::vector<int>, double> PlackettLuceSets(const std::vector<double>& gamma, int alpha) {
  std::vector<double> p(gamma.size());
  double z = 0.0;
  for (size_t i = 0; i < gamma.size(); ++i) z += (p[i] = std::exp(gamma[i]));
  for (auto& x : p) x /= z;
  std::map<std::vector<int>, double> out;
  std::vector<int> order(gamma.size());
  std::iota(order.begin(), order.end(), 0);
  do {
    double prob = 1.0, remaining = 1.0;
    for (int i = 0; i < alpha; ++i) {
      prob *= p[order[i]] / remaining;
      remaining -= p[order[i]];
    }
    std::vector<int> set(order.begin(), order.begin() + alpha);
    std::sort(set.begin(), set.end());
    out[set] += prob;
  } while (std::next_permutation(order.begin(), order.end()));
  // Each set was counted once per ordering of the unselected tail.
  double total = 0.0;
  for (auto& [s, prob] : out) total += prob;
  for (auto& [s, prob] : out) prob /= total;
  return out;
}

TEST(SelectAnchors, FrequenciesMatchSoftmaxWithoutReplacement) {
  const std::vector<double> gamma{0.8, 0.1, -0.5};
  for (int alpha : {1, 2}) {
    const auto expected = PlackettLuceSets(gamma, alpha);
    std::map<std::vector<int>, int> counts;
    const int trials = 10000;
    for (int s = 0; s < trials; ++s) ++counts[SelectAnchors(GumbelPerturb(gamma, 1000 + s), alpha)];
    double chi2 = 0.0;
    for (const auto& [set, prob] : expected) {
      const double e = prob * trials;
      chi2 += (counts[set] - e) * (counts[set] - e) / e;
    }
    // Three outcomes, two degrees of freedom: survival function exp(-x/2).
    EXPECT_GT(std::exp(-chi2 / 2.0), 0.01) << "alpha=" << alpha << " chi2=" << chi2;
  }
}

TEST(RandomAnchors, UniformAndSized) {
  std::vector<int> counts(10, 0);
  for (int s = 0; s < 5000; ++s) {
    auto a = RandomAnchors(10, 3, s);
    ASSERT_EQ(a.size(), 3u);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
    for (int v : a) ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c / 5000.0, 0.3, 0.03);
}

TEST(ExpandSample, TinyDropRatioMasksNothing) {
  Rng rng(4);
  auto g = RandomGraph(rng, 40, 0.1);
  std::vector<int> anchors{0, 5, 9};
  auto mask = ExpandSample(g, anchors, 1e-9, 3, 12);
  EXPECT_TRUE(mask.masked_edges.empty());
  EXPECT_EQ(mask.walk_nodes, anchors);
}

TEST(ExpandSample, StarAdmitAll) {
  std::vector<Edge> spokes;
  for (int i = 1; i <= 6; ++i) spokes.push_back({0, i});
  TransitionGraph star(7, spokes);
  std::vector<int> anchors{0};
  auto mask = ExpandSample(star, anchors, 2, [](int) { return 1.0; }, 1);
  EXPECT_EQ(mask.masked_edges, spokes);
  EXPECT_EQ(mask.walk_nodes.size(), 7u);
}

TEST(ExpandSample, RejectsBadArguments) {
  TransitionGraph g(3, std::vector<Edge>{{0, 1}});
  std::vector<int> anchors{0};
  EXPECT_THROW(ExpandSample(g, anchors, 0.0, 2, 1), ArgumentError);
  EXPECT_THROW(ExpandSample(g, anchors, 1.0, 2, 1), ArgumentError);
  EXPECT_THROW(ExpandSample(g, anchors, 0.5, 0, 1), ArgumentError);
}

TEST(ExpandSample, DepthOneOnlyTouchesAnchorEdges) {
  Rng rng(8);
  auto g = RandomGraph(rng, 30, 0.2);
  std::vector<int> anchors{3, 7};
  auto mask = ExpandSample(g, anchors, 0.9, 1, 5);
  for (const auto& [a, b] : mask.masked_edges) {
    EXPECT_TRUE(a == 3 || a == 7 || b == 3 || b == 7);
  }
}

// Post-hoc validation of a walk: edges exist, anchors are members, and every
// walk node is within max_depth hops of an anchor along masked edges, so any
// anchor-to-node path through the mask has at most 2k edges.
void ValidateMask(const TransitionGraph& g, const PathMask& mask) {
  std::set<int> walk(mask.walk_nodes.begin(), mask.walk_nodes.end());
  for (int a : mask.anchors) ASSERT_TRUE(walk.count(a));
  std::vector<std::vector<int>> adj(g.num_nodes());
  for (const auto& [a, b] : mask.masked_edges) {
    ASSERT_TRUE(g.HasEdge(a, b));
    ASSERT_TRUE(walk.count(a) && walk.count(b));
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> dist(g.num_nodes(), -1);
  std::queue<int> q;
  for (int a : mask.anchors) {
    dist[a] = 0;
    q.push(a);
  }
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int w : adj[u]) {
      if (dist[w] < 0) {
        dist[w] = dist[u] + 1;
        q.push(w);
      }
    }
  }
  for (int v : mask.walk_nodes) {
    ASSERT_GE(dist[v], 0);
    ASSERT_LE(dist[v], mask.max_depth);
    ASSERT_LE(dist[v], mask.node_depth[v]);
  }
}

TEST(ExpandSample, RandomizedValidity) {
  Rng rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 10 + static_cast<int>(UniformIndex(rng, 31));
    auto g = RandomGraph(rng, n, 0.05 + 0.2 * UniformOpen(rng));
    auto anchors = RandomAnchors(n, 1 + static_cast<int>(UniformIndex(rng, 5)), trial);
    const double p = 0.05 + 0.9 * UniformOpen(rng);
    const int k = 1 + static_cast<int>(UniformIndex(rng, 5));
    auto mask = ExpandSample(g, anchors, p, k, trial);
    ValidateMask(g, mask);
    auto again = ExpandSample(g, anchors, p, k, trial);
    EXPECT_EQ(again.masked_edges, mask.masked_edges);
    EXPECT_EQ(again.walk_nodes, mask.walk_nodes);
  }
}

TEST(TaskReward, Branches) {
  // Improvements: 0.3, 0.3, then 0.5 -> above the mean.
  std::vector<double> up{2.0, 1.7, 1.4, 0.9};
  EXPECT_EQ(TaskReward(up, 5, 0.1), 1.0);
  std::vector<double> down{2.0, 1.7, 1.4, 1.3};
  EXPECT_EQ(TaskReward(down, 5, 0.1), 0.1);
  std::vector<double> flat{1.0, 1.0, 1.0, 1.0};
  EXPECT_EQ(TaskReward(flat, 5, 0.1), 0.1);
  std::vector<double> warmup{1.0, 0.5};
  EXPECT_EQ(TaskReward(warmup, 5, 0.1), 1.0);
}

TEST(TaskReward, UsesOnlyDeltaPreviousImprovements) {
  // An old large improvement outside the delta window must be ignored.
  std::vector<double> h{10.0, 2.0, 1.9, 1.8, 1.65};
  EXPECT_EQ(TaskReward(h, 2, 0.1), 1.0);
  EXPECT_EQ(TaskReward(h, 3, 0.1), 0.1);
}

TEST(TaskAdaptiveState, RingBuffer) {
  TaskAdaptiveState state(3, 0.2);
  EXPECT_EQ(state.Update(5.0), 1.0);
  EXPECT_EQ(state.Update(4.0), 1.0);
  for (int i = 0; i < 10; ++i) {
    const double r = state.Update(3.0 - i * 0.1);
    EXPECT_TRUE(r == 1.0 || r == 0.2);
  }
  EXPECT_EQ(state.history().size(), 5u);
  EXPECT_THROW(TaskAdaptiveState(1, 0.1), ArgumentError);
  EXPECT_THROW(TaskAdaptiveState(3, 1.0), ArgumentError);
}

TEST(MaskLoss, Arithmetic) {
  std::vector<double> gp{0.2, 0.3, 9.0};
  std::vector<int> nodes{0, 1};
  EXPECT_NEAR(MaskLossValue(gp, nodes, 1.0), -0.5, 1e-15);
  EXPECT_NEAR(MaskLossValue(gp, nodes, 0.1), -0.05, 1e-15);
  EXPECT_THROW(MaskLossValue(gp, {}, 1.0), ArgumentError);
}

TEST(MaskLoss, OnTapeMatchesValue) {
  Rng rng(6);
  auto g = RandomGraph(rng, 12, 0.3);
  auto e = RandomMatrix(rng, 12, 4);
  auto table = SemanticRelatedness(g, e, 2, kNoCap, 3);
  std::vector<int> nodes{1, 4, 5, 9};
  ag::Tape tape;
  auto gamma = RelatednessOnTape(tape.Leaf(e), table.neighborhoods, nodes);
  std::vector<double> noise;
  for (size_t i = 0; i < nodes.size(); ++i) {
    EXPECT_NEAR(gamma.value()(static_cast<Eigen::Index>(i), 0), table.gamma[nodes[i]], 1e-12);
    noise.push_back(table.gumbel_noise[nodes[i]]);
  }
  auto loss = MaskLoss(gamma, noise, 0.1);
  EXPECT_NEAR(loss.scalar(), MaskLossValue(table.gamma_perturbed, nodes, 0.1), 1e-12);
}

TEST(MaskLoss, GradientMatchesFiniteDifferences) {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    auto g = RandomGraph(rng, 12, 0.3);
    auto e = RandomMatrix(rng, 12, 4);
    const auto nbhd = SampleNeighborhoods(g, 2, kNoCap, 1);
    std::vector<int> nodes{0, 2, 3, 7, 11};
    const std::vector<double> noise(nodes.size(), 0.4);
    auto f = [&](const Eigen::MatrixXd& x) {
      ag::Tape t;
      return MaskLoss(RelatednessOnTape(t.Leaf(x), nbhd, nodes), noise, 0.7).scalar();
    };
    ag::Tape tape;
    auto leaf = tape.Leaf(e);
    tape.Backward(MaskLoss(RelatednessOnTape(leaf, nbhd, nodes), noise, 0.7));
    EXPECT_LT(oracle::RelativeError(tape.Grad(leaf), oracle::NumericGradient(f, e)), 1e-4);
  }
}

// Norm of d(-r * gamma(v)) / d e_v holding the neighbors fixed.
double SingleNodeGradNorm(const Eigen::MatrixXd& e, const std::vector<std::vector<int>>& nbhd,
                          int v, double r) {
  ag::Tape tape;
  auto leaf = tape.Leaf(e);
  const std::vector<int> nodes{v};
  const std::vector<double> noise{0.0};
  tape.Backward(MaskLoss(RelatednessOnTape(leaf, nbhd, nodes), noise, r));
  return tape.Grad(leaf).row(v).norm();
}

double ClosedFormGradNorm(const Eigen::MatrixXd& e, const std::vector<int>& nbrs, int v,
                          double r) {
  double sum = 0.0;
  for (int w : nbrs) sum += 1.0 - e.row(v).normalized().dot(e.row(w).normalized());
  return r / (nbrs.size() * e.row(v).norm()) * sum;
}

TEST(MaskLoss, GradientNormLaw) {
  // v = 0; neighbors all orthogonal to v and co-directional with each other,
  // where the per-neighbor gradients add up exactly to the closed form.
  Eigen::MatrixXd ortho(4, 3);
  ortho << 2, 0, 0,  0, 1, 0,  0, 3, 0,  0, 0.5, 0;
  std::vector<std::vector<int>> nbhd{{1, 2, 3}, {}, {}, {}};
  const double got = SingleNodeGradNorm(ortho, nbhd, 0, 0.8);
  const double want = ClosedFormGradNorm(ortho, nbhd[0], 0, 0.8);
  EXPECT_NEAR(got / want, 1.0, 1e-4);

  // Parallel neighbors: both the computed norm and the closed form vanish.
  Eigen::MatrixXd par(4, 3);
  par << 2, 0, 0,  1, 0, 0,  3, 0, 0,  0.5, 0, 0;
  const double got_par = SingleNodeGradNorm(par, nbhd, 0, 0.8);
  EXPECT_NEAR(got_par, 0.0, 1e-12);
  EXPECT_NEAR(ClosedFormGradNorm(par, nbhd[0], 0, 0.8), 0.0, 1e-12);
  EXPECT_GT(got, got_par);
}

TEST(WriteRelatedness, Format) {
  RelatednessTable t;
  t.gamma = {0.5, -0.25};
  t.gamma_perturbed = {1.5, 0.75};
  std::vector<std::string> ids{"a", "b"};
  std::ostringstream out;
  WriteRelatedness(out, t, ids);
  EXPECT_EQ(out.str(), "a\t0.5\t1.5\nb\t-0.25\t0.75\n");
}

}  // namespace
}  // namespace maerec
