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

// Independent reference implementations used by the tests. Each one is the
// most direct (and slowest) way to compute its quantity: dense matrices,
// explicit loops, no shared code with the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Pair = std::pair<int, int>;

// Every (s_t, s_t') with 0 < |t - t'| <= h and distinct items.
inline std::set<Pair> BruteForceEdges(const std::vector<std::vector<int>>& seqs, int h) {
  std::set<Pair> edges;
  for (const auto& s : seqs) {
    for (size_t t = 0; t < s.size(); ++t) {
      for (size_t u = 0; u < s.size(); ++u) {
        const long gap = static_cast<long>(t) - static_cast<long>(u);
        if (gap == 0 || std::abs(gap) > h || s[t] == s[u]) continue;
        edges.insert({std::min(s[t], s[u]), std::max(s[t], s[u])});
      }
    }
  }
  return edges;
}

inline Eigen::MatrixXd DenseAdjacency(int n, const std::set<Pair>& edges) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [u, v] : edges) a(u, v) = a(v, u) = 1.0;
  return a;
}

// Nodes whose shortest-path distance from v lies in [1, k], by repeated
// multiplication of a reachability vector with the dense adjacency.
inline std::vector<int> ReachableWithin(const Eigen::MatrixXd& adj, int v, int k) {
  const int n = static_cast<int>(adj.rows());
  Eigen::VectorXd reach = Eigen::VectorXd::Zero(n);
  reach(v) = 1.0;
  Eigen::VectorXd frontier = reach;
  for (int step = 0; step < k; ++step) {
    frontier = (adj * frontier).cwiseMin(1.0);
    reach = (reach + frontier).cwiseMin(1.0);
  }
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    if (i != v && reach(i) > 0.0) out.push_back(i);
  }
  return out;
}

// Shortest-path hop distances from v (-1 if unreachable).
inline std::vector<int> HopDistances(const Eigen::MatrixXd& adj, int v) {
  const int n = static_cast<int>(adj.rows());
  std::vector<int> dist(n, -1);
  std::queue<int> q;
  dist[v] = 0;
  q.push(v);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int w = 0; w < n; ++w) {
      if (adj(u, w) != 0.0 && dist[w] < 0) {
        dist[w] = dist[u] + 1;
        q.push(w);
      }
    }
  }
  return dist;
}

// Mean cosine over each node's neighborhood, 0 for empty ones.
inline std::vector<double> Relatedness(const Eigen::MatrixXd& emb,
                                       const std::vector<std::vector<int>>& nbhd) {
  std::vector<double> out(nbhd.size(), 0.0);
  for (size_t v = 0; v < nbhd.size(); ++v) {
    if (nbhd[v].empty()) continue;
    double total = 0.0;
    for (int w : nbhd[v]) {
      double dot = 0.0, nv = 0.0, nw = 0.0;
      for (int c = 0; c < emb.cols(); ++c) {
        dot += emb(v, c) * emb(w, c);
        nv += emb(v, c) * emb(v, c);
        nw += emb(w, c) * emb(w, c);
      }
      total += dot / (std::sqrt(nv) * std::sqrt(nw));
    }
    out[v] = total / static_cast<double>(nbhd[v].size());
  }
  return out;
}

// Layer outputs of e^{l+1} = (I + P) e^l with P = A or D^-1/2 A D^-1/2.
inline std::vector<Eigen::MatrixXd> DenseEncode(const Eigen::MatrixXd& adj,
                                                const Eigen::MatrixXd& e0, int layers,
                                                bool normalize) {
  const int n = static_cast<int>(adj.rows());
  Eigen::MatrixXd p = adj;
  if (normalize) {
    Eigen::VectorXd deg = adj.rowwise().sum();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (adj(i, j) != 0.0) p(i, j) = adj(i, j) / std::sqrt(deg(i) * deg(j));
      }
    }
  }
  const Eigen::MatrixXd step = Eigen::MatrixXd::Identity(n, n) + p;
  std::vector<Eigen::MatrixXd> out;
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
  for (int l = 0; l < layers; ++l) {
    power = step * power;
    out.push_back(power * e0);
  }
  return out;
}

inline double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double ClippedLog(double p) {
  return std::log(std::clamp(p, 1e-8, 1.0 - 1e-8));
}

// Two-layer MLP score relu(x W1 + b1) W2 + b2, computed with explicit loops.
inline double MlpScore(const Eigen::VectorXd& x, const Eigen::MatrixXd& w1,
                       const Eigen::MatrixXd& b1, const Eigen::MatrixXd& w2,
                       const Eigen::MatrixXd& b2) {
  double out = b2(0, 0);
  for (int h = 0; h < w1.cols(); ++h) {
    double a = b1(0, h);
    for (int i = 0; i < w1.rows(); ++i) a += x(i) * w1(i, h);
    out += std::max(0.0, a) * w2(h, 0);
  }
  return out;
}

// Concatenation of e_v^i * e_w^j for i, j in 1..L.
inline Eigen::VectorXd EdgeFeature(const std::vector<Eigen::MatrixXd>& layers, int v,
                                   int w) {
  const int L = static_cast<int>(layers.size());
  const int d = static_cast<int>(layers[0].cols());
  Eigen::VectorXd x(L * L * d);
  int at = 0;
  for (int i = 0; i < L; ++i) {
    for (int j = 0; j < L; ++j) {
      for (int c = 0; c < d; ++c) x(at++) = layers[i](v, c) * layers[j](w, c);
    }
  }
  return x;
}

// HR@K and NDCG@K with a per-user loop.
inline std::pair<double, double> HrNdcgLoop(const std::vector<int>& ranks, int k) {
  double hr = 0.0, ndcg = 0.0;
  for (int r : ranks) {
    if (r <= k) {
      hr += 1.0;
      ndcg += std::log(2.0) / std::log(r + 1.0);
    }
  }
  return {hr / ranks.size(), ndcg / ranks.size()};
}

// Rank by sorting (score desc, index asc) and finding the target.
inline int SortRank(const std::vector<double>& scores, std::vector<int> candidates,
                    int target) {
  std::sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return static_cast<int>(std::find(candidates.begin(), candidates.end(), target) -
                          candidates.begin()) + 1;
}

// Central differences of f at x.
inline Eigen::MatrixXd NumericGradient(const std::function<double(const Eigen::MatrixXd&)>& f,
                                       Eigen::MatrixXd x, double step = 1e-5) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x(i);
    x(i) = keep + step;
    const double up = f(x);
    x(i) = keep - step;
    const double down = f(x);
    x(i) = keep;
    g(i) = (up - down) / (2.0 * step);
  }
  return g;
}

// max |a - b| / max(1e-8, max |b|): relative error at the scale of the gradient.
inline double RelativeError(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(1e-8, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

struct BlockWeights {
  Eigen::MatrixXd q, k, v, w1, w2, b1, b2, gain, bias;
};

// Dense single-sequence transformer: rows of x are positions oldest first.
// Matches the library's block layout (pre-norm, causal softmax attention,
// two-layer ReLU feed-forward, optional residuals, sum of block outputs).
inline Eigen::MatrixXd ReferenceEncoder(const Eigen::MatrixXd& input,
                                        const std::vector<BlockWeights>& blocks,
                                        int heads, bool layer_norm, bool residual) {
  const int n = static_cast<int>(input.rows());
  const int d = static_cast<int>(input.cols());
  const int dh = d / heads;
  Eigen::MatrixXd hidden = input;
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(n, d);
  for (const auto& b : blocks) {
    Eigen::MatrixXd x = hidden;
    if (layer_norm) {
      for (int i = 0; i < n; ++i) {
        double mean = 0.0;
        for (int c = 0; c < d; ++c) mean += x(i, c);
        mean /= d;
        double var = 0.0;
        for (int c = 0; c < d; ++c) var += (x(i, c) - mean) * (x(i, c) - mean);
        var /= d;
        for (int c = 0; c < d; ++c) {
          x(i, c) = (x(i, c) - mean) / std::sqrt(var + 1e-8) * b.gain(0, c) + b.bias(0, c);
        }
      }
    }
    const Eigen::MatrixXd q = x * b.q, k = x * b.k, v = x * b.v;
    Eigen::MatrixXd att = Eigen::MatrixXd::Zero(n, d);
    for (int h = 0; h < heads; ++h) {
      for (int i = 0; i < n; ++i) {
        std::vector<double> w(i + 1);
        double mx = -1e300;
        for (int j = 0; j <= i; ++j) {
          double s = 0.0;
          for (int c = h * dh; c < (h + 1) * dh; ++c) s += q(i, c) * k(j, c);
          w[j] = s / std::sqrt(static_cast<double>(dh));
          mx = std::max(mx, w[j]);
        }
        double z = 0.0;
        for (auto& e : w) z += (e = std::exp(e - mx));
        for (int j = 0; j <= i; ++j) {
          for (int c = h * dh; c < (h + 1) * dh; ++c) att(i, c) += w[j] / z * v(j, c);
        }
      }
    }
    if (residual) att += x;
    Eigen::MatrixXd inner = att * b.w1;
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < inner.cols(); ++c) inner(i, c) = std::max(0.0, inner(i, c) + b.b1(0, c));
    }
    Eigen::MatrixXd out = inner * b.w2;
    for (int i = 0; i < n; ++i) out.row(i) += b.b2.row(0);
    if (residual) out += att;
    total += out;
    hidden = out;
  }
  return total;
}

}  // namespace oracle
