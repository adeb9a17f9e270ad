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

#include "maerec/graph_autoencoder.h"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <glog/logging.h>

#include "maerec/errors.h"
#include "maerec/random.h"

namespace maerec {

std::shared_ptr<const ag::SparseMatrix> PropagationMatrix(
    const MaskedGraphView& view, bool normalize) {
  const int n = view.num_nodes();
  const auto edges = view.Edges();
  std::vector<double> degree(n, 0.0);
  for (const auto& [u, v] : edges) {
    degree[u] += 1.0;
    degree[v] += 1.0;
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    const double w = normalize ? 1.0 / std::sqrt(degree[u] * degree[v]) : 1.0;
    triplets.emplace_back(u, v, w);
    triplets.emplace_back(v, u, w);
  }
  auto m = std::make_shared<ag::SparseMatrix>(n, n);
  m->setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

LayerVars EncodeGraph(std::shared_ptr<const ag::SparseMatrix> propagation,
                      const ag::Var& base, int layers) {
  if (layers < 1) throw ArgumentError("graph encoder needs at least one layer");
  LayerVars out;
  ag::Var current = base;
  for (int l = 0; l < layers; ++l) {
    current = ag::Add(current, ag::SparseMatMul(propagation, current));
    out.per_layer.push_back(current);
  }
  out.final_embedding =
      layers == 1 ? out.per_layer[0] : ag::AddN(out.per_layer);
  return out;
}

LayerEmbeddings EncodeGraph(const MaskedGraphView& view,
                            const Eigen::MatrixXd& base, int layers,
                            bool normalize) {
  if (base.rows() != view.num_nodes()) {
    throw ArgumentError("embedding rows must equal node count");
  }
  ag::Tape tape;
  auto vars = EncodeGraph(PropagationMatrix(view, normalize),
                          tape.Constant(base), layers);
  LayerEmbeddings out;
  for (const auto& v : vars.per_layer) out.per_layer.push_back(v.value());
  out.final_embedding = vars.final_embedding.value();
  return out;
}

Eigen::VectorXd EdgeEmbedding(const LayerEmbeddings& layers, int v, int w) {
  const auto L = static_cast<Eigen::Index>(layers.per_layer.size());
  const auto d = layers.per_layer.front().cols();
  Eigen::VectorXd out(L * L * d);
  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < L; ++i) {
    for (Eigen::Index j = 0; j < L; ++j) {
      out.segment(at, d) =
          layers.per_layer[i].row(v).cwiseProduct(layers.per_layer[j].row(w)).transpose();
      at += d;
    }
  }
  return out;
}

ag::Var EdgeEmbeddings(const LayerVars& layers, std::span<const int> left,
                       std::span<const int> right) {
  const size_t L = layers.per_layer.size();
  std::vector<ag::Var> lhs;
  std::vector<ag::Var> rhs;
  for (const auto& layer : layers.per_layer) {
    lhs.push_back(ag::GatherRows(layer, left));
    rhs.push_back(ag::GatherRows(layer, right));
  }
  std::vector<ag::Var> pieces;
  pieces.reserve(L * L);
  for (size_t i = 0; i < L; ++i) {
    for (size_t j = 0; j < L; ++j) pieces.push_back(ag::CwiseMul(lhs[i], rhs[j]));
  }
  return pieces.size() == 1 ? pieces[0] : ag::ConcatCols(pieces);
}

DecoderVars DecoderOnTape(ag::Tape& tape, const DecoderParams& params) {
  return {tape.Leaf(params.w1), tape.Leaf(params.b1), tape.Leaf(params.w2),
          tape.Leaf(params.b2)};
}

ag::Var DecoderLogits(const ag::Var& edge_embeddings, const DecoderVars& decoder) {
  auto hidden = ag::Relu(
      ag::AddRowVector(ag::MatMul(edge_embeddings, decoder.w1), decoder.b1));
  return ag::AddRowVector(ag::MatMul(hidden, decoder.w2), decoder.b2);
}

ReconstructionBatch SampleReconstructionBatch(const TransitionGraph& graph,
                                              std::span<const Edge> masked_edges,
                                              int num_negatives, uint64_t seed) {
  if (num_negatives < 1) throw ArgumentError("need at least one negative");
  const int n = graph.num_nodes();
  ReconstructionBatch batch;
  batch.offsets.push_back(0);
  for (size_t e = 0; e < masked_edges.size(); ++e) {
    const auto [v, w] = masked_edges[e];
    Rng rng(DeriveSeed(seed, 0x7265636fULL, e));
    batch.left.push_back(v);
    batch.right.push_back(w);
    const auto nbrs = graph.Neighbors(v);
    const int pool_size = n - static_cast<int>(nbrs.size()) - 1;
    std::vector<int> chosen;
    if (pool_size <= 2 * num_negatives) {
      std::vector<int> pool;
      pool.reserve(pool_size);
      for (int x = 0; x < n; ++x) {
        if (x != v && !std::binary_search(nbrs.begin(), nbrs.end(), x)) pool.push_back(x);
      }
      const int take = std::min<int>(num_negatives, static_cast<int>(pool.size()));
      if (take < static_cast<int>(pool.size())) {
        for (int i = 0; i < take; ++i) {
          std::swap(pool[i], pool[i + UniformIndex(rng, static_cast<int64_t>(pool.size()) - i)]);
        }
      }
      chosen.assign(pool.begin(), pool.begin() + take);
    } else {
      std::unordered_set<int> seen;
      while (static_cast<int>(chosen.size()) < num_negatives) {
        const int x = static_cast<int>(UniformIndex(rng, n));
        if (x == v || std::binary_search(nbrs.begin(), nbrs.end(), x)) continue;
        if (seen.insert(x).second) chosen.push_back(x);
      }
    }
    for (int x : chosen) {
      batch.left.push_back(v);
      batch.right.push_back(x);
    }
    batch.offsets.push_back(static_cast<int>(batch.left.size()));
  }
  return batch;
}

ag::Var ReconstructionLoss(const LayerVars& layers, const DecoderVars& decoder,
                           const ReconstructionBatch& batch) {
  auto* tape = layers.final_embedding.tape();
  if (batch.num_groups() <= 0) {
    LOG_EVERY_N(WARNING, 100) << "no masked edges to reconstruct; reconstruction loss is 0";
    return tape->Constant(Eigen::MatrixXd::Zero(1, 1));
  }
  auto logits = DecoderLogits(EdgeEmbeddings(layers, batch.left, batch.right), decoder);
  return ag::GroupedSoftmaxNll(logits, batch.offsets);
}

}  // namespace maerec
