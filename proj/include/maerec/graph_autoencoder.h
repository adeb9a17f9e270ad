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
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "maerec/autograd.h"
#include "maerec/transition_graph.h"

namespace maerec {

// Message-passing operator of a (masked) graph: the plain adjacency matrix,
// or D^{-1/2} A D^{-1/2} with degrees taken in the view.
std::shared_ptr<const ag::SparseMatrix> PropagationMatrix(
    const MaskedGraphView& view, bool normalize);

// Layer outputs e^1..e^L and their sum.
struct LayerEmbeddings {
  std::vector<Eigen::MatrixXd> per_layer;
  Eigen::MatrixXd final_embedding;
};

struct LayerVars {
  std::vector<ag::Var> per_layer;
  ag::Var final_embedding;
};

// e^{l+1} = e^l + P e^l for l = 0..L-1 and final = sum of e^1..e^L, where P
// is the propagation matrix.
LayerVars EncodeGraph(std::shared_ptr<const ag::SparseMatrix> propagation,
                      const ag::Var& base, int layers);

LayerEmbeddings EncodeGraph(const MaskedGraphView& view,
                            const Eigen::MatrixXd& base, int layers,
                            bool normalize);

// Concatenation over layer pairs (1,1),(1,2),...,(L,L) of e_v^i * e_w^j.
Eigen::VectorXd EdgeEmbedding(const LayerEmbeddings& layers, int v, int w);

// Row r is the edge embedding of (left[r], right[r]).
ag::Var EdgeEmbeddings(const LayerVars& layers, std::span<const int> left,
                       std::span<const int> right);

// Two-layer MLP scoring an edge embedding: relu(x W1 + b1) W2 + b2.
struct DecoderParams {
  Eigen::MatrixXd w1;  // (L^2 d) x hidden
  Eigen::MatrixXd b1;  // 1 x hidden
  Eigen::MatrixXd w2;  // hidden x 1
  Eigen::MatrixXd b2;  // 1 x 1
};

struct DecoderVars {
  ag::Var w1, b1, w2, b2;
};

DecoderVars DecoderOnTape(ag::Tape& tape, const DecoderParams& params);
ag::Var DecoderLogits(const ag::Var& edge_embeddings, const DecoderVars& decoder);

// Scored pairs for the reconstruction objective. Group g spans rows
// [offsets[g], offsets[g+1]); its first row is the masked edge and the rest
// are negatives sharing the same left endpoint.
struct ReconstructionBatch {
  std::vector<int> left;
  std::vector<int> right;
  std::vector<int> offsets;

  int num_groups() const { return static_cast<int>(offsets.size()) - 1; }
};

// For each masked edge (v, w) draws `num_negatives` distinct items uniformly
// from V \ (N(v) u {v}), neighbors taken in the unmasked graph. When the pool
// is no larger than num_negatives the whole pool is used.
ReconstructionBatch SampleReconstructionBatch(const TransitionGraph& graph,
                                              std::span<const Edge> masked_edges,
                                              int num_negatives, uint64_t seed);

// Mean over masked edges of -log softmax over {positive} u negatives. Returns
// a constant 0 (with a warning) when there is nothing to reconstruct.
ag::Var ReconstructionLoss(const LayerVars& layers, const DecoderVars& decoder,
                           const ReconstructionBatch& batch);

}  // namespace maerec
