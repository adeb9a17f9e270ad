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

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "maerec/autograd.h"
#include "maerec/random.h"

namespace maerec {

inline constexpr int kPadItem = -1;

// Left-padded item matrix. Row b holds its sequence in the last lengths[b]
// columns; other entries are kPadItem.
struct SequenceBatch {
  Eigen::MatrixXi items;
  std::vector<int> lengths;

  int batch_size() const { return static_cast<int>(items.rows()); }
  int max_len() const { return static_cast<int>(items.cols()); }
  bool IsValid(int b, int t) const { return t >= max_len() - lengths[b]; }
  int ValidCount() const;

  // Keeps the most recent max_len items of each sequence.
  static SequenceBatch FromSequences(std::span<const std::vector<int>> sequences,
                                     int max_len);
};

struct TransformerBlockParams {
  Eigen::MatrixXd query, key, value;  // d x d; head h owns columns h*d/H..
  Eigen::MatrixXd ffn_w1, ffn_w2;     // d x d
  Eigen::MatrixXd ffn_b1, ffn_b2;     // 1 x d
  Eigen::MatrixXd norm_gain, norm_bias;  // 1 x d
};

struct TransformerParams {
  Eigen::MatrixXd positional;  // max_len x d
  std::vector<TransformerBlockParams> blocks;
  int heads = 1;
};

struct EncoderOptions {
  bool layer_norm = true;
  bool residual = true;
  double dropout = 0.0;  // on block inputs and attention weights
};

struct TransformerBlockVars {
  ag::Var query, key, value, ffn_w1, ffn_w2, ffn_b1, ffn_b2, norm_gain, norm_bias;
};

struct TransformerVars {
  ag::Var positional;
  std::vector<TransformerBlockVars> blocks;
  int heads = 1;
};

TransformerVars TransformerOnTape(ag::Tape& tape, const TransformerParams& params);

// Valid positions of the batch packed row-wise, sequence-major. Sequence b
// occupies rows [offsets[b], offsets[b+1]).
struct PackedSequences {
  ag::Var rows;
  std::vector<int> offsets;
};

// Row for the j-th valid item (0-based, oldest first) of each sequence is
// item_table[item] + positional[j].
PackedSequences EmbedSequence(const SequenceBatch& batch, const ag::Var& item_table,
                              const ag::Var& positional);

// Stacked causal self-attention blocks; returns the sum of block outputs.
// `rng` drives dropout and may be null when options.dropout == 0. Attention
// weights of every block are appended to `attention_out` when non-null.
ag::Var EncodeSequence(const PackedSequences& input, const TransformerVars& params,
                       const EncoderOptions& options, Rng* rng,
                       std::vector<Eigen::MatrixXd>* attention_out = nullptr);

// Expands packed rows to one max_len x d matrix per sequence, zero at padding.
std::vector<Eigen::MatrixXd> UnpackSequences(const Eigen::MatrixXd& packed,
                                             const std::vector<int>& offsets,
                                             const SequenceBatch& batch);

// Packed row index of each sequence's most recent position.
std::vector<int> LastPositions(const std::vector<int>& offsets);

}  // namespace maerec
