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

#include "maerec/sequence_encoder.h"

#include <algorithm>

#include "maerec/errors.h"

namespace maerec {

int SequenceBatch::ValidCount() const {
  int total = 0;
  for (int l : lengths) total += l;
  return total;
}

SequenceBatch SequenceBatch::FromSequences(
    std::span<const std::vector<int>> sequences, int max_len) {
  SequenceBatch batch;
  batch.items = Eigen::MatrixXi::Constant(static_cast<Eigen::Index>(sequences.size()),
                                          max_len, kPadItem);
  for (size_t b = 0; b < sequences.size(); ++b) {
    const auto& s = sequences[b];
    const int len = std::min<int>(max_len, static_cast<int>(s.size()));
    for (int j = 0; j < len; ++j) {
      batch.items(b, max_len - len + j) = s[s.size() - len + j];
    }
    batch.lengths.push_back(len);
  }
  return batch;
}

TransformerVars TransformerOnTape(ag::Tape& tape, const TransformerParams& params) {
  TransformerVars vars;
  vars.positional = tape.Leaf(params.positional);
  vars.heads = params.heads;
  for (const auto& b : params.blocks) {
    vars.blocks.push_back({tape.Leaf(b.query), tape.Leaf(b.key), tape.Leaf(b.value),
                           tape.Leaf(b.ffn_w1), tape.Leaf(b.ffn_w2), tape.Leaf(b.ffn_b1),
                           tape.Leaf(b.ffn_b2), tape.Leaf(b.norm_gain),
                           tape.Leaf(b.norm_bias)});
  }
  return vars;
}

PackedSequences EmbedSequence(const SequenceBatch& batch, const ag::Var& item_table,
                              const ag::Var& positional) {
  if (batch.max_len() > positional.rows()) {
    throw ArgumentError("sequence window exceeds positional table");
  }
  std::vector<int> items;
  std::vector<int> positions;
  PackedSequences packed;
  packed.offsets.push_back(0);
  for (int b = 0; b < batch.batch_size(); ++b) {
    const int start = batch.max_len() - batch.lengths[b];
    for (int t = start; t < batch.max_len(); ++t) {
      const int item = batch.items(b, t);
      if (item < 0 || item >= item_table.rows()) {
        throw std::out_of_range("item index " + std::to_string(item) + " out of range");
      }
      items.push_back(item);
      positions.push_back(t - start);
    }
    packed.offsets.push_back(static_cast<int>(items.size()));
  }
  packed.rows = ag::Add(ag::GatherRows(item_table, items),
                        ag::GatherRows(positional, positions));
  return packed;
}

ag::Var EncodeSequence(const PackedSequences& input, const TransformerVars& params,
                       const EncoderOptions& options, Rng* rng,
                       std::vector<Eigen::MatrixXd>* attention_out) {
  if (params.blocks.empty()) throw ArgumentError("transformer needs a block");
  if (options.dropout > 0.0 && rng == nullptr) {
    throw ArgumentError("dropout requires a random generator");
  }
  const double rate = options.dropout;
  ag::Var hidden = input.rows;
  std::vector<ag::Var> outputs;
  for (const auto& block : params.blocks) {
    ag::Var x = rate > 0.0 ? ag::Dropout(hidden, rate, *rng) : hidden;
    if (options.layer_norm) x = ag::LayerNormRows(x, block.norm_gain, block.norm_bias);
    auto attended = ag::CausalSegmentAttention(
        ag::MatMul(x, block.query), ag::MatMul(x, block.key), ag::MatMul(x, block.value),
        input.offsets, params.heads, rate, rng, attention_out);
    if (options.residual) attended = ag::Add(attended, x);
    auto inner = ag::Relu(ag::AddRowVector(ag::MatMul(attended, block.ffn_w1), block.ffn_b1));
    auto out = ag::AddRowVector(ag::MatMul(inner, block.ffn_w2), block.ffn_b2);
    if (options.residual) out = ag::Add(out, attended);
    outputs.push_back(out);
    hidden = out;
  }
  return outputs.size() == 1 ? outputs[0] : ag::AddN(outputs);
}

std::vector<Eigen::MatrixXd> UnpackSequences(const Eigen::MatrixXd& packed,
                                             const std::vector<int>& offsets,
                                             const SequenceBatch& batch) {
  std::vector<Eigen::MatrixXd> out;
  for (int b = 0; b < batch.batch_size(); ++b) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(batch.max_len(), packed.cols());
    const int len = offsets[b + 1] - offsets[b];
    m.bottomRows(len) = packed.middleRows(offsets[b], len);
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<int> LastPositions(const std::vector<int>& offsets) {
  std::vector<int> last;
  for (size_t b = 0; b + 1 < offsets.size(); ++b) last.push_back(offsets[b + 1] - 1);
  return last;
}

}  // namespace maerec
