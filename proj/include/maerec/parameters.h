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
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "maerec/graph_autoencoder.h"
#include "maerec/sequence_encoder.h"

namespace maerec {

enum class MaskLossScope { kPool, kAnchors, kAll };

// X(type, name, default). Every field is addressable from JSON config files
// and `--set name=value` overrides.
#define MAEREC_TRAIN_CONFIG_FIELDS(X)        \
  X(int, embedding_dim, 64)                  \
  X(int, gnn_layers, 2)                      \
  X(int, transformer_blocks, 2)              \
  X(int, heads, 4)                           \
  X(int, max_len, 50)                        \
  X(int, anchors, 200)                       \
  X(int, path_scale, 5)                      \
  X(double, drop_ratio, 0.5)                 \
  X(int, graph_window, 2)                    \
  X(int, relatedness_hops, 0)                \
  X(int, neighborhood_cap, 32)               \
  X(double, epsilon, 0.1)                    \
  X(int, delta, 5)                           \
  X(double, weight_decay, 1e-5)              \
  X(double, learning_rate, 1e-3)             \
  X(double, adam_beta1, 0.9)                 \
  X(double, adam_beta2, 0.999)               \
  X(double, adam_eps, 1e-8)                  \
  X(int, batch_size, 256)                    \
  X(int, epochs, 50)                         \
  X(int, resample_interval, 10)              \
  X(int, n_neg_rec, 1)                       \
  X(int, n_neg_con, 64)                      \
  X(double, dropout, 0.2)                    \
  X(double, init_scale, 0.1)                 \
  X(bool, normalize_graph, true)             \
  X(bool, layer_norm, true)                  \
  X(bool, residual, true)                    \
  X(std::string, mask_loss_scope, "pool")    \
  X(int, eval_candidates, 100)               \
  X(bool, validate_each_epoch, true)         \
  X(uint64_t, seed, 42)                      \
  X(bool, disable_learned_mask, false)       \
  X(bool, disable_path_masking, false)       \
  X(bool, disable_task_adaptive, false)      \
  X(bool, disable_ssl, false)

struct TrainConfig {
#define MAEREC_DECLARE_FIELD(type, name, value) type name = value;
  MAEREC_TRAIN_CONFIG_FIELDS(MAEREC_DECLARE_FIELD)
#undef MAEREC_DECLARE_FIELD

  // Throws ConfigError on out-of-range values.
  void Validate() const;
  // Expand/relatedness depth after ablations.
  int EffectivePathScale() const { return disable_path_masking ? 1 : path_scale; }
  int EffectiveRelatednessHops() const {
    return relatedness_hops > 0 ? relatedness_hops : EffectivePathScale();
  }
  bool UsesMaskLoss() const {
    return !disable_ssl && !disable_task_adaptive && !disable_learned_mask;
  }
  MaskLossScope Scope() const;
  EncoderOptions Encoder(bool training) const;

  nlohmann::json ToJson() const;
  // Unknown keys are rejected.
  static TrainConfig FromJson(const nlohmann::json& json);
  // `value` is parsed according to the field's type.
  void Set(const std::string& key, const std::string& value);
};

TrainConfig LoadTrainConfig(const std::filesystem::path& path);

// A learnable array and its name in checkpoints.
struct NamedArray {
  std::string name;
  Eigen::MatrixXd* data;
};

// All learnable arrays.
struct ParameterStore {
  Eigen::MatrixXd item_embeddings;  // |V| x d
  TransformerParams transformer;
  DecoderParams decoder;

  std::vector<NamedArray> Arrays();
  std::vector<const Eigen::MatrixXd*> ConstArrays() const;
  bool AllFinite() const;
  double SquaredNorm() const;
};

// Random initialization: item and positional tables ~ N(0, init_scale^2),
// projection and MLP weights Glorot-uniform, biases 0, layer-norm gains 1.
ParameterStore InitializeParameters(const TrainConfig& config, int num_items);

class AdamOptimizer {
 public:
  AdamOptimizer(double learning_rate, double beta1, double beta2, double eps);

  // Applies one update; `grads` align with `params`.
  void Step(std::vector<NamedArray>& params, const std::vector<Eigen::MatrixXd>& grads);
  int64_t steps() const { return steps_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t steps_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

// Portable checkpoint: magic "MAERECP1", u32 header length, JSON header
// (config, seed, epoch, num_items), u32 array count, then per array
// u32 name length, name, u64 rows, u64 cols and a row-major float32 payload.
// All integers little-endian.
struct Checkpoint {
  TrainConfig config;
  int epoch = 0;
  int num_items = 0;
  ParameterStore params;
};

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace maerec
