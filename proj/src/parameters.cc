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

#include "maerec/parameters.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "maerec/errors.h"
#include "maerec/random.h"

namespace maerec {
namespace {

template <typename T>
T ParseValue(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value{};
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError("expected true/false for " + key + ", got '" + text + "'");
  } else if constexpr (std::is_same_v<T, std::string>) {
    return text;
  } else {
    in >> value;
    if (in.fail() || !in.eof()) {
      throw ConfigError("cannot parse '" + text + "' for " + key);
    }
  }
  return value;
}

// Standard normal via Box-Muller; fixed across standard libraries.
double Normal(Rng& rng) {
  const double u1 = UniformOpen(rng);
  const double u2 = UniformOpen(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Eigen::MatrixXd NormalMatrix(Rng& rng, int rows, int cols, double stddev) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = stddev * Normal(rng);
  return m;
}

Eigen::MatrixXd GlorotMatrix(Rng& rng, int rows, int cols) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = limit * (2.0 * UniformOpen(rng) - 1.0);
  return m;
}

template <typename T>
void WritePod(std::ostream& out, T value) {
  // Checkpoints are little-endian; so is every platform this builds on.
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T ReadPod(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ConfigError("truncated checkpoint");
  return value;
}

constexpr char kMagic[8] = {'M', 'A', 'E', 'R', 'E', 'C', 'P', '1'};

}  // namespace

void TrainConfig::Validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(embedding_dim > 0, "embedding_dim > 0");
  require(gnn_layers >= 1, "gnn_layers >= 1");
  require(transformer_blocks >= 1, "transformer_blocks >= 1");
  require(heads >= 1 && embedding_dim % heads == 0, "embedding_dim divisible by heads");
  require(max_len >= 1, "max_len >= 1");
  require(anchors >= 1, "anchors >= 1");
  require(path_scale >= 1, "path_scale >= 1");
  require(drop_ratio > 0.0 && drop_ratio < 1.0, "drop_ratio in (0,1)");
  require(graph_window >= 1, "graph_window >= 1");
  require(relatedness_hops >= 0, "relatedness_hops >= 0");
  require(neighborhood_cap >= 1, "neighborhood_cap >= 1");
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon in (0,1)");
  require(delta > 1, "delta > 1");
  require(weight_decay >= 0.0, "weight_decay >= 0");
  require(learning_rate > 0.0, "learning_rate > 0");
  require(batch_size >= 1, "batch_size >= 1");
  require(epochs >= 0, "epochs >= 0");
  require(resample_interval >= 1, "resample_interval >= 1");
  require(n_neg_rec >= 1, "n_neg_rec >= 1");
  require(n_neg_con >= 1, "n_neg_con >= 1");
  require(dropout >= 0.0 && dropout < 1.0, "dropout in [0,1)");
  require(init_scale > 0.0, "init_scale > 0");
  require(eval_candidates >= 1, "eval_candidates >= 1");
  Scope();
}

MaskLossScope TrainConfig::Scope() const {
  if (mask_loss_scope == "pool") return MaskLossScope::kPool;
  if (mask_loss_scope == "anchors") return MaskLossScope::kAnchors;
  if (mask_loss_scope == "all") return MaskLossScope::kAll;
  throw ConfigError("mask_loss_scope must be pool, anchors or all");
}

EncoderOptions TrainConfig::Encoder(bool training) const {
  return {layer_norm, residual, training ? dropout : 0.0};
}

nlohmann::json TrainConfig::ToJson() const {
  nlohmann::json j;
#define MAEREC_TO_JSON(type, name, value) j[#name] = name;
  MAEREC_TRAIN_CONFIG_FIELDS(MAEREC_TO_JSON)
#undef MAEREC_TO_JSON
  return j;
}

TrainConfig TrainConfig::FromJson(const nlohmann::json& json) {
  if (!json.is_object()) throw ConfigError("config must be a JSON object");
  TrainConfig config;
  for (const auto& [key, value] : json.items()) {
    bool known = false;
#define MAEREC_FROM_JSON(type, name, dflt)                                 \
  if (key == #name) {                                                      \
    try {                                                                  \
      config.name = value.get<type>();                                     \
    } catch (const nlohmann::json::exception&) {                           \
      throw ConfigError("wrong type for config key '" + key + "'");        \
    }                                                                      \
    known = true;                                                          \
  }
    MAEREC_TRAIN_CONFIG_FIELDS(MAEREC_FROM_JSON)
#undef MAEREC_FROM_JSON
    if (!known) throw ConfigError("unknown config key '" + key + "'");
  }
  return config;
}

void TrainConfig::Set(const std::string& key, const std::string& value) {
#define MAEREC_SET(type, name, dflt)            \
  if (key == #name) {                           \
    name = ParseValue<type>(key, value);        \
    return;                                     \
  }
  MAEREC_TRAIN_CONFIG_FIELDS(MAEREC_SET)
#undef MAEREC_SET
  throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig LoadTrainConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return TrainConfig::FromJson(j);
}

std::vector<NamedArray> ParameterStore::Arrays() {
  std::vector<NamedArray> out;
  out.push_back({"item_embeddings", &item_embeddings});
  out.push_back({"positional", &transformer.positional});
  for (size_t b = 0; b < transformer.blocks.size(); ++b) {
    auto& blk = transformer.blocks[b];
    const std::string p = "block" + std::to_string(b) + ".";
    out.push_back({p + "query", &blk.query});
    out.push_back({p + "key", &blk.key});
    out.push_back({p + "value", &blk.value});
    out.push_back({p + "ffn_w1", &blk.ffn_w1});
    out.push_back({p + "ffn_w2", &blk.ffn_w2});
    out.push_back({p + "ffn_b1", &blk.ffn_b1});
    out.push_back({p + "ffn_b2", &blk.ffn_b2});
    out.push_back({p + "norm_gain", &blk.norm_gain});
    out.push_back({p + "norm_bias", &blk.norm_bias});
  }
  out.push_back({"decoder.w1", &decoder.w1});
  out.push_back({"decoder.b1", &decoder.b1});
  out.push_back({"decoder.w2", &decoder.w2});
  out.push_back({"decoder.b2", &decoder.b2});
  return out;
}

std::vector<const Eigen::MatrixXd*> ParameterStore::ConstArrays() const {
  std::vector<const Eigen::MatrixXd*> out;
  for (auto& a : const_cast<ParameterStore*>(this)->Arrays()) out.push_back(a.data);
  return out;
}

bool ParameterStore::AllFinite() const {
  for (const auto* a : ConstArrays()) {
    if (!a->allFinite()) return false;
  }
  return true;
}

double ParameterStore::SquaredNorm() const {
  double total = 0.0;
  for (const auto* a : ConstArrays()) total += a->squaredNorm();
  return total;
}

ParameterStore InitializeParameters(const TrainConfig& config, int num_items) {
  config.Validate();
  Rng rng(DeriveSeed(config.seed, 0x696e6974ULL));
  const int d = config.embedding_dim;
  ParameterStore p;
  p.item_embeddings = NormalMatrix(rng, num_items, d, config.init_scale);
  p.transformer.positional = NormalMatrix(rng, config.max_len, d, config.init_scale);
  p.transformer.heads = config.heads;
  for (int b = 0; b < config.transformer_blocks; ++b) {
    TransformerBlockParams blk;
    blk.query = GlorotMatrix(rng, d, d);
    blk.key = GlorotMatrix(rng, d, d);
    blk.value = GlorotMatrix(rng, d, d);
    blk.ffn_w1 = GlorotMatrix(rng, d, d);
    blk.ffn_w2 = GlorotMatrix(rng, d, d);
    blk.ffn_b1 = Eigen::MatrixXd::Zero(1, d);
    blk.ffn_b2 = Eigen::MatrixXd::Zero(1, d);
    blk.norm_gain = Eigen::MatrixXd::Ones(1, d);
    blk.norm_bias = Eigen::MatrixXd::Zero(1, d);
    p.transformer.blocks.push_back(std::move(blk));
  }
  const int width = config.gnn_layers * config.gnn_layers * d;
  p.decoder.w1 = GlorotMatrix(rng, width, d);
  p.decoder.b1 = Eigen::MatrixXd::Zero(1, d);
  p.decoder.w2 = GlorotMatrix(rng, d, 1);
  p.decoder.b2 = Eigen::MatrixXd::Zero(1, 1);
  return p;
}

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2,
                             double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::Step(std::vector<NamedArray>& params,
                         const std::vector<Eigen::MatrixXd>& grads) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Eigen::MatrixXd::Zero(p.data->rows(), p.data->cols()));
      v_.push_back(Eigen::MatrixXd::Zero(p.data->rows(), p.data->cols()));
    }
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseAbs2();
    params[i].data->array() -=
        lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  nlohmann::json header;
  header["config"] = checkpoint.config.ToJson();
  header["seed"] = checkpoint.config.seed;
  header["epoch"] = checkpoint.epoch;
  header["num_items"] = checkpoint.num_items;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  WritePod<uint32_t>(out, static_cast<uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  auto arrays = const_cast<ParameterStore&>(checkpoint.params).Arrays();
  WritePod<uint32_t>(out, static_cast<uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    WritePod<uint32_t>(out, static_cast<uint32_t>(a.name.size()));
    out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    WritePod<uint64_t>(out, static_cast<uint64_t>(a.data->rows()));
    WritePod<uint64_t>(out, static_cast<uint64_t>(a.data->cols()));
    for (Eigen::Index r = 0; r < a.data->rows(); ++r) {
      for (Eigen::Index c = 0; c < a.data->cols(); ++c) {
        WritePod<float>(out, static_cast<float>((*a.data)(r, c)));
      }
    }
  }
  if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ConfigError(path.string() + " is not a checkpoint");
  }
  std::string text(ReadPod<uint32_t>(in), '\0');
  in.read(text.data(), static_cast<std::streamsize>(text.size()));
  const auto header = nlohmann::json::parse(text);
  Checkpoint ckpt;
  ckpt.config = TrainConfig::FromJson(header.at("config"));
  ckpt.epoch = header.at("epoch").get<int>();
  ckpt.num_items = header.at("num_items").get<int>();
  ckpt.params = InitializeParameters(ckpt.config, ckpt.num_items);
  auto arrays = ckpt.params.Arrays();
  const uint32_t count = ReadPod<uint32_t>(in);
  if (count != arrays.size()) throw ConfigError("checkpoint array count mismatch");
  for (auto& a : arrays) {
    std::string name(ReadPod<uint32_t>(in), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    const auto rows = ReadPod<uint64_t>(in);
    const auto cols = ReadPod<uint64_t>(in);
    if (name != a.name || rows != static_cast<uint64_t>(a.data->rows()) ||
        cols != static_cast<uint64_t>(a.data->cols())) {
      throw ConfigError("checkpoint array '" + name + "' does not match the model");
    }
    for (uint64_t r = 0; r < rows; ++r) {
      for (uint64_t c = 0; c < cols; ++c) (*a.data)(r, c) = ReadPod<float>(in);
    }
  }
  return ckpt;
}

}  // namespace maerec
