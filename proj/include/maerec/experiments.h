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

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "maerec/corpus.h"
#include "maerec/evaluation.h"
#include "maerec/parameters.h"
#include "maerec/trainer.h"

namespace maerec {

// Creates root/<name>-<YYYYmmdd-HHMMSS>, adding a numeric suffix rather than
// reusing an existing directory.
std::filesystem::path CreateRunDirectory(const std::filesystem::path& root,
                                         const std::string& name);

// Owns a run directory for the lifetime of the object: holds `.lock`
// (exclusive) and keeps `.incomplete` until MarkComplete().
class RunGuard {
 public:
  explicit RunGuard(std::filesystem::path dir);
  ~RunGuard();
  RunGuard(const RunGuard&) = delete;
  RunGuard& operator=(const RunGuard&) = delete;

  void MarkComplete();
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

struct RunResult {
  std::string name;
  TrainConfig config;
  TrainingLog log;
  MetricsReport report;
};

// Trains on split.train and evaluates on the test targets. When `dir` is set,
// writes config.json, train_log.csv, model.ckpt and metrics.csv into it.
RunResult TrainAndEvaluate(const SplitCorpus& split, const TrainConfig& config,
                           const Protocol& protocol, const std::string& name,
                           const std::optional<std::filesystem::path>& dir = {});

// full, -L2M, -PA, -TA, each under its own subdirectory of `root` if given.
std::vector<RunResult> RunAblation(const SplitCorpus& split, const TrainConfig& config,
                                   const Protocol& protocol,
                                   const std::optional<std::filesystem::path>& root = {});
void WriteAblationCsv(std::ostream& out, const std::vector<RunResult>& runs);

inline constexpr double kNoiseLevels[] = {0.0, 0.05, 0.15, 0.25, 0.35};

struct NoiseRow {
  double level = 0.0;
  bool ssl = true;
  double hr20 = 0.0;
  double ndcg20 = 0.0;
  double degradation = 0.0;  // 1 - HR@20 / HR@20 at level 0, same SSL setting
};

// Trains with and without SSL at every noise level; noise touches the
// training sequences only. `levels` must contain 0.
std::vector<NoiseRow> RunPerturbation(const SplitCorpus& split, const TrainConfig& config,
                                      std::span<const double> levels,
                                      const Protocol& protocol, uint64_t noise_seed,
                                      const std::optional<std::filesystem::path>& root = {});
void WritePerturbationCsv(std::ostream& out, const std::vector<NoiseRow>& rows);

struct SweepRow {
  std::string parameter;
  double value = 0.0;
  double hr10 = 0.0;
  double ndcg10 = 0.0;
  double hr20 = 0.0;
  double ndcg20 = 0.0;
  double hr10_decrease = 0.0;    // 1 - HR@10 / best HR@10 along this curve
  double ndcg10_decrease = 0.0;
};

// Default one-at-a-time grid over drop_ratio, path_scale and anchors.
std::map<std::string, std::vector<double>> DefaultSweepGrid();

// Varies one parameter at a time around `config`.
std::vector<SweepRow> RunSweep(const SplitCorpus& split, const TrainConfig& config,
                               const std::map<std::string, std::vector<double>>& grid,
                               const Protocol& protocol,
                               const std::optional<std::filesystem::path>& root = {});
void WriteSweepCsv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace maerec
