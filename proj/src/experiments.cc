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

#include "maerec/experiments.h"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>

#include <fmt/format.h>
#include <glog/logging.h>

#include "maerec/errors.h"

namespace maerec {
namespace fs = std::filesystem;
namespace {

template <typename Fn>
void WriteFile(const fs::path& path, Fn&& fn) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  fn(out);
}

std::string FormatValue(double v) { return fmt::format("{:g}", v); }

void ApplySweepValue(TrainConfig& config, const std::string& parameter, double value) {
  if (parameter == "drop_ratio") {
    config.drop_ratio = value;
  } else if (parameter == "path_scale") {
    config.path_scale = static_cast<int>(value);
  } else if (parameter == "anchors") {
    config.anchors = static_cast<int>(value);
  } else {
    config.Set(parameter, FormatValue(value));
  }
}

}  // namespace

fs::path CreateRunDirectory(const fs::path& root, const std::string& name) {
  fs::create_directories(root);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
  const std::string base = name + "-" + stamp;
  for (int i = 0;; ++i) {
    fs::path dir = root / (i == 0 ? base : fmt::format("{}-{}", base, i));
    if (fs::create_directory(dir)) return dir;
  }
}

RunGuard::RunGuard(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
  const auto lock = (dir_ / ".lock").string();
  const int fd = ::open(lock.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) throw ConfigError("run directory " + dir_.string() + " is locked");
  const std::string pid = std::to_string(::getpid()) + "\n";
  if (::write(fd, pid.data(), pid.size()) < 0) PLOG(WARNING) << "writing " << lock;
  ::close(fd);
  std::ofstream(dir_ / ".incomplete") << "run in progress\n";
}

RunGuard::~RunGuard() {
  std::error_code ec;
  fs::remove(dir_ / ".lock", ec);
}

void RunGuard::MarkComplete() {
  std::error_code ec;
  fs::remove(dir_ / ".incomplete", ec);
}

RunResult TrainAndEvaluate(const SplitCorpus& split, const TrainConfig& config,
                           const Protocol& protocol, const std::string& name,
                           const std::optional<fs::path>& dir) {
  RunResult result;
  result.name = name;
  result.config = config;
  std::optional<RunGuard> guard;
  if (dir) {
    guard.emplace(*dir);
    WriteFile(*dir / "config.json",
              [&](std::ostream& out) { out << config.ToJson().dump(2) << '\n'; });
  }
  Trainer trainer(split, config);
  result.log = trainer.Train();
  Recommender model(trainer.params(), config, trainer.graph());
  result.report = Evaluate(model.AsScoreFn(), split, protocol, config.seed);
  if (dir) {
    WriteFile(*dir / "train_log.csv", [&](std::ostream& out) { result.log.WriteCsv(out); });
    SaveCheckpoint(*dir / "model.ckpt",
                   {config, config.epochs, split.num_items, trainer.params()});
    WriteFile(*dir / "metrics.csv", [&](std::ostream& out) { result.report.WriteCsv(out); });
    guard->MarkComplete();
  }
  LOG(INFO) << fmt::format("{}: HR@10={:.4f} NDCG@10={:.4f}", name,
                           result.report.at(10).hr, result.report.at(10).ndcg);
  return result;
}

std::vector<RunResult> RunAblation(const SplitCorpus& split, const TrainConfig& config,
                                   const Protocol& protocol,
                                   const std::optional<fs::path>& root) {
  std::vector<std::pair<std::string, TrainConfig>> variants = {{"full", config}};
  for (const char* v : {"L2M", "PA", "TA"}) {
    variants.emplace_back(std::string("-") + v, AblationVariant(config, v));
  }
  std::vector<RunResult> runs;
  for (const auto& [name, cfg] : variants) {
    std::optional<fs::path> dir;
    if (root) dir = *root / name;
    runs.push_back(TrainAndEvaluate(split, cfg, protocol, name, dir));
  }
  return runs;
}

void WriteAblationCsv(std::ostream& out, const std::vector<RunResult>& runs) {
  out << "variant,HR@10,NDCG@10,HR@20,NDCG@20\n";
  for (const auto& r : runs) {
    out << fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.name, r.report.at(10).hr,
                       r.report.at(10).ndcg, r.report.at(20).hr, r.report.at(20).ndcg);
  }
}

std::vector<NoiseRow> RunPerturbation(const SplitCorpus& split, const TrainConfig& config,
                                      std::span<const double> levels,
                                      const Protocol& protocol, uint64_t noise_seed,
                                      const std::optional<fs::path>& root) {
  if (std::find(levels.begin(), levels.end(), 0.0) == levels.end()) {
    throw ArgumentError("noise levels must include 0");
  }
  std::vector<NoiseRow> rows;
  for (bool ssl : {true, false}) {
    TrainConfig cfg = config;
    cfg.disable_ssl = !ssl;
    std::vector<NoiseRow> block;
    for (double level : levels) {
      SplitCorpus noisy = split;
      noisy.train = InjectNoise(split.train, split.num_items, level, noise_seed);
      const std::string name = fmt::format("{}-noise{}", ssl ? "ssl" : "nossl", FormatValue(level));
      std::optional<fs::path> dir;
      if (root) dir = *root / name;
      auto run = TrainAndEvaluate(noisy, cfg, protocol, name, dir);
      NoiseRow row;
      row.level = level;
      row.ssl = ssl;
      row.hr20 = run.report.at(20).hr;
      row.ndcg20 = run.report.at(20).ndcg;
      block.push_back(row);
    }
    double clean = 0.0;
    for (const auto& r : block) {
      if (r.level == 0.0) clean = r.hr20;
    }
    for (auto& r : block) r.degradation = clean > 0.0 ? 1.0 - r.hr20 / clean : 0.0;
    rows.insert(rows.end(), block.begin(), block.end());
  }
  return rows;
}

void WritePerturbationCsv(std::ostream& out, const std::vector<NoiseRow>& rows) {
  out << "noise,ssl,HR@20,NDCG@20,degradation\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{:.6f},{:.6f},{:.6f}\n", FormatValue(r.level),
                       r.ssl ? "on" : "off", r.hr20, r.ndcg20, r.degradation);
  }
}

std::map<std::string, std::vector<double>> DefaultSweepGrid() {
  return {{"drop_ratio", {0.1, 0.3, 0.5, 0.7, 0.9}},
          {"path_scale", {1, 2, 3, 4, 5}},
          {"anchors", {50, 100, 150, 200, 250}}};
}

std::vector<SweepRow> RunSweep(const SplitCorpus& split, const TrainConfig& config,
                               const std::map<std::string, std::vector<double>>& grid,
                               const Protocol& protocol,
                               const std::optional<fs::path>& root) {
  std::vector<SweepRow> rows;
  for (const auto& [parameter, values] : grid) {
    std::vector<SweepRow> curve;
    for (double value : values) {
      TrainConfig cfg = config;
      ApplySweepValue(cfg, parameter, value);
      cfg.Validate();
      const std::string name = fmt::format("{}={}", parameter, FormatValue(value));
      std::optional<fs::path> dir;
      if (root) dir = *root / name;
      auto run = TrainAndEvaluate(split, cfg, protocol, name, dir);
      SweepRow row;
      row.parameter = parameter;
      row.value = value;
      row.hr10 = run.report.at(10).hr;
      row.ndcg10 = run.report.at(10).ndcg;
      row.hr20 = run.report.at(20).hr;
      row.ndcg20 = run.report.at(20).ndcg;
      curve.push_back(row);
    }
    double best_hr = 0.0, best_ndcg = 0.0;
    for (const auto& r : curve) {
      best_hr = std::max(best_hr, r.hr10);
      best_ndcg = std::max(best_ndcg, r.ndcg10);
    }
    for (auto& r : curve) {
      r.hr10_decrease = best_hr > 0.0 ? 1.0 - r.hr10 / best_hr : 0.0;
      r.ndcg10_decrease = best_ndcg > 0.0 ? 1.0 - r.ndcg10 / best_ndcg : 0.0;
    }
    rows.insert(rows.end(), curve.begin(), curve.end());
  }
  return rows;
}

void WriteSweepCsv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "parameter,value,HR@10,NDCG@10,HR@20,NDCG@20,HR@10_decrease,NDCG@10_decrease\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.parameter,
                       FormatValue(r.value), r.hr10, r.ndcg10, r.hr20, r.ndcg20,
                       r.hr10_decrease, r.ndcg10_decrease);
  }
}

}  // namespace maerec
