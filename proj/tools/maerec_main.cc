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

// Command-line driver: prepare, train, evaluate, ablate, perturb, sweep,
// dump-relatedness and synth.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <glog/logging.h>

#include "maerec/corpus.h"
#include "maerec/errors.h"
#include "maerec/evaluation.h"
#include "maerec/experiments.h"
#include "maerec/masking.h"
#include "maerec/parameters.h"
#include "maerec/synth.h"
#include "maerec/trainer.h"

namespace fs = std::filesystem;
using namespace maerec;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<uint64_t> seed;
};

struct DataOptions {
  std::string data;
  std::string format = "triples";
  int min_len = 3;
  bool validation = false;
};

void AddCommon(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--set", opts.overrides, "Config override key=value (repeatable)");
  cmd->add_option("--out", opts.out, "Output root (default $MAEREC_OUT or ./runs)");
  cmd->add_option("--seed", opts.seed, "Random seed (overrides config)");
}

void AddData(CLI::App* cmd, DataOptions& opts) {
  cmd->add_option("--data", opts.data, "Prepared corpus directory or raw interaction file")
      ->required();
  cmd->add_option("--format", opts.format, "Raw file format: triples or sequences");
  cmd->add_option("--min-len", opts.min_len, "Drop users with fewer interactions");
  cmd->add_flag("--validation", opts.validation, "Hold out a validation item per user");
}

TrainConfig ResolveConfig(const CommonOptions& opts) {
  TrainConfig config;
  if (!opts.config_path.empty()) config = LoadTrainConfig(opts.config_path);
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    config.Set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed) config.seed = *opts.seed;
  config.Validate();
  return config;
}

fs::path OutputRoot(const CommonOptions& opts) {
  if (!opts.out.empty()) return opts.out;
  if (const char* env = std::getenv("MAEREC_OUT"); env && *env) return env;
  return "runs";
}

struct LoadedData {
  Corpus corpus;
  SplitCorpus split;
};

LoadedData LoadData(const DataOptions& opts) {
  LoadedData loaded;
  bool validation = opts.validation;
  if (fs::is_directory(opts.data)) {
    auto prepared = LoadPreparedCorpus(opts.data);
    loaded.corpus = std::move(prepared.corpus);
    if (auto it = prepared.metadata.find("validation"); it != prepared.metadata.end()) {
      validation = validation || it->second == "1";
    }
  } else {
    loaded.corpus = LoadCorpus(opts.data, ParseCorpusFormat(opts.format), {opts.min_len});
  }
  loaded.split = LeaveOneOutSplit(loaded.corpus.sequences, loaded.corpus.num_items(), validation);
  return loaded;
}

template <typename Fn>
void WriteFile(const fs::path& path, Fn&& fn) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  fn(out);
}

void WriteSplitSequences(const fs::path& path, const SplitCorpus& split,
                         const std::map<int, int>& targets) {
  WriteFile(path, [&](std::ostream& out) {
    for (const auto& [user, item] : targets) out << user << '\t' << item << '\n';
  });
}

int RunPrepare(const CommonOptions& common, const DataOptions& data) {
  auto loaded = LoadData(data);
  const auto dir = CreateRunDirectory(OutputRoot(common), "prepare");
  RunGuard guard(dir);
  WriteFile(dir / "sequences.tsv",
            [&](std::ostream& out) { WriteSequences(out, loaded.corpus.sequences); });
  WriteFile(dir / "metadata.txt", [&](std::ostream& out) {
    WriteMetadata(out, loaded.corpus,
                  {{"validation", loaded.split.has_validation() ? "1" : "0"}});
  });
  WriteFile(dir / "train.tsv",
            [&](std::ostream& out) { WriteSequences(out, loaded.split.train); });
  WriteSplitSequences(dir / "test.tsv", loaded.split, loaded.split.test_targets);
  if (loaded.split.has_validation()) {
    WriteSplitSequences(dir / "validation.tsv", loaded.split,
                        loaded.split.validation_targets);
  }
  guard.MarkComplete();
  std::cout << fmt::format("prepared {} users, {} items -> {}\n",
                           loaded.corpus.num_users(), loaded.corpus.num_items(),
                           dir.string());
  return 0;
}

int RunTrain(const CommonOptions& common, const DataOptions& data, int checkpoint_every) {
  const auto config = ResolveConfig(common);
  auto loaded = LoadData(data);
  const auto dir = CreateRunDirectory(OutputRoot(common), "train");
  RunGuard guard(dir);
  WriteFile(dir / "config.json",
            [&](std::ostream& out) { out << config.ToJson().dump(2) << '\n'; });
  Trainer trainer(loaded.split, config);
  auto log = trainer.Train([&](const EpochStats& e, const Trainer& t) {
    if (checkpoint_every > 0 && (e.epoch + 1) % checkpoint_every == 0) {
      SaveCheckpoint(dir / fmt::format("epoch-{}.ckpt", e.epoch + 1),
                     {config, e.epoch + 1, loaded.split.num_items, t.params()});
    }
  });
  WriteFile(dir / "train_log.csv", [&](std::ostream& out) { log.WriteCsv(out); });
  SaveCheckpoint(dir / "model.ckpt",
                 {config, config.epochs, loaded.split.num_items, trainer.params()});
  guard.MarkComplete();
  std::cout << dir.string() << '\n';
  return 0;
}

int RunEvaluate(const CommonOptions& common, const DataOptions& data,
                const std::string& checkpoint_path, const std::string& protocol_text) {
  auto ckpt = LoadCheckpoint(checkpoint_path);
  auto loaded = LoadData(data);
  if (ckpt.num_items != loaded.split.num_items) {
    throw ConfigError("checkpoint item count does not match the corpus");
  }
  const Protocol protocol = Protocol::Parse(protocol_text);
  const uint64_t seed = common.seed.value_or(ckpt.config.seed);
  const auto graph = BuildGraph(loaded.split.train, loaded.split.num_items,
                                ckpt.config.graph_window);
  Recommender model(ckpt.params, ckpt.config, graph);
  const auto report = Evaluate(model.AsScoreFn(), loaded.split, protocol, seed);
  const auto dir = CreateRunDirectory(OutputRoot(common), "evaluate");
  RunGuard guard(dir);
  WriteFile(dir / "metrics.csv", [&](std::ostream& out) { report.WriteCsv(out); });
  guard.MarkComplete();
  std::cout << report.Table() << dir.string() << '\n';
  return 0;
}

int RunAblate(const CommonOptions& common, const DataOptions& data,
              const std::string& protocol_text) {
  const auto config = ResolveConfig(common);
  auto loaded = LoadData(data);
  const auto dir = CreateRunDirectory(OutputRoot(common), "ablate");
  RunGuard guard(dir);
  const auto runs = RunAblation(loaded.split, config, Protocol::Parse(protocol_text), dir);
  WriteFile(dir / "ablation.csv", [&](std::ostream& out) { WriteAblationCsv(out, runs); });
  guard.MarkComplete();
  WriteAblationCsv(std::cout, runs);
  std::cout << dir.string() << '\n';
  return 0;
}

int RunPerturb(const CommonOptions& common, const DataOptions& data,
               const std::string& protocol_text) {
  const auto config = ResolveConfig(common);
  auto loaded = LoadData(data);
  const auto dir = CreateRunDirectory(OutputRoot(common), "perturb");
  RunGuard guard(dir);
  const auto rows = RunPerturbation(loaded.split, config, kNoiseLevels,
                                    Protocol::Parse(protocol_text), config.seed, dir);
  WriteFile(dir / "perturbation.csv",
            [&](std::ostream& out) { WritePerturbationCsv(out, rows); });
  guard.MarkComplete();
  WritePerturbationCsv(std::cout, rows);
  std::cout << dir.string() << '\n';
  return 0;
}

std::map<std::string, std::vector<double>> ParseGrid(const std::vector<std::string>& specs) {
  if (specs.empty()) return DefaultSweepGrid();
  std::map<std::string, std::vector<double>> grid;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("--grid expects name=v1,v2,...");
    std::stringstream values(spec.substr(eq + 1));
    std::string item;
    auto& out = grid[spec.substr(0, eq)];
    while (std::getline(values, item, ',')) {
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError("bad grid value '" + item + "'");
      }
    }
  }
  return grid;
}

int RunSweepCommand(const CommonOptions& common, const DataOptions& data,
                    const std::string& protocol_text,
                    const std::vector<std::string>& grid_specs) {
  const auto config = ResolveConfig(common);
  auto loaded = LoadData(data);
  const auto grid = ParseGrid(grid_specs);
  const auto dir = CreateRunDirectory(OutputRoot(common), "sweep");
  RunGuard guard(dir);
  const auto rows = RunSweep(loaded.split, config, grid, Protocol::Parse(protocol_text), dir);
  WriteFile(dir / "sweep.csv", [&](std::ostream& out) { WriteSweepCsv(out, rows); });
  guard.MarkComplete();
  WriteSweepCsv(std::cout, rows);
  std::cout << dir.string() << '\n';
  return 0;
}

int RunDumpRelatedness(const CommonOptions& common, const DataOptions& data,
                       const std::string& checkpoint_path) {
  auto loaded = LoadData(data);
  TrainConfig config;
  ParameterStore params;
  if (!checkpoint_path.empty()) {
    auto ckpt = LoadCheckpoint(checkpoint_path);
    config = ckpt.config;
    params = std::move(ckpt.params);
    if (common.seed) config.seed = *common.seed;
  } else {
    config = ResolveConfig(common);
    params = InitializeParameters(config, loaded.split.num_items);
  }
  const auto graph = BuildGraph(loaded.split.train, loaded.split.num_items, config.graph_window);
  const auto table = SemanticRelatedness(graph, params.item_embeddings,
                                         config.EffectiveRelatednessHops(),
                                         config.neighborhood_cap, config.seed);
  const auto dir = CreateRunDirectory(OutputRoot(common), "relatedness");
  RunGuard guard(dir);
  WriteFile(dir / "relatedness.tsv", [&](std::ostream& out) {
    out << "item\tgamma\tgamma_perturbed\n";
    WriteRelatedness(out, table, loaded.corpus.item_ids);
  });
  guard.MarkComplete();
  std::cout << dir.string() << '\n';
  return 0;
}

int RunSynth(const CommonOptions& common, int users, int items, const std::string& output) {
  SynthOptions opts;
  opts.num_users = users;
  opts.num_items = items;
  opts.seed = common.seed.value_or(opts.seed);
  const auto synth = GenerateSynthCorpus(opts);
  if (!output.empty()) {
    WriteFile(output, [&](std::ostream& out) { WriteTriples(out, synth.records); });
    std::cout << output << '\n';
    return 0;
  }
  const auto dir = CreateRunDirectory(OutputRoot(common), "synth");
  RunGuard guard(dir);
  WriteFile(dir / "interactions.tsv",
            [&](std::ostream& out) { WriteTriples(out, synth.records); });
  guard.MarkComplete();
  std::cout << (dir / "interactions.tsv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  google::InitGoogleLogging(argv[0]);
  FLAGS_logtostderr = true;

  CLI::App app{"Masked graph autoencoder sequential recommender"};
  app.require_subcommand(1);
  CommonOptions common;
  DataOptions data;
  std::string protocol = "sampled(100)";
  std::string checkpoint;
  int checkpoint_every = 0;
  std::vector<std::string> grid;
  int users = 1000, items = 500;
  std::string synth_output;

  auto* prepare = app.add_subcommand("prepare", "Ingest and split a raw corpus");
  AddCommon(prepare, common);
  AddData(prepare, data);

  auto* train = app.add_subcommand("train", "Train a model");
  AddCommon(train, common);
  AddData(train, data);
  train->add_option("--checkpoint-every", checkpoint_every, "Also checkpoint every N epochs");

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint");
  AddCommon(evaluate, common);
  AddData(evaluate, data);
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  evaluate->add_option("--protocol", protocol, "full, sampled or sampled(N)");

  auto* ablate = app.add_subcommand("ablate", "Full model against -L2M, -PA, -TA");
  AddCommon(ablate, common);
  AddData(ablate, data);
  ablate->add_option("--protocol", protocol, "full, sampled or sampled(N)");

  auto* perturb = app.add_subcommand("perturb", "Noise-robustness study");
  AddCommon(perturb, common);
  AddData(perturb, data);
  perturb->add_option("--protocol", protocol, "full, sampled or sampled(N)");

  auto* sweep = app.add_subcommand("sweep", "One-at-a-time sweep of drop_ratio, path_scale, anchors");
  AddCommon(sweep, common);
  AddData(sweep, data);
  sweep->add_option("--protocol", protocol, "full, sampled or sampled(N)");
  sweep->add_option("--grid", grid, "name=v1,v2,... (repeatable)");

  auto* dump = app.add_subcommand("dump-relatedness", "Per-item relatedness table");
  AddCommon(dump, common);
  AddData(dump, data);
  dump->add_option("--checkpoint", checkpoint, "Checkpoint file (default: fresh init)");

  auto* synth = app.add_subcommand("synth", "Generate the planted-transition corpus");
  AddCommon(synth, common);
  synth->add_option("--users", users, "Number of users");
  synth->add_option("--items", items, "Number of items");
  synth->add_option("--output", synth_output, "Write the corpus to this file");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*prepare) return RunPrepare(common, data);
    if (*train) return RunTrain(common, data, checkpoint_every);
    if (*evaluate) return RunEvaluate(common, data, checkpoint, protocol);
    if (*ablate) return RunAblate(common, data, protocol);
    if (*perturb) return RunPerturb(common, data, protocol);
    if (*sweep) return RunSweepCommand(common, data, protocol, grid);
    if (*dump) return RunDumpRelatedness(common, data, checkpoint);
    if (*synth) return RunSynth(common, users, items, synth_output);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
