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

#include "maerec/evaluation.h"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <regex>
#include <unordered_set>

#include <fmt/format.h>

#include "maerec/errors.h"
#include "maerec/random.h"

namespace maerec {
namespace {

constexpr int kEvalBatch = 256;

std::vector<int> SampleCandidates(int num_items, int target,
                                  const std::unordered_set<int>& seen,
                                  int negatives, uint64_t seed) {
  std::vector<int> candidates{target};
  const int available = num_items - static_cast<int>(seen.size());
  if (available <= negatives) {
    for (int i = 0; i < num_items; ++i) {
      if (!seen.count(i)) candidates.push_back(i);
    }
    return candidates;
  }
  Rng rng(seed);
  std::unordered_set<int> chosen;
  while (static_cast<int>(chosen.size()) < negatives) {
    const int item = static_cast<int>(UniformIndex(rng, num_items));
    if (seen.count(item) || !chosen.insert(item).second) continue;
    candidates.push_back(item);
  }
  return candidates;
}

}  // namespace

Protocol Protocol::Parse(const std::string& text) {
  if (text == "full") return Full();
  if (text == "sampled") return Sampled(100);
  std::smatch m;
  static const std::regex kSampled(R"(sampled\((\d+)\))");
  if (std::regex_match(text, m, kSampled)) {
    const int n = std::stoi(m[1].str());
    if (n < 1) throw ConfigError("sampled protocol needs at least one negative");
    return Sampled(n);
  }
  throw ConfigError("unknown protocol '" + text + "' (full, sampled, sampled(N))");
}

std::string Protocol::Describe() const {
  return kind == Kind::kFull ? "full" : fmt::format("sampled({})", negatives);
}

int RankTarget(std::span<const double> scores, std::span<const int> candidates,
               int target) {
  if (std::find(candidates.begin(), candidates.end(), target) == candidates.end()) {
    throw ProtocolError(fmt::format("target {} is not among the candidates", target));
  }
  const double t = scores[target];
  int rank = 1;
  for (int c : candidates) {
    if (c == target) continue;
    if (scores[c] > t || (scores[c] == t && c < target)) ++rank;
  }
  return rank;
}

HitNdcg HrNdcg(std::span<const int> ranks, int k) {
  HitNdcg out;
  if (ranks.empty()) return out;
  for (int r : ranks) {
    if (r <= k) {
      out.hr += 1.0;
      out.ndcg += 1.0 / std::log2(r + 1.0);
    }
  }
  out.hr /= static_cast<double>(ranks.size());
  out.ndcg /= static_cast<double>(ranks.size());
  return out;
}

MetricsReport Summarize(std::vector<UserRank> ranks, const Protocol& protocol,
                        std::span<const int> ks) {
  MetricsReport report;
  report.protocol = protocol;
  report.ks.assign(ks.begin(), ks.end());
  std::vector<int> all;
  std::map<SparsityBucket, std::vector<int>> grouped;
  for (const auto& r : ranks) {
    all.push_back(r.rank);
    grouped[BucketForLength(r.full_length)].push_back(r.rank);
  }
  for (int k : ks) {
    report.overall[k] = HrNdcg(all, k);
    for (const auto& [bucket, values] : grouped) {
      report.buckets[bucket][k] = HrNdcg(values, k);
    }
  }
  for (const auto& [bucket, values] : grouped) {
    report.bucket_users[bucket] = static_cast<int>(values.size());
  }
  report.ranks = std::move(ranks);
  return report;
}

MetricsReport Evaluate(const ScoreFn& score, const SplitCorpus& split,
                       const Protocol& protocol, uint64_t seed,
                       EvalTarget target, std::span<const int> ks) {
  const auto& targets =
      target == EvalTarget::kTest ? split.test_targets : split.validation_targets;
  std::vector<UserRank> ranks;
  std::vector<const UserSequence*> pending;
  auto flush = [&] {
    if (pending.empty()) return;
    std::vector<std::vector<int>> histories;
    for (const auto* seq : pending) {
      auto h = seq->items;
      if (target == EvalTarget::kTest && split.has_validation()) {
        h.push_back(split.validation_targets.at(seq->user));
      }
      histories.push_back(std::move(h));
    }
    const Eigen::MatrixXd scores = score(histories);
    for (size_t b = 0; b < pending.size(); ++b) {
      const auto* seq = pending[b];
      const int t = targets.at(seq->user);
      const Eigen::VectorXd row = scores.row(static_cast<Eigen::Index>(b)).transpose();
      std::span<const double> s(row.data(), static_cast<size_t>(row.size()));
      std::vector<int> candidates;
      if (protocol.kind == Protocol::Kind::kFull) {
        candidates.resize(split.num_items);
        for (int i = 0; i < split.num_items; ++i) candidates[i] = i;
      } else {
        std::unordered_set<int> seen(histories[b].begin(), histories[b].end());
        seen.insert(t);
        if (target == EvalTarget::kValidation) seen.insert(split.test_targets.at(seq->user));
        candidates = SampleCandidates(split.num_items, t, seen, protocol.negatives,
                                      DeriveSeed(seed, 0x6576616c, seq->user));
      }
      ranks.push_back({seq->user, RankTarget(s, candidates, t), split.FullLength(*seq),
                       static_cast<int>(candidates.size())});
    }
    pending.clear();
  };
  for (const auto& seq : split.train) {
    if (!targets.count(seq.user)) continue;
    pending.push_back(&seq);
    if (static_cast<int>(pending.size()) == kEvalBatch) flush();
  }
  flush();
  return Summarize(std::move(ranks), protocol, ks);
}

void MetricsReport::WriteCsv(std::ostream& out, bool header) const {
  if (header) out << "metric,K,group,value\n";
  const std::string tag = noise_tag.empty() ? "" : "noise=" + noise_tag + ";";
  auto row = [&](const char* metric, int k, const std::string& group, double v) {
    out << fmt::format("{},{},{}{},{:.10g}\n", metric, k, tag, group, v);
  };
  for (int k : ks) {
    row("HR", k, "all", overall.at(k).hr);
    row("NDCG", k, "all", overall.at(k).ndcg);
  }
  for (const auto& [bucket, per_k] : buckets) {
    for (int k : ks) {
      row("HR", k, "bucket=" + BucketLabel(bucket), per_k.at(k).hr);
      row("NDCG", k, "bucket=" + BucketLabel(bucket), per_k.at(k).ndcg);
    }
  }
}

std::string MetricsReport::Table() const {
  std::string s = fmt::format("protocol: {}   users: {}{}\n", protocol.Describe(),
                              ranks.size(),
                              noise_tag.empty() ? "" : "   noise: " + noise_tag);
  s += fmt::format("{:<12}", "group");
  for (int k : ks) s += fmt::format("{:>10}{:>10}", fmt::format("HR@{}", k), fmt::format("NDCG@{}", k));
  s += "\n";
  auto line = [&](const std::string& name, const std::map<int, HitNdcg>& per_k) {
    s += fmt::format("{:<12}", name);
    for (int k : ks) s += fmt::format("{:>10.4f}{:>10.4f}", per_k.at(k).hr, per_k.at(k).ndcg);
    s += "\n";
  };
  line("all", overall);
  for (const auto& [bucket, per_k] : buckets) {
    line(fmt::format("{} n={}", BucketLabel(bucket), bucket_users.at(bucket)), per_k);
  }
  return s;
}

}  // namespace maerec
