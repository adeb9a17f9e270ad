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
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "maerec/corpus.h"

namespace maerec {

// Maps user histories to a |histories| x |V| score matrix.
using ScoreFn =
    std::function<Eigen::MatrixXd(std::span<const std::vector<int>> histories)>;

// Candidate set per user: every item, or the target plus `negatives` items
// sampled uniformly from those the user never interacted with.
struct Protocol {
  enum class Kind { kFull, kSampled };
  Kind kind = Kind::kSampled;
  int negatives = 100;

  static Protocol Full() { return {Kind::kFull, 0}; }
  static Protocol Sampled(int n) { return {Kind::kSampled, n}; }
  // "full", "sampled" or "sampled(N)".
  static Protocol Parse(const std::string& text);
  std::string Describe() const;
};

// 1-based rank of `target` among `candidates` by descending score, ties
// going to the lower item index. Throws ProtocolError if the target is not
// a candidate.
int RankTarget(std::span<const double> scores, std::span<const int> candidates,
               int target);

struct HitNdcg {
  double hr = 0.0;
  double ndcg = 0.0;
};

// Fraction of ranks <= k, and the mean of 1/log2(rank+1) over those hits.
HitNdcg HrNdcg(std::span<const int> ranks, int k);

struct UserRank {
  int user = 0;
  int rank = 0;
  int full_length = 0;
  int num_candidates = 0;
};

struct MetricsReport {
  Protocol protocol;
  std::vector<int> ks;
  std::string noise_tag;  // empty when not part of a noise study
  std::vector<UserRank> ranks;
  std::map<int, HitNdcg> overall;
  std::map<SparsityBucket, std::map<int, HitNdcg>> buckets;
  std::map<SparsityBucket, int> bucket_users;

  const HitNdcg& at(int k) const { return overall.at(k); }
  // metric,K,group,value rows.
  void WriteCsv(std::ostream& out, bool header = true) const;
  std::string Table() const;
};

// Aggregates ranks overall and per sparsity bucket (by full sequence length).
MetricsReport Summarize(std::vector<UserRank> ranks, const Protocol& protocol,
                        std::span<const int> ks);

inline constexpr int kDefaultKs[] = {5, 10, 20};

enum class EvalTarget { kValidation, kTest };

// Leave-one-out ranking. Test histories include the validation item when a
// validation split exists. Sampled negatives come from a per-user stream
// derived from (seed, user).
MetricsReport Evaluate(const ScoreFn& score, const SplitCorpus& split,
                       const Protocol& protocol, uint64_t seed,
                       EvalTarget target = EvalTarget::kTest,
                       std::span<const int> ks = kDefaultKs);

}  // namespace maerec
