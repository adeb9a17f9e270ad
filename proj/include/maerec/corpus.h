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
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace maerec {

// One raw (user, item, timestamp) row of an interaction log.
struct InteractionRecord {
  std::string user;
  std::string item;
  int64_t timestamp = 0;
};

// A user's temporally ordered history of dense item indices.
struct UserSequence {
  int user = 0;
  std::vector<int> items;

  int length() const { return static_cast<int>(items.size()); }
  bool operator==(const UserSequence&) const = default;
};

// Ingested corpus with the dense-index bijection back to raw ids.
struct Corpus {
  std::vector<UserSequence> sequences;
  std::vector<std::string> user_ids;  // dense user index -> raw id
  std::vector<std::string> item_ids;  // dense item index -> raw id

  int num_users() const { return static_cast<int>(user_ids.size()); }
  int num_items() const { return static_cast<int>(item_ids.size()); }
};

enum class CorpusFormat {
  kTriples,    // user<TAB>item<TAB>timestamp
  kSequences,  // user<TAB>item1,item2,...
};

CorpusFormat ParseCorpusFormat(const std::string& name);

struct LoadOptions {
  int min_seq_len = 3;
};

// Groups records per user, orders each group by timestamp (ties keep input
// order) and re-indexes users and items densely in order of first appearance
// among the surviving users. Users shorter than min_seq_len are dropped.
// Throws ConfigError if nothing survives.
Corpus BuildCorpus(std::span<const InteractionRecord> records,
                   const LoadOptions& options = {});

// Parses either text format. `#` lines and blank lines are skipped.
// Throws ParseError with the offending line number.
std::vector<InteractionRecord> ParseInteractions(std::istream& in,
                                                 CorpusFormat format);

Corpus LoadCorpus(const std::filesystem::path& path, CorpusFormat format,
                  const LoadOptions& options = {});

// Leave-one-out split.
struct SplitCorpus {
  std::vector<UserSequence> train;
  std::map<int, int> validation_targets;  // empty unless requested
  std::map<int, int> test_targets;
  int num_items = 0;
  int num_users = 0;

  bool has_validation() const { return !validation_targets.empty(); }
  // Length of the user's sequence before splitting.
  int FullLength(const UserSequence& train_sequence) const;
};

// Last item becomes the test target, the one before it the validation target
// when `use_validation`. Users too short for the split are dropped with a
// warning.
SplitCorpus LeaveOneOutSplit(std::span<const UserSequence> sequences,
                             int num_items, bool use_validation);

struct TrainingInstance {
  std::vector<int> prefix;
  int target = 0;
};

// ((s1),s2), ((s1,s2),s3), ... with every prefix cut to its most recent
// `max_len` items.
std::vector<TrainingInstance> PrefixInstances(const UserSequence& sequence,
                                              int max_len);

// Replaces floor(ratio * length) uniformly chosen positions of every sequence
// with items drawn uniformly from those absent from that sequence.
std::vector<UserSequence> InjectNoise(std::span<const UserSequence> sequences,
                                      int num_items, double ratio,
                                      uint64_t seed);

// Length groups [3,5), [5,10), [10,20), [20,inf). Shorter sequences fall into
// the first group.
enum class SparsityBucket { kLen3To5 = 0, kLen5To10, kLen10To20, kLen20Plus };

inline constexpr SparsityBucket kAllBuckets[] = {
    SparsityBucket::kLen3To5, SparsityBucket::kLen5To10,
    SparsityBucket::kLen10To20, SparsityBucket::kLen20Plus};

SparsityBucket BucketForLength(int length);
std::string BucketLabel(SparsityBucket bucket);

std::map<SparsityBucket, std::vector<int>> SparsityBuckets(
    std::span<const UserSequence> sequences);

// Writes `user<TAB>i1,i2,...` using dense indices.
void WriteSequences(std::ostream& out, std::span<const UserSequence> sequences);

// Key-value sidecar: counts and both index maps.
void WriteMetadata(std::ostream& out, const Corpus& corpus,
                   const std::map<std::string, std::string>& extra = {});

// Reads a directory produced by WriteSequences + WriteMetadata without
// re-indexing.
struct PreparedCorpus {
  Corpus corpus;
  std::map<std::string, std::string> metadata;
};
PreparedCorpus LoadPreparedCorpus(const std::filesystem::path& dir);

std::map<std::string, std::string> ReadKeyValues(std::istream& in);

}  // namespace maerec
