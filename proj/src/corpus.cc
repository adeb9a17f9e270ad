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

#include "maerec/corpus.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <glog/logging.h>

#include "maerec/errors.h"
#include "maerec/random.h"

namespace maerec {
namespace {

std::vector<std::string> SplitOn(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string::size_type start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string Trim(const std::string& s) {
  const char* ws = " \r\n\t";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

bool ParseInt64(const std::string& s, int64_t& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

CorpusFormat ParseCorpusFormat(const std::string& name) {
  if (name == "triples") return CorpusFormat::kTriples;
  if (name == "sequences") return CorpusFormat::kSequences;
  throw ArgumentError("unknown corpus format '" + name + "'");
}

std::vector<InteractionRecord> ParseInteractions(std::istream& in,
                                                 CorpusFormat format) {
  std::vector<InteractionRecord> records;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (Trim(line).empty() || line[0] == '#') continue;
    auto fields = SplitOn(line, '\t');
    if (format == CorpusFormat::kTriples) {
      if (fields.size() != 3) {
        throw ParseError("expected 3 tab-separated fields, got " +
                             std::to_string(fields.size()),
                         line_no);
      }
      InteractionRecord r{Trim(fields[0]), Trim(fields[1]), 0};
      if (r.user.empty() || r.item.empty()) {
        throw ParseError("empty user or item id", line_no);
      }
      if (!ParseInt64(Trim(fields[2]), r.timestamp)) {
        throw ParseError("bad timestamp '" + fields[2] + "'", line_no);
      }
      records.push_back(std::move(r));
    } else {
      if (fields.size() != 2) {
        throw ParseError("expected user<TAB>item list", line_no);
      }
      const std::string user = Trim(fields[0]);
      if (user.empty()) throw ParseError("empty user id", line_no);
      auto items = SplitOn(fields[1], ',');
      int64_t t = 0;
      for (const auto& raw : items) {
        std::string item = Trim(raw);
        if (item.empty()) throw ParseError("empty item id", line_no);
        records.push_back({user, std::move(item), t++});
      }
    }
  }
  return records;
}

Corpus BuildCorpus(std::span<const InteractionRecord> records,
                   const LoadOptions& options) {
  // Group by user, remembering input order for the stable tie-break.
  std::unordered_map<std::string, int> user_slot;
  std::vector<std::string> user_order;
  std::vector<std::vector<size_t>> per_user;
  for (size_t i = 0; i < records.size(); ++i) {
    auto [it, inserted] =
        user_slot.try_emplace(records[i].user, static_cast<int>(user_order.size()));
    if (inserted) {
      user_order.push_back(records[i].user);
      per_user.emplace_back();
    }
    per_user[it->second].push_back(i);
  }

  Corpus corpus;
  std::unordered_map<std::string, int> item_index;
  for (size_t slot = 0; slot < per_user.size(); ++slot) {
    auto& rows = per_user[slot];
    if (static_cast<int>(rows.size()) < options.min_seq_len) continue;
    std::stable_sort(rows.begin(), rows.end(), [&](size_t a, size_t b) {
      return records[a].timestamp < records[b].timestamp;
    });
    UserSequence seq;
    seq.user = corpus.num_users();
    corpus.user_ids.push_back(user_order[slot]);
    seq.items.reserve(rows.size());
    for (size_t row : rows) {
      const auto& item = records[row].item;
      auto [it, inserted] =
          item_index.try_emplace(item, static_cast<int>(corpus.item_ids.size()));
      if (inserted) corpus.item_ids.push_back(item);
      seq.items.push_back(it->second);
    }
    corpus.sequences.push_back(std::move(seq));
  }
  if (corpus.sequences.empty()) {
    throw ConfigError("corpus is empty after filtering users shorter than " +
                      std::to_string(options.min_seq_len));
  }
  return corpus;
}

Corpus LoadCorpus(const std::filesystem::path& path, CorpusFormat format,
                  const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus file " + path.string());
  auto records = ParseInteractions(in, format);
  return BuildCorpus(records, options);
}

int SplitCorpus::FullLength(const UserSequence& train_sequence) const {
  return train_sequence.length() + (has_validation() ? 1 : 0) + 1;
}

SplitCorpus LeaveOneOutSplit(std::span<const UserSequence> sequences,
                             int num_items, bool use_validation) {
  SplitCorpus split;
  split.num_items = num_items;
  const int held_out = use_validation ? 2 : 1;
  int dropped = 0;
  for (const auto& seq : sequences) {
    if (seq.length() < held_out + 1) {
      ++dropped;
      continue;
    }
    UserSequence train{seq.user, {seq.items.begin(), seq.items.end() - held_out}};
    split.test_targets[seq.user] = seq.items.back();
    if (use_validation) {
      split.validation_targets[seq.user] = seq.items[seq.items.size() - 2];
    }
    split.train.push_back(std::move(train));
  }
  if (dropped > 0) {
    LOG(WARNING) << "leave-one-out split dropped " << dropped
                 << " user(s) too short for the requested split";
  }
  split.num_users = static_cast<int>(split.train.size());
  return split;
}

std::vector<TrainingInstance> PrefixInstances(const UserSequence& sequence,
                                              int max_len) {
  std::vector<TrainingInstance> out;
  const auto& s = sequence.items;
  for (size_t t = 1; t < s.size(); ++t) {
    const size_t begin = t > static_cast<size_t>(max_len) ? t - max_len : 0;
    out.push_back({{s.begin() + begin, s.begin() + t}, s[t]});
  }
  return out;
}

std::vector<UserSequence> InjectNoise(std::span<const UserSequence> sequences,
                                      int num_items, double ratio,
                                      uint64_t seed) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw ArgumentError("noise ratio must lie in [0, 1)");
  }
  std::vector<UserSequence> out(sequences.begin(), sequences.end());
  for (size_t u = 0; u < out.size(); ++u) {
    auto& seq = out[u];
    const int n = static_cast<int>(std::floor(ratio * seq.length()));
    if (n == 0) continue;
    Rng rng(DeriveSeed(seed, 0x6e6f697365ULL, u));
    std::unordered_set<int> own(seq.items.begin(), seq.items.end());
    if (static_cast<int>(own.size()) >= num_items) {
      throw ArgumentError("user " + std::to_string(seq.user) +
                          " has interacted with every item; no negatives");
    }
    // Partial Fisher-Yates over positions.
    std::vector<int> positions(seq.length());
    std::iota(positions.begin(), positions.end(), 0);
    for (int i = 0; i < n; ++i) {
      const int j = i + static_cast<int>(UniformIndex(rng, seq.length() - i));
      std::swap(positions[i], positions[j]);
      int item;
      do {
        item = static_cast<int>(UniformIndex(rng, num_items));
      } while (own.contains(item));
      seq.items[positions[i]] = item;
    }
  }
  return out;
}

SparsityBucket BucketForLength(int length) {
  if (length < 5) return SparsityBucket::kLen3To5;
  if (length < 10) return SparsityBucket::kLen5To10;
  if (length < 20) return SparsityBucket::kLen10To20;
  return SparsityBucket::kLen20Plus;
}

std::string BucketLabel(SparsityBucket bucket) {
  switch (bucket) {
    case SparsityBucket::kLen3To5: return "[3,5)";
    case SparsityBucket::kLen5To10: return "[5,10)";
    case SparsityBucket::kLen10To20: return "[10,20)";
    case SparsityBucket::kLen20Plus: return "[20,inf)";
  }
  return "?";
}

std::map<SparsityBucket, std::vector<int>> SparsityBuckets(
    std::span<const UserSequence> sequences) {
  std::map<SparsityBucket, std::vector<int>> buckets;
  for (auto b : kAllBuckets) buckets[b];
  for (const auto& seq : sequences) {
    buckets[BucketForLength(seq.length())].push_back(seq.user);
  }
  return buckets;
}

void WriteSequences(std::ostream& out, std::span<const UserSequence> sequences) {
  for (const auto& seq : sequences) {
    out << seq.user << '\t';
    for (size_t i = 0; i < seq.items.size(); ++i) {
      if (i) out << ',';
      out << seq.items[i];
    }
    out << '\n';
  }
}

void WriteMetadata(std::ostream& out, const Corpus& corpus,
                   const std::map<std::string, std::string>& extra) {
  int64_t interactions = 0;
  for (const auto& s : corpus.sequences) interactions += s.length();
  out << "num_users=" << corpus.num_users() << '\n';
  out << "num_items=" << corpus.num_items() << '\n';
  out << "num_interactions=" << interactions << '\n';
  for (const auto& [k, v] : extra) out << k << '=' << v << '\n';
  for (int u = 0; u < corpus.num_users(); ++u) {
    out << "user." << u << '=' << corpus.user_ids[u] << '\n';
  }
  for (int i = 0; i < corpus.num_items(); ++i) {
    out << "item." << i << '=' << corpus.item_ids[i] << '\n';
  }
}

std::map<std::string, std::string> ReadKeyValues(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line_no);
    kv[Trim(line.substr(0, eq))] = Trim(line.substr(eq + 1));
  }
  return kv;
}

PreparedCorpus LoadPreparedCorpus(const std::filesystem::path& dir) {
  PreparedCorpus prepared;
  std::ifstream meta(dir / "metadata.txt");
  if (!meta) throw ConfigError("missing metadata.txt in " + dir.string());
  prepared.metadata = ReadKeyValues(meta);
  auto count = [&](const std::string& key) {
    auto it = prepared.metadata.find(key);
    if (it == prepared.metadata.end()) throw ConfigError("metadata lacks " + key);
    return std::stoi(it->second);
  };
  const int num_users = count("num_users");
  const int num_items = count("num_items");
  auto& corpus = prepared.corpus;
  corpus.user_ids.resize(num_users);
  corpus.item_ids.resize(num_items);
  for (int u = 0; u < num_users; ++u) {
    corpus.user_ids[u] = prepared.metadata.at("user." + std::to_string(u));
  }
  for (int i = 0; i < num_items; ++i) {
    corpus.item_ids[i] = prepared.metadata.at("item." + std::to_string(i));
  }

  std::ifstream in(dir / "sequences.tsv");
  if (!in) throw ConfigError("missing sequences.tsv in " + dir.string());
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty() || line[0] == '#') continue;
    auto fields = SplitOn(line, '\t');
    if (fields.size() != 2) throw ParseError("expected user<TAB>items", line_no);
    UserSequence seq;
    int64_t v;
    if (!ParseInt64(Trim(fields[0]), v) || v < 0 || v >= num_users) {
      throw ParseError("bad user index", line_no);
    }
    seq.user = static_cast<int>(v);
    for (const auto& tok : SplitOn(fields[1], ',')) {
      if (!ParseInt64(Trim(tok), v) || v < 0 || v >= num_items) {
        throw ParseError("bad item index '" + tok + "'", line_no);
      }
      seq.items.push_back(static_cast<int>(v));
    }
    corpus.sequences.push_back(std::move(seq));
  }
  return prepared;
}

}  // namespace maerec
