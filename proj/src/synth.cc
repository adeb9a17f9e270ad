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

#include "maerec/synth.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "maerec/errors.h"
#include "maerec/random.h"

namespace maerec {
namespace {

// Extra length beyond the minimum, geometric with the given mean.
int GeometricExtra(Rng& rng, double mean, int cap) {
  const double q = mean / (1.0 + mean);
  int extra = 0;
  while (extra < cap && UniformOpen(rng) < q) ++extra;
  return extra;
}

constexpr int kShortMin = 3;
constexpr int kShortMaxExtra = 16;
constexpr double kShortMeanExtra = 0.5;
constexpr int kLongMin = 20;
constexpr int kLongMaxExtra = 30;
constexpr double kLongMeanExtra = 3.0;

}  // namespace

SynthCorpus GenerateSynthCorpus(const SynthOptions& options) {
  if (options.num_items < 50) throw ArgumentError("synthetic corpus needs at least 50 items");
  if (options.num_users < 1) throw ArgumentError("synthetic corpus needs at least one user");
  if (options.cluster_size < 2) throw ArgumentError("clusters need at least two items");
  Rng rng(DeriveSeed(options.seed, 0x73796e74));
  const int n = options.num_items;

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n; i > 1; --i) std::swap(perm[i - 1], perm[UniformIndex(rng, i)]);
  const int num_clusters = std::max(2, n / options.cluster_size);
  SynthCorpus out;
  out.cluster_of.assign(n, 0);
  std::vector<std::vector<int>> members(num_clusters);
  for (int i = 0; i < n; ++i) {
    const int c = std::min(i / options.cluster_size, num_clusters - 1);
    out.cluster_of[perm[i]] = c;
    members[c].push_back(perm[i]);
  }

  auto next_item = [&](int current) {
    const int c = out.cluster_of[current];
    const auto& own = members[c];
    if (UniformOpen(rng) < options.intra_cluster) {
      int pick;
      do {
        pick = own[UniformIndex(rng, static_cast<int64_t>(own.size()))];
      } while (pick == current);
      return pick;
    }
    int pick;
    do {
      pick = static_cast<int>(UniformIndex(rng, n));
    } while (out.cluster_of[pick] == c);
    return pick;
  };

  for (int u = 0; u < options.num_users; ++u) {
    const bool is_long = UniformOpen(rng) < options.long_user_fraction;
    const int length = is_long ? kLongMin + GeometricExtra(rng, kLongMeanExtra, kLongMaxExtra)
                               : kShortMin + GeometricExtra(rng, kShortMeanExtra, kShortMaxExtra);
    std::vector<int> seq{static_cast<int>(UniformIndex(rng, n))};
    while (static_cast<int>(seq.size()) < length) seq.push_back(next_item(seq.back()));
    for (int t = 0; t < length; ++t) {
      out.records.push_back({fmt::format("u{}", u), fmt::format("i{}", seq[t]), t});
    }
    out.sequences.push_back(std::move(seq));
  }
  return out;
}

void WriteTriples(std::ostream& out, const std::vector<InteractionRecord>& records) {
  for (const auto& r : records) {
    out << r.user << '\t' << r.item << '\t' << r.timestamp << '\n';
  }
}

}  // namespace maerec
