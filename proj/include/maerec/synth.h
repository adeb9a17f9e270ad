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
#include <iosfwd>
#include <vector>

#include "maerec/corpus.h"

namespace maerec {

// Planted-transition corpus: items fall into latent interest clusters and
// each next item stays in the current item's cluster with probability
// `intra_cluster`, otherwise it is uniform over items of other clusters.
struct SynthOptions {
  int num_users = 1000;
  int num_items = 500;
  uint64_t seed = 7;
  int cluster_size = 10;
  double intra_cluster = 0.8;
  double long_user_fraction = 0.1;
};

struct SynthCorpus {
  std::vector<InteractionRecord> records;  // timestamp = position in sequence
  std::vector<int> cluster_of;             // per item index
  std::vector<std::vector<int>> sequences;
};

// Throws ArgumentError when num_items < 50 or num_users < 1.
SynthCorpus GenerateSynthCorpus(const SynthOptions& options);

// user<TAB>item<TAB>timestamp lines.
void WriteTriples(std::ostream& out, const std::vector<InteractionRecord>& records);

}  // namespace maerec
