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

#include "maerec/transition_graph.h"

#include <algorithm>
#include <ostream>
#include <queue>

#include "maerec/errors.h"
#include "maerec/random.h"

namespace maerec {

TransitionGraph::TransitionGraph(int num_nodes, std::span<const Edge> edges)
    : adjacency_(num_nodes) {
  edges_.reserve(edges.size());
  for (const auto& e : edges) {
    if (e.first != e.second) edges_.push_back(CanonicalEdge(e.first, e.second));
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  for (const auto& [u, v] : edges_) {
    adjacency_[u].push_back(v);
    adjacency_[v].push_back(u);
  }
  for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
}

bool TransitionGraph::HasEdge(int u, int v) const {
  const auto& nbrs = adjacency_[u];
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

TransitionGraph BuildGraph(std::span<const UserSequence> sequences,
                           int num_items, int window) {
  if (window < 1) throw ArgumentError("transition window must be >= 1");
  std::vector<Edge> edges;
  for (const auto& seq : sequences) {
    const auto& s = seq.items;
    for (size_t t = 0; t < s.size(); ++t) {
      const size_t end = std::min(s.size(), t + static_cast<size_t>(window) + 1);
      for (size_t t2 = t + 1; t2 < end; ++t2) {
        if (s[t] != s[t2]) edges.push_back(CanonicalEdge(s[t], s[t2]));
      }
    }
  }
  return TransitionGraph(num_items, edges);
}

std::vector<int> KHopNeighbors(const TransitionGraph& graph, int v, int k,
                               int cap, uint64_t seed) {
  if (k < 1) throw ArgumentError("k must be >= 1");
  if (v < 0 || v >= graph.num_nodes()) throw ArgumentError("node out of range");
  std::vector<int> depth(graph.num_nodes(), -1);
  std::vector<int> found;
  std::queue<int> frontier;
  depth[v] = 0;
  frontier.push(v);
  while (!frontier.empty()) {
    const int x = frontier.front();
    frontier.pop();
    if (depth[x] == k) continue;
    for (int y : graph.Neighbors(x)) {
      if (depth[y] >= 0) continue;
      depth[y] = depth[x] + 1;
      found.push_back(y);
      frontier.push(y);
    }
  }
  std::sort(found.begin(), found.end());
  if (static_cast<int>(found.size()) > cap) {
    Rng rng(DeriveSeed(seed, 0x6b686f70ULL, static_cast<uint64_t>(v)));
    for (int i = 0; i < cap; ++i) {
      const auto j = i + UniformIndex(rng, static_cast<int64_t>(found.size()) - i);
      std::swap(found[i], found[j]);
    }
    found.resize(cap);
    std::sort(found.begin(), found.end());
  }
  return found;
}

MaskedGraphView::MaskedGraphView(const TransitionGraph& base,
                                 std::set<Edge> removed)
    : base_(&base), removed_(std::move(removed)) {}

bool MaskedGraphView::HasEdge(int u, int v) const {
  return base_->HasEdge(u, v) && !removed_.contains(CanonicalEdge(u, v));
}

std::vector<int> MaskedGraphView::Neighbors(int v) const {
  std::vector<int> out;
  for (int w : base_->Neighbors(v)) {
    if (!removed_.contains(CanonicalEdge(v, w))) out.push_back(w);
  }
  return out;
}

int MaskedGraphView::Degree(int v) const {
  if (removed_.empty()) return base_->Degree(v);
  return static_cast<int>(Neighbors(v).size());
}

std::vector<Edge> MaskedGraphView::Edges() const {
  std::vector<Edge> out;
  out.reserve(base_->edges().size() - removed_.size());
  for (const auto& e : base_->edges()) {
    if (!removed_.contains(e)) out.push_back(e);
  }
  return out;
}

MaskedGraphView RemoveEdges(const TransitionGraph& graph,
                            std::span<const Edge> edges) {
  std::set<Edge> removed;
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= graph.num_nodes() || b >= graph.num_nodes() ||
        !graph.HasEdge(a, b)) {
      throw ArgumentError("cannot remove edge (" + std::to_string(a) + "," +
                          std::to_string(b) + "): not in graph");
    }
    removed.insert(CanonicalEdge(a, b));
  }
  return MaskedGraphView(graph, std::move(removed));
}

void WriteEdgeList(std::ostream& out, const TransitionGraph& graph) {
  for (const auto& [u, v] : graph.edges()) out << u << ' ' << v << '\n';
}

}  // namespace maerec
