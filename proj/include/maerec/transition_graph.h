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
#include <limits>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "maerec/corpus.h"

namespace maerec {

// Undirected edge stored as (min, max).
using Edge = std::pair<int, int>;

inline Edge CanonicalEdge(int u, int v) {
  return u < v ? Edge{u, v} : Edge{v, u};
}

// Global item-item transition graph: undirected, deduplicated, no self-loops.
class TransitionGraph {
 public:
  TransitionGraph() = default;
  // `edges` must already be canonical; duplicates and self-loops are dropped.
  TransitionGraph(int num_nodes, std::span<const Edge> edges);

  int num_nodes() const { return static_cast<int>(adjacency_.size()); }
  int64_t num_edges() const { return static_cast<int64_t>(edges_.size()); }
  // Sorted neighbor list.
  std::span<const int> Neighbors(int v) const { return adjacency_[v]; }
  int Degree(int v) const { return static_cast<int>(adjacency_[v].size()); }
  bool HasEdge(int u, int v) const;
  // Sorted canonical edge list.
  const std::vector<Edge>& edges() const { return edges_; }

 private:
  std::vector<std::vector<int>> adjacency_;
  std::vector<Edge> edges_;
};

// Links every pair of items at distance 1..window within a sequence.
TransitionGraph BuildGraph(std::span<const UserSequence> sequences,
                           int num_items, int window);

inline constexpr int kNoCap = std::numeric_limits<int>::max();

// Nodes at hop distance 1..k from v. When more than `cap` exist, a uniform
// sample of `cap` of them (deterministic in seed). Result is sorted.
std::vector<int> KHopNeighbors(const TransitionGraph& graph, int v, int k,
                               int cap, uint64_t seed);

// The base graph with a set of edges hidden. Holds a reference to the base,
// which must outlive the view.
class MaskedGraphView {
 public:
  explicit MaskedGraphView(const TransitionGraph& base) : base_(&base) {}
  MaskedGraphView(const TransitionGraph& base, std::set<Edge> removed);

  const TransitionGraph& base() const { return *base_; }
  const std::set<Edge>& removed_edges() const { return removed_; }
  int num_nodes() const { return base_->num_nodes(); }
  int64_t num_edges() const {
    return base_->num_edges() - static_cast<int64_t>(removed_.size());
  }
  bool HasEdge(int u, int v) const;
  std::vector<int> Neighbors(int v) const;
  int Degree(int v) const;
  std::vector<Edge> Edges() const;

 private:
  const TransitionGraph* base_;
  std::set<Edge> removed_;
};

// Throws ArgumentError if any edge is absent from the graph.
MaskedGraphView RemoveEdges(const TransitionGraph& graph,
                            std::span<const Edge> edges);

// `u v` per line, canonical and sorted.
void WriteEdgeList(std::ostream& out, const TransitionGraph& graph);

}  // namespace maerec
