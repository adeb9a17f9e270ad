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

// Reverse-mode differentiation over dense Eigen matrices.
//
// A Tape records every operation eagerly (values are computed immediately)
// together with a closure that propagates the output gradient to its inputs.
// Backward() walks the record in reverse. Vars are cheap handles into the
// tape and are only valid while the tape is alive.

#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "maerec/random.h"

namespace maerec::ag {

using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  // Value of a 1x1 Var.
  double scalar() const;
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Value that does not receive gradient.
  Var Constant(Matrix value);
  // Leaf that receives gradient.
  Var Leaf(Matrix value);

  // Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be 1x1.
  void Backward(const Var& loss);

  // Accumulated gradient; a zero matrix of the right shape if none arrived.
  Matrix Grad(const Var& v) const;
  bool HasGrad(const Var& v) const { return nodes_[v.id()].grad.size() != 0; }

  int size() const { return static_cast<int>(nodes_.size()); }

  // --- for op implementations ---
  Var Record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var Record(Matrix value, std::span<const Var> inputs, BackwardFn fn);
  const Matrix& Value(int id) const { return nodes_[id].value; }
  const Matrix& OutGrad(int id) const { return nodes_[id].grad; }
  bool NeedsGrad(int id) const { return nodes_[id].requires_grad; }
  // Zero-initialized on first access.
  Matrix& GradRef(int id);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  // deque keeps references to earlier nodes valid while recording.
  std::deque<Node> nodes_;
};

// Elementwise arithmetic (shapes must match).
Var Add(const Var& a, const Var& b);
Var Sub(const Var& a, const Var& b);
Var CwiseMul(const Var& a, const Var& b);
Var Scale(const Var& a, double factor);
Var AddScalar(const Var& a, double c);
// Sum of any number of same-shaped Vars.
Var AddN(std::span<const Var> terms);

// a (n x m) plus a broadcast row vector (1 x m).
Var AddRowVector(const Var& a, const Var& row);
Var MatMul(const Var& a, const Var& b);
Var Relu(const Var& a);

// Rows table[indices[i]]; the backward pass scatter-adds.
Var GatherRows(const Var& table, std::span<const int> indices);
// A x with A a constant sparse matrix.
Var SparseMatMul(std::shared_ptr<const SparseMatrix> a, const Var& x);
Var ConcatCols(std::span<const Var> parts);

Var Sum(const Var& a);
Var Mean(const Var& a);
// Sum of squared entries, 1x1.
Var SquaredNorm(const Var& a);
// Row-wise dot products, n x 1.
Var RowDot(const Var& a, const Var& b);

// log(clamp(sigmoid(x), lo, hi)); zero gradient where the clamp is active.
Var LogSigmoidClipped(const Var& x, double lo, double hi);

// Each row divided by max(|row|, floor).
Var RowNormalize(const Var& a, double floor);

// Per-row standardization followed by gain/bias (both 1 x m).
Var LayerNormRows(const Var& x, const Var& gain, const Var& bias,
                  double eps = 1e-8);

// Inverted dropout. Identity when rate == 0.
Var Dropout(const Var& x, double rate, Rng& rng);

// logits is n x 1, split into consecutive groups by `offsets` (size G+1).
// Returns the mean over groups of -log softmax(group)[0].
Var GroupedSoftmaxNll(const Var& logits, std::span<const int> offsets);

// Multi-head causal self-attention over packed sequences. q, k, v are T x d
// where rows [offsets[s], offsets[s+1]) belong to sequence s; attention never
// crosses sequences and position i attends to j <= i only. Head h uses
// columns [h*d/H, (h+1)*d/H). Scores are scaled by 1/sqrt(d/H) and
// row-softmaxed; dropout (if any) is applied to the attention weights.
// If `weights_out` is non-null it receives the post-softmax, pre-dropout
// weight matrix for every (sequence, head), sequence-major.
Var CausalSegmentAttention(const Var& q, const Var& k, const Var& v,
                           std::span<const int> offsets, int heads,
                           double dropout, Rng* rng,
                           std::vector<Matrix>* weights_out = nullptr);

}  // namespace maerec::ag
