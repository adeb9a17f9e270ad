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

#include "maerec/autograd.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace maerec::ag {

const Matrix& Var::value() const { return tape_->Value(id_); }

double Var::scalar() const {
  const auto& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw std::logic_error("scalar() on a non-1x1 Var");
  }
  return v(0, 0);
}

Var Tape::Constant(Matrix value) {
  nodes_.push_back({std::move(value), Matrix(), false, nullptr});
  return Var(this, size() - 1);
}

Var Tape::Leaf(Matrix value) {
  nodes_.push_back({std::move(value), Matrix(), true, nullptr});
  return Var(this, size() - 1);
}

Var Tape::Record(Matrix value, std::initializer_list<Var> inputs,
                 BackwardFn fn) {
  return Record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Tape::Record(Matrix value, std::span<const Var> inputs, BackwardFn fn) {
  bool needs = false;
  for (const auto& in : inputs) needs = needs || nodes_[in.id()].requires_grad;
  nodes_.push_back({std::move(value), Matrix(), needs,
                    needs ? std::move(fn) : BackwardFn()});
  return Var(this, size() - 1);
}

Matrix& Tape::GradRef(int id) {
  auto& node = nodes_[id];
  if (node.grad.size() == 0) {
    node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  }
  return node.grad;
}

Matrix Tape::Grad(const Var& v) const {
  const auto& node = nodes_[v.id()];
  if (node.grad.size() == 0) {
    return Matrix::Zero(node.value.rows(), node.value.cols());
  }
  return node.grad;
}

void Tape::Backward(const Var& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw std::logic_error("Backward() requires a 1x1 loss");
  }
  GradRef(loss.id())(0, 0) += 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    auto& node = nodes_[id];
    if (node.backward && node.grad.size() != 0) node.backward(*this, id);
  }
}

namespace {

void CheckSameShape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

void Accumulate(Tape& t, const Var& v, const Matrix& g) {
  if (t.NeedsGrad(v.id())) t.GradRef(v.id()) += g;
}

}  // namespace

Var Add(const Var& a, const Var& b) {
  CheckSameShape(a, b, "Add");
  return a.tape()->Record(a.value() + b.value(), {a, b},
                          [a, b](Tape& t, int self) {
                            Accumulate(t, a, t.OutGrad(self));
                            Accumulate(t, b, t.OutGrad(self));
                          });
}

Var Sub(const Var& a, const Var& b) {
  CheckSameShape(a, b, "Sub");
  return a.tape()->Record(a.value() - b.value(), {a, b},
                          [a, b](Tape& t, int self) {
                            Accumulate(t, a, t.OutGrad(self));
                            Accumulate(t, b, -t.OutGrad(self));
                          });
}

Var CwiseMul(const Var& a, const Var& b) {
  CheckSameShape(a, b, "CwiseMul");
  return a.tape()->Record(
      a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, int self) {
        const Matrix& g = t.OutGrad(self);
        if (t.NeedsGrad(a.id())) t.GradRef(a.id()) += g.cwiseProduct(b.value());
        if (t.NeedsGrad(b.id())) t.GradRef(b.id()) += g.cwiseProduct(a.value());
      });
}

Var Scale(const Var& a, double factor) {
  return a.tape()->Record(a.value() * factor, {a},
                          [a, factor](Tape& t, int self) {
                            Accumulate(t, a, t.OutGrad(self) * factor);
                          });
}

Var AddScalar(const Var& a, double c) {
  return a.tape()->Record(a.value().array() + c, {a}, [a](Tape& t, int self) {
    Accumulate(t, a, t.OutGrad(self));
  });
}

Var AddN(std::span<const Var> terms) {
  if (terms.empty()) throw std::invalid_argument("AddN: no terms");
  Matrix sum = terms[0].value();
  for (size_t i = 1; i < terms.size(); ++i) {
    CheckSameShape(terms[0], terms[i], "AddN");
    sum += terms[i].value();
  }
  std::vector<Var> inputs(terms.begin(), terms.end());
  return terms[0].tape()->Record(std::move(sum), inputs,
                                 [inputs](Tape& t, int self) {
                                   for (const auto& in : inputs) {
                                     Accumulate(t, in, t.OutGrad(self));
                                   }
                                 });
}

Var AddRowVector(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw std::invalid_argument("AddRowVector: shape mismatch");
  }
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return a.tape()->Record(std::move(out), {a, row},
                          [a, row](Tape& t, int self) {
                            const Matrix& g = t.OutGrad(self);
                            Accumulate(t, a, g);
                            if (t.NeedsGrad(row.id())) {
                              t.GradRef(row.id()) += g.colwise().sum();
                            }
                          });
}

Var MatMul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("MatMul: shape mismatch");
  return a.tape()->Record(a.value() * b.value(), {a, b},
                          [a, b](Tape& t, int self) {
                            const Matrix& g = t.OutGrad(self);
                            if (t.NeedsGrad(a.id())) {
                              t.GradRef(a.id()).noalias() += g * b.value().transpose();
                            }
                            if (t.NeedsGrad(b.id())) {
                              t.GradRef(b.id()).noalias() += a.value().transpose() * g;
                            }
                          });
}

Var Relu(const Var& a) {
  return a.tape()->Record(a.value().cwiseMax(0.0), {a}, [a](Tape& t, int self) {
    const Matrix& g = t.OutGrad(self);
    Accumulate(t, a, (a.value().array() > 0.0).select(g, 0.0).matrix());
  });
}

Var GatherRows(const Var& table, std::span<const int> indices) {
  const auto& tv = table.value();
  Matrix out(static_cast<Eigen::Index>(indices.size()), tv.cols());
  for (size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= tv.rows()) {
      throw std::out_of_range("GatherRows: index out of range");
    }
    out.row(i) = tv.row(indices[i]);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return table.tape()->Record(std::move(out), {table},
                              [table, idx](Tape& t, int self) {
                                const Matrix& g = t.OutGrad(self);
                                Matrix& dst = t.GradRef(table.id());
                                for (size_t i = 0; i < idx.size(); ++i) {
                                  dst.row(idx[i]) += g.row(i);
                                }
                              });
}

Var SparseMatMul(std::shared_ptr<const SparseMatrix> a, const Var& x) {
  if (a->cols() != x.rows()) {
    throw std::invalid_argument("SparseMatMul: shape mismatch");
  }
  Matrix out = (*a) * x.value();
  return x.tape()->Record(std::move(out), {x}, [a, x](Tape& t, int self) {
    t.GradRef(x.id()).noalias() += a->transpose() * t.OutGrad(self);
  });
}

Var ConcatCols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("ConcatCols: no parts");
  const auto rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("ConcatCols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape()->Record(std::move(out), inputs,
                                 [inputs](Tape& t, int self) {
                                   const Matrix& g = t.OutGrad(self);
                                   Eigen::Index at = 0;
                                   for (const auto& p : inputs) {
                                     if (t.NeedsGrad(p.id())) {
                                       t.GradRef(p.id()) += g.middleCols(at, p.cols());
                                     }
                                     at += p.cols();
                                   }
                                 });
}

Var Sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->Record(std::move(out), {a}, [a](Tape& t, int self) {
    t.GradRef(a.id()).array() += t.OutGrad(self)(0, 0);
  });
}

Var Mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return Scale(Sum(a), n > 0 ? 1.0 / n : 0.0);
}

Var SquaredNorm(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  return a.tape()->Record(std::move(out), {a}, [a](Tape& t, int self) {
    t.GradRef(a.id()) += 2.0 * t.OutGrad(self)(0, 0) * a.value();
  });
}

Var RowDot(const Var& a, const Var& b) {
  CheckSameShape(a, b, "RowDot");
  Matrix out = a.value().cwiseProduct(b.value()).rowwise().sum();
  return a.tape()->Record(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.OutGrad(self);
    if (t.NeedsGrad(a.id())) {
      t.GradRef(a.id()).array() += b.value().array().colwise() * g.col(0).array();
    }
    if (t.NeedsGrad(b.id())) {
      t.GradRef(b.id()).array() += a.value().array().colwise() * g.col(0).array();
    }
  });
}

Var LogSigmoidClipped(const Var& x, double lo, double hi) {
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), xv.cols());
  Matrix slope(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < xv.size(); ++i) {
    const double z = xv(i);
    // Stable sigmoid.
    const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z))
                            : std::exp(z) / (1.0 + std::exp(z));
    if (s < lo) {
      out(i) = std::log(lo);
      slope(i) = 0.0;
    } else if (s > hi) {
      out(i) = std::log(hi);
      slope(i) = 0.0;
    } else {
      out(i) = z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
      slope(i) = 1.0 - s;
    }
  }
  return x.tape()->Record(std::move(out), {x},
                          [x, slope = std::move(slope)](Tape& t, int self) {
                            t.GradRef(x.id()) += t.OutGrad(self).cwiseProduct(slope);
                          });
}

Var RowNormalize(const Var& a, double floor) {
  const Matrix& av = a.value();
  Eigen::VectorXd norms = av.rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) norms(i) = std::max(norms(i), floor);
  Matrix out = av.array().colwise() / norms.array();
  // Below the floor the map is linear (x / floor).
  Eigen::VectorXd clamped(norms.size());
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    clamped(i) = av.row(i).norm() < floor ? 1.0 : 0.0;
  }
  return a.tape()->Record(
      out, {a}, [a, out, norms, clamped](Tape& t, int self) {
        const Matrix& g = t.OutGrad(self);
        Matrix& dst = t.GradRef(a.id());
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
          if (clamped(i) > 0) {
            dst.row(i) += g.row(i) / norms(i);
          } else {
            const double proj = g.row(i).dot(out.row(i));
            dst.row(i) += (g.row(i) - proj * out.row(i)) / norms(i);
          }
        }
      });
}

Var LayerNormRows(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Matrix& xv = x.value();
  const auto n = xv.rows();
  const auto m = xv.cols();
  if (gain.rows() != 1 || gain.cols() != m || bias.rows() != 1 || bias.cols() != m) {
    throw std::invalid_argument("LayerNormRows: gain/bias shape mismatch");
  }
  Matrix xhat(n, m);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = xv.row(i).mean();
    const double var = (xv.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mu) * inv_std(i);
  }
  Matrix out = xhat.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  return x.tape()->Record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat, inv_std](Tape& t, int self) {
        const Matrix& g = t.OutGrad(self);
        if (t.NeedsGrad(gain.id())) {
          t.GradRef(gain.id()) += g.cwiseProduct(xhat).colwise().sum();
        }
        if (t.NeedsGrad(bias.id())) t.GradRef(bias.id()) += g.colwise().sum();
        if (t.NeedsGrad(x.id())) {
          Matrix dxhat = g.array().rowwise() * gain.value().row(0).array();
          Matrix& dst = t.GradRef(x.id());
          const double m = static_cast<double>(g.cols());
          for (Eigen::Index i = 0; i < g.rows(); ++i) {
            const double mean_d = dxhat.row(i).mean();
            const double mean_dx = dxhat.row(i).dot(xhat.row(i)) / m;
            dst.row(i) += inv_std(i) * (dxhat.row(i).array() - mean_d -
                                        xhat.row(i).array() * mean_dx)
                                           .matrix();
          }
        }
      });
}

Var Dropout(const Var& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  const double keep = 1.0 - rate;
  Matrix mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask(i) = UniformOpen(rng) < keep ? 1.0 / keep : 0.0;
  }
  Matrix out = x.value().cwiseProduct(mask);
  return x.tape()->Record(std::move(out), {x},
                          [x, mask = std::move(mask)](Tape& t, int self) {
                            t.GradRef(x.id()) += t.OutGrad(self).cwiseProduct(mask);
                          });
}

Var GroupedSoftmaxNll(const Var& logits, std::span<const int> offsets) {
  if (logits.cols() != 1) throw std::invalid_argument("GroupedSoftmaxNll: need n x 1");
  const int groups = static_cast<int>(offsets.size()) - 1;
  if (groups <= 0) throw std::invalid_argument("GroupedSoftmaxNll: no groups");
  const Matrix& z = logits.value();
  Matrix probs(z.rows(), 1);
  double total = 0.0;
  for (int gi = 0; gi < groups; ++gi) {
    const int b = offsets[gi];
    const int e = offsets[gi + 1];
    const double mx = z.col(0).segment(b, e - b).maxCoeff();
    double denom = 0.0;
    for (int i = b; i < e; ++i) denom += std::exp(z(i, 0) - mx);
    const double lse = mx + std::log(denom);
    total += lse - z(b, 0);
    for (int i = b; i < e; ++i) probs(i, 0) = std::exp(z(i, 0) - lse);
  }
  Matrix out(1, 1);
  out(0, 0) = total / groups;
  std::vector<int> off(offsets.begin(), offsets.end());
  return logits.tape()->Record(
      std::move(out), {logits},
      [logits, probs = std::move(probs), off, groups](Tape& t, int self) {
        const double g = t.OutGrad(self)(0, 0) / groups;
        Matrix& dst = t.GradRef(logits.id());
        for (int gi = 0; gi < groups; ++gi) {
          for (int i = off[gi]; i < off[gi + 1]; ++i) dst(i, 0) += g * probs(i, 0);
          dst(off[gi], 0) -= g;
        }
      });
}

Var CausalSegmentAttention(const Var& q, const Var& k, const Var& v,
                           std::span<const int> offsets, int heads,
                           double dropout, Rng* rng,
                           std::vector<Matrix>* weights_out) {
  CheckSameShape(q, k, "CausalSegmentAttention");
  CheckSameShape(q, v, "CausalSegmentAttention");
  const auto d = q.cols();
  if (heads <= 0 || d % heads != 0) {
    throw std::invalid_argument("CausalSegmentAttention: d not divisible by heads");
  }
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const int segments = static_cast<int>(offsets.size()) - 1;
  const bool drop = dropout > 0.0 && rng != nullptr;
  const double keep = 1.0 - dropout;

  // Per (segment, head): softmax weights and the dropout-scaled weights.
  struct Cache {
    Matrix weights;
    Matrix mask;  // dropout scale per weight; empty without dropout
  };
  auto caches = std::make_shared<std::vector<Cache>>();
  caches->reserve(static_cast<size_t>(segments) * heads);

  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();
  Matrix out = Matrix::Zero(Q.rows(), d);
  for (int s = 0; s < segments; ++s) {
    const int b = offsets[s];
    const int n = offsets[s + 1] - b;
    for (int h = 0; h < heads; ++h) {
      Cache c;
      if (n == 0) {
        caches->push_back(std::move(c));
        continue;
      }
      Matrix scores = Q.block(b, h * dh, n, dh) * K.block(b, h * dh, n, dh).transpose();
      scores *= scale;
      c.weights = Matrix::Zero(n, n);
      for (int i = 0; i < n; ++i) {
        const double mx = scores.row(i).head(i + 1).maxCoeff();
        double denom = 0.0;
        for (int j = 0; j <= i; ++j) {
          c.weights(i, j) = std::exp(scores(i, j) - mx);
          denom += c.weights(i, j);
        }
        c.weights.row(i).head(i + 1) /= denom;
      }
      if (drop) {
        c.mask = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j <= i; ++j) {
            c.mask(i, j) = UniformOpen(*rng) < keep ? 1.0 / keep : 0.0;
          }
        }
        out.block(b, h * dh, n, dh) =
            c.weights.cwiseProduct(c.mask) * V.block(b, h * dh, n, dh);
      } else {
        out.block(b, h * dh, n, dh) = c.weights * V.block(b, h * dh, n, dh);
      }
      if (weights_out) weights_out->push_back(c.weights);
      caches->push_back(std::move(c));
    }
  }
  std::vector<int> off(offsets.begin(), offsets.end());
  return q.tape()->Record(
      std::move(out), {q, k, v},
      [q, k, v, off, heads, dh, scale, drop, caches](Tape& t, int self) {
        const Matrix& G = t.OutGrad(self);
        const Matrix& Q = q.value();
        const Matrix& K = k.value();
        const Matrix& V = v.value();
        Matrix dQ = Matrix::Zero(Q.rows(), Q.cols());
        Matrix dK = Matrix::Zero(Q.rows(), Q.cols());
        Matrix dV = Matrix::Zero(Q.rows(), Q.cols());
        const int segments = static_cast<int>(off.size()) - 1;
        for (int s = 0; s < segments; ++s) {
          const int b = off[s];
          const int n = off[s + 1] - b;
          if (n == 0) continue;
          for (int h = 0; h < heads; ++h) {
            const Cache& c = (*caches)[static_cast<size_t>(s) * heads + h];
            auto g = G.block(b, h * dh, n, dh);
            Matrix dA = g * V.block(b, h * dh, n, dh).transpose();
            if (drop) {
              dV.block(b, h * dh, n, dh).noalias() +=
                  c.weights.cwiseProduct(c.mask).transpose() * g;
              dA = dA.cwiseProduct(c.mask);
            } else {
              dV.block(b, h * dh, n, dh).noalias() += c.weights.transpose() * g;
            }
            Matrix dS = Matrix::Zero(n, n);
            for (int i = 0; i < n; ++i) {
              double dot = 0.0;
              for (int j = 0; j <= i; ++j) dot += dA(i, j) * c.weights(i, j);
              for (int j = 0; j <= i; ++j) dS(i, j) = c.weights(i, j) * (dA(i, j) - dot);
            }
            dS *= scale;
            dQ.block(b, h * dh, n, dh).noalias() += dS * K.block(b, h * dh, n, dh);
            dK.block(b, h * dh, n, dh).noalias() += dS.transpose() * Q.block(b, h * dh, n, dh);
          }
        }
        Accumulate(t, q, dQ);
        Accumulate(t, k, dK);
        Accumulate(t, v, dV);
      });
}

}  // namespace maerec::ag
