// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <span>
#include <string>
#include <vector>

#include "rtdnet/matrix.hpp"

namespace rtdnet {

// Batch-normalization layer state: trainable affine transform plus running
// statistics updated with a fixed momentum during training forwards.
struct BatchNormState {
  Param gamma, beta;
  std::vector<double> running_mean, running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;

  BatchNormState() = default;
  BatchNormState(const std::string& prefix, int width)
      : gamma(prefix + ".gamma", Matrix(1, width)),
        beta(prefix + ".beta", Matrix(1, width)),
        running_mean(width, 0.0),
        running_var(width, 1.0) {
    gamma.value.fill(1.0);
  }

  int width() const { return static_cast<int>(running_mean.size()); }
};

// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

// Reverse-mode automatic differentiation over dense matrices.
//
// A Tape owns the computation graph of one evaluation. Leaves bound to
// Param objects receive gradients in Param::grad on backward(); the caller
// zeroes those between optimizer steps, and repeated backward() calls
// accumulate. reset() clears the graph but recycles node storage, so a tape
// reused across minibatch steps settles into a steady state with no
// allocation.
//
// Domain violations (log or reciprocal of a non-positive value, exp of an
// argument that would overflow) raise DomainError instead of producing
// NaN/Inf silently. A tape is single-threaded; distinct tapes may run
// concurrently over shared immutable inputs.
class Tape {
 public:
  Var leaf(Param& p);
  Var constant(Matrix m);
  Var constant(double x) { return constant(Matrix::scalar(x)); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var add_rowvec(Var x, Var row);  // broadcast a 1 x c row over all rows
  Var sub_colvec(Var x, Var col);  // broadcast an r x 1 column over all columns

  Var scale(Var x, double a);
  Var add_const(Var x, double c);
  Var neg(Var x) { return scale(x, -1.0); }

  Var tanh(Var x);
  Var exp(Var x);
  Var log(Var x);
  Var log1p(Var x);
  Var softplus(Var x);
  Var square(Var x);
  Var sqrt(Var x);        // requires strictly positive input
  Var reciprocal(Var x);  // requires strictly positive input
  Var erf(Var x);
  Var log_phi(Var x);  // log of the standard normal CDF, elementwise
  Var clamp_min(Var x, double lo);
  Var clamp_max(Var x, double hi);

  Var sum(Var x);                        // 1 x 1
  Var mean(Var x);                       // 1 x 1
  Var row_mean(Var x);                   // r x 1
  Var col_mean(Var x);                   // 1 x c
  Var col(Var x, int j);                 // r x 1 slice
  Var hcat(std::span<const Var> cols);   // concat r x 1 columns

  Var batch_norm(Var x, BatchNormState& state, bool training, bool update_stats = true);

  const Matrix& value(Var v) const;
  double scalar_value(Var v) const;

  // Backpropagates from a scalar root into every reachable Param. Node-local
  // gradients are scratch (re-zeroed per call); Param::grad accumulates.
  void backward(Var root);

  void reset();
  int size() const { return size_; }

 private:
  enum class Op {
    kLeaf, kConst, kMatmul, kAdd, kSub, kMul, kAddRow, kSubCol, kScale,
    kAddConst, kTanh, kExp, kLog, kLog1p, kSoftplus, kSquare, kSqrt, kRecip,
    kErf, kLogPhi, kClampMin, kClampMax, kSum, kMean, kRowMean, kColMean,
    kColSlice, kHcat, kBnTrain, kBnEval,
  };

  struct Node {
    int self = -1;
    Op op = Op::kConst;
    Matrix val;
    Matrix grad;
    std::vector<int> parents;
    Param* param = nullptr;
    BatchNormState* bn = nullptr;
    Matrix saved0;  // op-specific (e.g. batch-norm xhat)
    Matrix saved1;  // op-specific (e.g. batch-norm 1/sqrt(var+eps))
    double d0 = 0.0;
    int i0 = 0;
  };

  Node& fresh(Op op, int rows, int cols);
  Var wrap(const Node& n) const;
  const Node& at(Var v) const;
  Node& at(Var v);
  Var unary(Op op, Var x, double d0 = 0.0);
  Var binary(Op op, Var a, Var b);
  void backward_node(Node& n);

  std::deque<Node> nodes_;
  int size_ = 0;
  Matrix scratch_;
};

}  // namespace rtdnet
