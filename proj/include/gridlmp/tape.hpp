// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#pragma once

#include <cstdint>
#include <vector>

#include "gridlmp/errors.hpp"
#include "gridlmp/types.hpp"

namespace gridlmp::nn {

// Dense 2-D value with a gradient buffer of the same shape.  Used both for
// trainable parameters (registered on a tape via leaf()) and as the backing
// type of checkpoints.
struct Tensor {
  Matrix value;
  Matrix grad;

  Tensor() = default;
  explicit Tensor(Matrix v) : value(std::move(v)) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }
  void zero_grad() { grad.setZero(); }
};

class Tape;

// Handle to a node recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  Index node = -1;

  const Matrix& value() const;
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
};

// Reverse-mode tape over dense matrices.  Nodes are recorded in topological
// order by construction; backward() walks them once in reverse and then marks
// the tape consumed, so a second backward without re-recording throws.
//
// Elementwise binary ops broadcast over the leading axis only: the right
// operand may be a single row that is replicated across the rows of the left.
//
// Besides the elementwise/matmul primitives the tape records two fused graph
// convolutions.  Batched graph signals are stored (N*S) x C with sample s of
// channel c in rows [s*N, (s+1)*N) of column c, which keeps every per-channel
// N x S slice a contiguous block that the recursions can view without copies.
class Tape {
 public:
  // Leaves: constants are never differentiated; leaf() ties a node to
  // external storage whose .grad receives d loss / d value after backward.
  Var constant(Matrix value);
  Var leaf(Tensor& tensor);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var relu(Var a);
  Var scale(Var a, double factor);
  // mean over all elements of the squared entries; 1 x 1 result
  Var mean_square(Var a);
  Var mse(Var pred, Var target) { return mean_square(sub(pred, target)); }

  // y = sum_k T_k(l_tilde) x theta_k + bias over a batch of `batch` samples;
  // x is (N*batch) x c_in, theta (order*c_in) x c_out with row k*c_in + c,
  // bias 1 x c_out.  T_k follows the three-term recursion; no
  // eigendecomposition is involved.
  Var cheb_conv(const Matrix& l_tilde, Var x, Var theta, Var bias, int order,
                Index batch);
  // y = a_hat x w + bias over a batch, same layout conventions.
  Var gcn_conv(const Matrix& a_hat, Var x, Var w, Var bias, Index batch);

  // Seeds grad(loss) = 1 and accumulates gradients into every reachable leaf's
  // external Tensor::grad (overwriting it).  loss must be 1 x 1.
  void backward(Var loss);

  Index size() const { return static_cast<Index>(nodes_.size()); }
  bool consumed() const { return consumed_; }
  // Forgets all nodes so the tape can record a fresh computation.
  void reset();

 private:
  friend struct Var;

  enum class Op {
    kConstant,
    kLeaf,
    kMatmul,
    kAdd,
    kHadamard,
    kRelu,
    kScale,
    kMeanSquare,
    kChebConv,
    kGcnConv,
  };

  struct Node {
    Op op;
    Matrix value;
    Matrix grad;            // allocated lazily during backward
    Index parent[3] = {-1, -1, -1};
    bool needs_grad = false;
    double factor = 0.0;    // kScale
    int order = 0;          // kChebConv
    Index batch = 0;        // fused convs
    Matrix features;        // fused convs: cached basis/propagated features
    Matrix gso;             // fused convs: operator copy
    Tensor* external = nullptr;  // kLeaf
  };

  Var push(Node node);
  Node& at(Index i) { return nodes_[static_cast<size_t>(i)]; }
  Matrix& grad_buffer(Index i);
  void check_same_tape(Var v) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Uniform Glorot range +-sqrt(6 / (fan_in + fan_out)) from a seeded engine.
Matrix glorot_uniform(Index rows, Index cols, Index fan_in, Index fan_out,
                      std::uint64_t seed);

// Forward-only fused-conv evaluations shared by the tape and inference paths;
// when features_out is given it receives the basis / propagated features.
Matrix cheb_conv_forward(const Matrix& l_tilde, const Matrix& x,
                         const Matrix& theta, const Matrix& bias, int order,
                         Index batch, Matrix* features_out = nullptr);
Matrix gcn_conv_forward(const Matrix& a_hat, const Matrix& x, const Matrix& w,
                        const Matrix& bias, Index batch,
                        Matrix* features_out = nullptr);

}  // namespace gridlmp::nn
