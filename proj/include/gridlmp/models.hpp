// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gridlmp/grid.hpp"
#include "gridlmp/optim.hpp"
#include "gridlmp/tape.hpp"

namespace gridlmp {

// Chebyshev filter bank acting on multi-channel node signals.  theta is the
// K x c_in x c_out coefficient array packed as a (K * c_in) x c_out matrix
// with row k * c_in + c; bias is 1 x c_out.
struct ChebLayer {
  int order = 1;  // K, number of Chebyshev terms
  Matrix theta;
  Matrix bias;
};

struct GcnLayer {
  Matrix weight;  // c_in x c_out
  Matrix bias;    // 1 x c_out
};

// [T_0(l_tilde) x, ..., T_{K-1}(l_tilde) x] by the three-term recursion;
// each entry is N x channels.  Never eigendecomposes.
std::vector<Matrix> cheb_basis(const Gso& gso, const MatrixRef& x, int order);

// out[:, o] = sum_k sum_c T_k(l_tilde) x[:, c] theta[k, c, o] + bias[o]
Matrix cheb_layer_forward(const ChebLayer& layer, const Gso& gso,
                          const MatrixRef& x);

// Degree-normalized first-order propagation operator
// D^{-1/2} (L + I) D^{-1/2} with D the row sums of L + I.
Matrix gcn1_normalized_operator(const Matrix& l);

// out = a_hat x W + bias where a_hat is the normalized operator of gso.l
Matrix gcn1_layer_forward(const GcnLayer& layer, const Gso& gso,
                          const MatrixRef& x);

enum class ModelKind { kCheb, kGcn1, kFcnn };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// Architecture description; defaults give Cheb/GCN layers 2 -> 32 -> 1 with
// K = 3 and the FCNN 2N -> 256 -> 256 -> N, relu between layers.
struct ModelSpec {
  ModelKind kind = ModelKind::kCheb;
  std::vector<Index> hidden;  // empty = kind default
  int order = 3;              // cheb only

  std::vector<Index> hidden_or_default() const {
    if (!hidden.empty()) return hidden;
    return kind == ModelKind::kFcnn ? std::vector<Index>{256, 256}
                                    : std::vector<Index>{32};
  }
};

// A trainable model over a fixed grid.  Graph kinds bake the shift operator
// (l_tilde or the normalized first-order operator) at construction; the FCNN
// consumes the flattened [ |V| ; theta ] vector.  Construction is seeded and
// deterministic.  Inference (predict) is pure and thread-safe; training
// mutates parameters through the tape/optimizer.
class Model {
 public:
  Model(const ModelSpec& spec, const Gso* gso, Index n_nodes,
        std::uint64_t seed);

  // Records the batched forward pass on the tape.  For graph kinds the input
  // is (N * batch) x 2 in the tape's fused-conv layout; for the FCNN it is
  // batch x 2N.  Output: (N * batch) x 1 or batch x N respectively.
  nn::Var forward(nn::Tape& tape, nn::Var input, Index batch);

  // Single-sample inference: N x 2 signal -> N predictions.
  Vector predict(const MatrixRef& signal) const;

  // Stacks per-sample N x 2 signals (or N targets) into the batch layout the
  // model consumes.
  Matrix stack_inputs(const std::vector<Matrix>& signals) const;
  Matrix stack_targets(const std::vector<Vector>& targets) const;

  std::vector<nn::Tensor*> parameters();
  std::map<std::string, nn::Tensor*> named_parameters();
  Index parameter_count() const;

  void load_state(const std::map<std::string, Matrix>& arrays);
  std::map<std::string, Matrix> state() const;

  ModelKind kind() const { return spec_.kind; }
  const ModelSpec& spec() const { return spec_; }
  Index n_nodes() const { return n_; }

 private:
  struct LayerParams {
    nn::Tensor weight;
    nn::Tensor bias;
  };

  ModelSpec spec_;
  Index n_ = 0;
  Matrix op_;  // l_tilde (cheb) or normalized operator (gcn1); empty for fcnn
  std::vector<LayerParams> layers_;
};

// Throws MissingGso when a graph kind is requested without an operator.
Model build_model(const ModelSpec& spec, const Gso* gso, Index n_nodes,
                  std::uint64_t seed);

}  // namespace gridlmp
