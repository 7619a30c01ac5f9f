// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#include "gridlmp/models.hpp"

#include <cmath>

namespace gridlmp {

std::vector<Matrix> cheb_basis(const Gso& gso, const MatrixRef& x, int order) {
  const Index n = gso.l_tilde.rows();
  if (order < 1) throw DimensionMismatch("cheb_basis: order must be >= 1");
  if (x.rows() != n) {
    throw DimensionMismatch("cheb_basis: signal has " + std::to_string(x.rows()) +
                            " nodes, operator has " + std::to_string(n));
  }
  std::vector<Matrix> basis;
  basis.reserve(static_cast<size_t>(order));
  basis.push_back(x);
  if (order > 1) basis.push_back(gso.l_tilde * x);
  for (int k = 2; k < order; ++k) {
    basis.push_back(2.0 * (gso.l_tilde * basis.back()) - basis[basis.size() - 2]);
  }
  return basis;
}

Matrix cheb_layer_forward(const ChebLayer& layer, const Gso& gso,
                          const MatrixRef& x) {
  if (layer.theta.rows() != static_cast<Index>(layer.order) * x.cols()) {
    throw DimensionMismatch("cheb_layer_forward: theta rows do not match K * c_in");
  }
  return nn::cheb_conv_forward(gso.l_tilde, x, layer.theta, layer.bias,
                               layer.order, 1);
}

Matrix gcn1_normalized_operator(const Matrix& l) {
  const Index n = l.rows();
  Matrix a = l + Matrix::Identity(n, n);
  Vector d = a.rowwise().sum();
  Vector d_inv_sqrt = d.array().sqrt().inverse();
  return d_inv_sqrt.asDiagonal() * a * d_inv_sqrt.asDiagonal();
}

Matrix gcn1_layer_forward(const GcnLayer& layer, const Gso& gso,
                          const MatrixRef& x) {
  if (layer.weight.rows() != x.cols()) {
    throw DimensionMismatch("gcn1_layer_forward: weight rows do not match channels");
  }
  return nn::gcn_conv_forward(gcn1_normalized_operator(gso.l), x, layer.weight,
                              layer.bias, 1);
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kCheb: return "cheb";
    case ModelKind::kGcn1: return "gcn1";
    case ModelKind::kFcnn: return "fcnn";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "cheb") return ModelKind::kCheb;
  if (name == "gcn1") return ModelKind::kGcn1;
  if (name == "fcnn") return ModelKind::kFcnn;
  throw Error("unknown model kind: " + name + " (expected cheb|gcn1|fcnn)");
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

Model::Model(const ModelSpec& spec, const Gso* gso, Index n_nodes,
             std::uint64_t seed)
    : spec_(spec), n_(n_nodes) {
  const bool graph = spec.kind != ModelKind::kFcnn;
  if (graph) {
    if (gso == nullptr) {
      throw MissingGso("graph models require a graph shift operator");
    }
    if (gso->l_tilde.rows() != n_nodes) {
      throw DimensionMismatch("gso dimension does not match node count");
    }
    op_ = spec.kind == ModelKind::kCheb ? gso->l_tilde
                                        : gcn1_normalized_operator(gso->l);
  }
  std::vector<Index> widths;
  if (graph) {
    widths.push_back(2);
    for (Index h : spec.hidden_or_default()) widths.push_back(h);
    widths.push_back(1);
  } else {
    widths.push_back(2 * n_nodes);
    for (Index h : spec.hidden_or_default()) widths.push_back(h);
    widths.push_back(n_nodes);
  }
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    const Index c_in = widths[i], c_out = widths[i + 1];
    LayerParams lp;
    if (spec.kind == ModelKind::kCheb) {
      const Index rows = static_cast<Index>(spec.order) * c_in;
      lp.weight = nn::Tensor(
          nn::glorot_uniform(rows, c_out, rows, c_out, mix_seed(seed, i)));
    } else {
      lp.weight = nn::Tensor(
          nn::glorot_uniform(c_in, c_out, c_in, c_out, mix_seed(seed, i)));
    }
    lp.bias = nn::Tensor(Matrix::Zero(1, c_out));
    layers_.push_back(std::move(lp));
  }
}

nn::Var Model::forward(nn::Tape& tape, nn::Var input, Index batch) {
  nn::Var h = input;
  for (size_t i = 0; i < layers_.size(); ++i) {
    LayerParams& lp = layers_[i];
    nn::Var w = tape.leaf(lp.weight);
    nn::Var b = tape.leaf(lp.bias);
    switch (spec_.kind) {
      case ModelKind::kCheb:
        h = tape.cheb_conv(op_, h, w, b, spec_.order, batch);
        break;
      case ModelKind::kGcn1:
        h = tape.gcn_conv(op_, h, w, b, batch);
        break;
      case ModelKind::kFcnn:
        h = tape.add(tape.matmul(h, w), b);
        break;
    }
    if (i + 1 < layers_.size()) h = tape.relu(h);
  }
  return h;
}

Vector Model::predict(const MatrixRef& signal) const {
  if (signal.rows() != n_ || signal.cols() != 2) {
    throw DimensionMismatch("predict expects an N x 2 signal");
  }
  Matrix h;
  if (spec_.kind == ModelKind::kFcnn) {
    h.resize(1, 2 * n_);
    h.row(0).head(n_) = signal.col(0).transpose();
    h.row(0).tail(n_) = signal.col(1).transpose();
  } else {
    h = signal;
  }
  for (size_t i = 0; i < layers_.size(); ++i) {
    const LayerParams& lp = layers_[i];
    switch (spec_.kind) {
      case ModelKind::kCheb:
        h = nn::cheb_conv_forward(op_, h, lp.weight.value, lp.bias.value,
                                  spec_.order, 1);
        break;
      case ModelKind::kGcn1:
        h = nn::gcn_conv_forward(op_, h, lp.weight.value, lp.bias.value, 1);
        break;
      case ModelKind::kFcnn:
        h = (h * lp.weight.value).rowwise() + lp.bias.value.row(0);
        break;
    }
    if (i + 1 < layers_.size()) h = h.cwiseMax(0.0);
  }
  if (spec_.kind == ModelKind::kFcnn) return h.row(0).transpose();
  return h.col(0);
}

Matrix Model::stack_inputs(const std::vector<Matrix>& signals) const {
  const Index s = static_cast<Index>(signals.size());
  if (spec_.kind == ModelKind::kFcnn) {
    Matrix out(s, 2 * n_);
    for (Index i = 0; i < s; ++i) {
      out.row(i).head(n_) = signals[static_cast<size_t>(i)].col(0).transpose();
      out.row(i).tail(n_) = signals[static_cast<size_t>(i)].col(1).transpose();
    }
    return out;
  }
  Matrix out(n_ * s, 2);
  for (Index i = 0; i < s; ++i) {
    out.block(i * n_, 0, n_, 2) = signals[static_cast<size_t>(i)];
  }
  return out;
}

Matrix Model::stack_targets(const std::vector<Vector>& targets) const {
  const Index s = static_cast<Index>(targets.size());
  if (spec_.kind == ModelKind::kFcnn) {
    Matrix out(s, n_);
    for (Index i = 0; i < s; ++i) {
      out.row(i) = targets[static_cast<size_t>(i)].transpose();
    }
    return out;
  }
  Matrix out(n_ * s, 1);
  for (Index i = 0; i < s; ++i) {
    out.block(i * n_, 0, n_, 1) = targets[static_cast<size_t>(i)];
  }
  return out;
}

std::vector<nn::Tensor*> Model::parameters() {
  std::vector<nn::Tensor*> out;
  for (LayerParams& lp : layers_) {
    out.push_back(&lp.weight);
    out.push_back(&lp.bias);
  }
  return out;
}

std::map<std::string, nn::Tensor*> Model::named_parameters() {
  std::map<std::string, nn::Tensor*> out;
  for (size_t i = 0; i < layers_.size(); ++i) {
    const std::string prefix = to_string(spec_.kind) + std::to_string(i);
    out[prefix + "/weight"] = &layers_[i].weight;
    out[prefix + "/bias"] = &layers_[i].bias;
  }
  return out;
}

Index Model::parameter_count() const {
  Index count = 0;
  for (const LayerParams& lp : layers_) {
    count += lp.weight.value.size() + lp.bias.value.size();
  }
  return count;
}

void Model::load_state(const std::map<std::string, Matrix>& arrays) {
  for (auto& [key, tensor] : named_parameters()) {
    auto it = arrays.find(key);
    if (it == arrays.end()) throw Error("checkpoint is missing key " + key);
    if (it->second.rows() != tensor->value.rows() ||
        it->second.cols() != tensor->value.cols()) {
      throw ShapeMismatch("checkpoint shape mismatch for " + key);
    }
    tensor->value = it->second;
  }
}

std::map<std::string, Matrix> Model::state() const {
  std::map<std::string, Matrix> out;
  auto& self = const_cast<Model&>(*this);
  for (auto& [key, tensor] : self.named_parameters()) out[key] = tensor->value;
  return out;
}

Model build_model(const ModelSpec& spec, const Gso* gso, Index n_nodes,
                  std::uint64_t seed) {
  return Model(spec, gso, n_nodes, seed);
}

}  // namespace gridlmp
