// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#include "gridlmp/tape.hpp"

#include <random>
#include <string>

namespace gridlmp::nn {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

using MapM = Eigen::Map<Matrix>;
using CMapM = Eigen::Map<const Matrix>;

}  // namespace

const Matrix& Var::value() const { return tape->nodes_[static_cast<size_t>(node)].value; }
const Matrix& Var::grad() const { return tape->nodes_[static_cast<size_t>(node)].grad; }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<Index>(nodes_.size()) - 1};
}

void Tape::check_same_tape(Var v) const {
  if (v.tape != this || v.node < 0 || v.node >= size()) {
    throw ShapeMismatch("variable does not belong to this tape");
  }
}

Matrix& Tape::grad_buffer(Index i) {
  Node& n = at(i);
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Tensor& tensor) {
  Node n;
  n.op = Op::kLeaf;
  n.value = tensor.value;
  n.needs_grad = true;
  n.external = &tensor;
  if (tensor.grad.rows() != tensor.value.rows() ||
      tensor.grad.cols() != tensor.value.cols()) {
    tensor.grad = Matrix::Zero(tensor.value.rows(), tensor.value.cols());
  } else {
    tensor.grad.setZero();
  }
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  if (a.cols() != b.rows()) {
    throw ShapeMismatch("matmul: " + shape_str(a.value()) + " * " + shape_str(b.value()));
  }
  Node n;
  n.op = Op::kMatmul;
  n.value.noalias() = a.value() * b.value();
  n.parent[0] = a.node;
  n.parent[1] = b.node;
  n.needs_grad = at(a.node).needs_grad || at(b.node).needs_grad;
  return push(std::move(n));
}

namespace {

// broadcasting over the leading axis only: b may be one row
bool binary_compatible(const Matrix& a, const Matrix& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return true;
  return b.rows() == 1 && b.cols() == a.cols();
}

}  // namespace

Var Tape::add(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  if (!binary_compatible(a.value(), b.value())) {
    throw ShapeMismatch("add: " + shape_str(a.value()) + " + " + shape_str(b.value()));
  }
  Node n;
  n.op = Op::kAdd;
  if (b.rows() == a.rows()) {
    n.value = a.value() + b.value();
  } else {
    n.value = a.value().rowwise() + b.value().row(0);
  }
  n.parent[0] = a.node;
  n.parent[1] = b.node;
  n.needs_grad = at(a.node).needs_grad || at(b.node).needs_grad;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var Tape::hadamard(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  if (!binary_compatible(a.value(), b.value())) {
    throw ShapeMismatch("hadamard: " + shape_str(a.value()) + " o " + shape_str(b.value()));
  }
  Node n;
  n.op = Op::kHadamard;
  if (b.rows() == a.rows()) {
    n.value = a.value().cwiseProduct(b.value());
  } else {
    n.value = a.value().array().rowwise() * b.value().row(0).array();
  }
  n.parent[0] = a.node;
  n.parent[1] = b.node;
  n.needs_grad = at(a.node).needs_grad || at(b.node).needs_grad;
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  check_same_tape(a);
  Node n;
  n.op = Op::kRelu;
  n.value = a.value().cwiseMax(0.0);
  n.parent[0] = a.node;
  n.needs_grad = at(a.node).needs_grad;
  return push(std::move(n));
}

Var Tape::scale(Var a, double factor) {
  check_same_tape(a);
  Node n;
  n.op = Op::kScale;
  n.value = factor * a.value();
  n.factor = factor;
  n.parent[0] = a.node;
  n.needs_grad = at(a.node).needs_grad;
  return push(std::move(n));
}

Var Tape::mean_square(Var a) {
  check_same_tape(a);
  Node n;
  n.op = Op::kMeanSquare;
  n.value = Matrix::Constant(1, 1, a.value().squaredNorm() /
                                     static_cast<double>(a.value().size()));
  n.parent[0] = a.node;
  n.needs_grad = at(a.node).needs_grad;
  return push(std::move(n));
}

Matrix cheb_conv_forward(const Matrix& l_tilde, const Matrix& x,
                         const Matrix& theta, const Matrix& bias, int order,
                         Index batch, Matrix* features_out) {
  const Index n = l_tilde.rows();
  const Index c_in = x.cols();
  const Index c_out = theta.cols();
  if (order < 1 || x.rows() != n * batch ||
      theta.rows() != static_cast<Index>(order) * c_in || bias.rows() != 1 ||
      bias.cols() != c_out || l_tilde.cols() != n) {
    throw ShapeMismatch("cheb_conv: inconsistent operand shapes");
  }
  // basis features: column k*c_in + c holds T_k applied to channel c
  Matrix local;
  Matrix& features = features_out ? *features_out : local;
  features.resize(n * batch, static_cast<Index>(order) * c_in);
  for (Index c = 0; c < c_in; ++c) {
    features.col(c) = x.col(c);
    if (order > 1) {
      CMapM x_c(x.col(c).data(), n, batch);
      MapM t1(features.col(c_in + c).data(), n, batch);
      t1.noalias() = l_tilde * x_c;
    }
    for (int k = 2; k < order; ++k) {
      CMapM tkm1(features.col((k - 1) * c_in + c).data(), n, batch);
      CMapM tkm2(features.col((k - 2) * c_in + c).data(), n, batch);
      MapM tk(features.col(k * c_in + c).data(), n, batch);
      tk.noalias() = 2.0 * (l_tilde * tkm1);
      tk -= tkm2;
    }
  }
  Matrix out;
  out.noalias() = features * theta;
  out.rowwise() += bias.row(0);
  return out;
}

Matrix gcn_conv_forward(const Matrix& a_hat, const Matrix& x, const Matrix& w,
                        const Matrix& bias, Index batch, Matrix* features_out) {
  const Index n = a_hat.rows();
  const Index c_in = x.cols();
  const Index c_out = w.cols();
  if (x.rows() != n * batch || w.rows() != c_in || bias.rows() != 1 ||
      bias.cols() != c_out || a_hat.cols() != n) {
    throw ShapeMismatch("gcn_conv: inconsistent operand shapes");
  }
  Matrix local;
  Matrix& features = features_out ? *features_out : local;
  features.resize(n * batch, c_in);
  for (Index c = 0; c < c_in; ++c) {
    CMapM x_c(x.col(c).data(), n, batch);
    MapM g_c(features.col(c).data(), n, batch);
    g_c.noalias() = a_hat * x_c;
  }
  Matrix out;
  out.noalias() = features * w;
  out.rowwise() += bias.row(0);
  return out;
}

Var Tape::cheb_conv(const Matrix& l_tilde, Var x, Var theta, Var bias,
                    int order, Index batch) {
  check_same_tape(x);
  check_same_tape(theta);
  check_same_tape(bias);
  Node nd;
  nd.op = Op::kChebConv;
  nd.order = order;
  nd.batch = batch;
  nd.gso = l_tilde;
  nd.value = cheb_conv_forward(l_tilde, x.value(), theta.value(), bias.value(),
                               order, batch, &nd.features);
  nd.parent[0] = x.node;
  nd.parent[1] = theta.node;
  nd.parent[2] = bias.node;
  nd.needs_grad = at(x.node).needs_grad || at(theta.node).needs_grad ||
                  at(bias.node).needs_grad;
  return push(std::move(nd));
}

Var Tape::gcn_conv(const Matrix& a_hat, Var x, Var w, Var bias, Index batch) {
  check_same_tape(x);
  check_same_tape(w);
  check_same_tape(bias);
  Node nd;
  nd.op = Op::kGcnConv;
  nd.batch = batch;
  nd.gso = a_hat;
  nd.value = gcn_conv_forward(a_hat, x.value(), w.value(), bias.value(), batch,
                              &nd.features);
  nd.parent[0] = x.node;
  nd.parent[1] = w.node;
  nd.parent[2] = bias.node;
  nd.needs_grad = at(x.node).needs_grad || at(w.node).needs_grad ||
                  at(bias.node).needs_grad;
  return push(std::move(nd));
}

void Tape::backward(Var loss) {
  check_same_tape(loss);
  if (consumed_) {
    throw TapeConsumed("backward already ran on this tape; record a fresh forward pass");
  }
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw NotScalarLoss("backward expects a 1x1 loss, got " + shape_str(loss.value()));
  }
  consumed_ = true;
  grad_buffer(loss.node).setConstant(1.0);

  for (Index i = loss.node; i >= 0; --i) {
    Node& nd = at(i);
    if (!nd.needs_grad || nd.grad.size() == 0) continue;
    const Matrix& g = nd.grad;
    switch (nd.op) {
      case Op::kConstant:
        break;
      case Op::kLeaf:
        nd.external->grad += g;
        break;
      case Op::kMatmul: {
        Node& a = at(nd.parent[0]);
        Node& b = at(nd.parent[1]);
        if (a.needs_grad) grad_buffer(nd.parent[0]).noalias() += g * b.value.transpose();
        if (b.needs_grad) grad_buffer(nd.parent[1]).noalias() += a.value.transpose() * g;
        break;
      }
      case Op::kAdd: {
        Node& a = at(nd.parent[0]);
        Node& b = at(nd.parent[1]);
        if (a.needs_grad) grad_buffer(nd.parent[0]) += g;
        if (b.needs_grad) {
          if (b.value.rows() == g.rows()) {
            grad_buffer(nd.parent[1]) += g;
          } else {
            grad_buffer(nd.parent[1]) += g.colwise().sum();
          }
        }
        break;
      }
      case Op::kHadamard: {
        Node& a = at(nd.parent[0]);
        Node& b = at(nd.parent[1]);
        if (b.value.rows() == g.rows()) {
          if (a.needs_grad) grad_buffer(nd.parent[0]) += g.cwiseProduct(b.value);
          if (b.needs_grad) grad_buffer(nd.parent[1]) += g.cwiseProduct(a.value);
        } else {
          if (a.needs_grad) {
            grad_buffer(nd.parent[0]).array() += g.array().rowwise() * b.value.row(0).array();
          }
          if (b.needs_grad) {
            grad_buffer(nd.parent[1]) += g.cwiseProduct(a.value).colwise().sum();
          }
        }
        break;
      }
      case Op::kRelu: {
        if (at(nd.parent[0]).needs_grad) {
          grad_buffer(nd.parent[0]).array() +=
              g.array() * (at(nd.parent[0]).value.array() > 0.0).cast<double>();
        }
        break;
      }
      case Op::kScale: {
        if (at(nd.parent[0]).needs_grad) grad_buffer(nd.parent[0]) += nd.factor * g;
        break;
      }
      case Op::kMeanSquare: {
        Node& a = at(nd.parent[0]);
        if (a.needs_grad) {
          grad_buffer(nd.parent[0]) +=
              (2.0 * g(0, 0) / static_cast<double>(a.value.size())) * a.value;
        }
        break;
      }
      case Op::kChebConv: {
        Node& x = at(nd.parent[0]);
        Node& theta = at(nd.parent[1]);
        Node& bias = at(nd.parent[2]);
        if (bias.needs_grad) grad_buffer(nd.parent[2]) += g.colwise().sum();
        if (theta.needs_grad) grad_buffer(nd.parent[1]).noalias() += nd.features.transpose() * g;
        if (x.needs_grad) {
          const Index n = nd.gso.rows();
          const Index c_in = x.value.cols();
          Matrix df(n * nd.batch, static_cast<Index>(nd.order) * c_in);
          df.noalias() = g * theta.value.transpose();
          Matrix& gx = grad_buffer(nd.parent[0]);
          for (Index c = 0; c < c_in; ++c) {
            // adjoint of T_k = 2 L T_{k-1} - T_{k-2}, T_1 = L T_0, T_0 = x_c
            for (int k = nd.order - 1; k >= 2; --k) {
              CMapM gk(df.col(k * c_in + c).data(), n, nd.batch);
              MapM gkm1(df.col((k - 1) * c_in + c).data(), n, nd.batch);
              MapM gkm2(df.col((k - 2) * c_in + c).data(), n, nd.batch);
              gkm1.noalias() += 2.0 * (nd.gso.transpose() * gk);
              gkm2 -= gk;
            }
            if (nd.order > 1) {
              CMapM g1(df.col(c_in + c).data(), n, nd.batch);
              MapM g0(df.col(c).data(), n, nd.batch);
              g0.noalias() += nd.gso.transpose() * g1;
            }
            gx.col(c) += df.col(c);
          }
        }
        break;
      }
      case Op::kGcnConv: {
        Node& x = at(nd.parent[0]);
        Node& w = at(nd.parent[1]);
        Node& bias = at(nd.parent[2]);
        if (bias.needs_grad) grad_buffer(nd.parent[2]) += g.colwise().sum();
        if (w.needs_grad) grad_buffer(nd.parent[1]).noalias() += nd.features.transpose() * g;
        if (x.needs_grad) {
          const Index n = nd.gso.rows();
          Matrix dg;
          dg.noalias() = g * w.value.transpose();
          Matrix& gx = grad_buffer(nd.parent[0]);
          for (Index c = 0; c < x.value.cols(); ++c) {
            CMapM dg_c(dg.col(c).data(), n, nd.batch);
            MapM gx_c(gx.col(c).data(), n, nd.batch);
            gx_c.noalias() += nd.gso.transpose() * dg_c;
          }
        }
        break;
      }
    }
  }
}

void Tape::reset() {
  nodes_.clear();
  consumed_ = false;
}

Matrix glorot_uniform(Index rows, Index cols, Index fan_in, Index fan_out,
                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

}  // namespace gridlmp::nn
