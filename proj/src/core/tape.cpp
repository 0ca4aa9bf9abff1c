#include "core/tape.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace msa::num {

Tape::NodeId Tape::push(Node n) {
  if (backward_done_)
    throw StateError("tape already consumed by backward; use a fresh tape");
  n.grad = Matrix(n.value.rows(), n.value.cols());
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::check(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw StateError("invalid tape node id " + std::to_string(id));
}

Tape::NodeId Tape::leaf(Matrix value) {
  Node n;
  n.op = Op::leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  check(a);
  check(b);
  Node n;
  n.op = Op::matmul;
  n.inputs = {a, b};
  n.value = num::matmul(nodes_[a].value, nodes_[b].value);
  return push(std::move(n));
}

Tape::NodeId Tape::transpose(NodeId a) {
  check(a);
  Node n;
  n.op = Op::transpose;
  n.inputs = {a};
  n.value = num::transpose(nodes_[a].value);
  return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  check(a);
  check(b);
  Node n;
  n.op = Op::add;
  n.inputs = {a, b};
  n.value = num::add(nodes_[a].value, nodes_[b].value);
  return push(std::move(n));
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  check(a);
  check(b);
  Node n;
  n.op = Op::mul;
  n.inputs = {a, b};
  n.value = num::mul(nodes_[a].value, nodes_[b].value);
  return push(std::move(n));
}

Tape::NodeId Tape::mul_const(NodeId a, Matrix mask) {
  check(a);
  Node n;
  n.op = Op::mul_const;
  n.inputs = {a};
  n.value = num::mul(nodes_[a].value, mask);
  n.aux.push_back(std::move(mask));
  return push(std::move(n));
}

Tape::NodeId Tape::sigmoid(NodeId a) {
  check(a);
  Node n;
  n.op = Op::sigmoid;
  n.inputs = {a};
  n.value = num::sigmoid(nodes_[a].value);
  return push(std::move(n));
}

Tape::NodeId Tape::tanh_(NodeId a) {
  check(a);
  Node n;
  n.op = Op::tanh_;
  n.inputs = {a};
  n.value = num::tanh_m(nodes_[a].value);
  return push(std::move(n));
}

Tape::NodeId Tape::relu(NodeId a) {
  check(a);
  Node n;
  n.op = Op::relu;
  n.inputs = {a};
  n.value = num::relu(nodes_[a].value);
  return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId a, double c) {
  check(a);
  Node n;
  n.op = Op::scale;
  n.inputs = {a};
  n.c = c;
  n.value = num::scale(nodes_[a].value, c);
  return push(std::move(n));
}

Tape::NodeId Tape::softmax_rows(NodeId a) {
  check(a);
  Node n;
  n.op = Op::softmax;
  n.inputs = {a};
  n.value = num::softmax_rows(nodes_[a].value);
  return push(std::move(n));
}

Tape::NodeId Tape::layer_norm(NodeId x, NodeId gain, NodeId bias, double eps) {
  check(x);
  check(gain);
  check(bias);
  const Matrix& xv = nodes_[x].value;
  const Matrix& gv = nodes_[gain].value;
  const Matrix& bv = nodes_[bias].value;
  if (gv.size() != xv.cols() || bv.size() != xv.cols())
    throw DimensionError("layer_norm gain/bias length must equal cols");
  Node n;
  n.op = Op::layer_norm;
  n.inputs = {x, gain, bias};
  n.value = Matrix(xv.rows(), xv.cols());
  Matrix xhat(xv.rows(), xv.cols());
  Matrix inv(xv.rows(), 1);
  const std::size_t c = xv.cols();
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += xv(i, j);
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = xv(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    inv(i, 0) = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat(i, j) = (xv(i, j) - mean) * inv(i, 0);
      n.value(i, j) = gv[j] * xhat(i, j) + bv[j];
    }
  }
  n.aux.push_back(std::move(xhat));
  n.aux.push_back(std::move(inv));
  return push(std::move(n));
}

Tape::NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols needs at least one part");
  std::vector<Matrix> vals;
  vals.reserve(parts.size());
  for (NodeId p : parts) {
    check(p);
    vals.push_back(nodes_[p].value);
  }
  Node n;
  n.op = Op::concat;
  n.inputs = parts;
  n.value = num::concat_cols(std::span<const Matrix>(vals.data(), vals.size()));
  return push(std::move(n));
}

Tape::NodeId Tape::row(NodeId a, std::size_t i) {
  check(a);
  const Matrix& av = nodes_[a].value;
  if (i >= av.rows())
    throw DimensionError("row index " + std::to_string(i) + " out of range for " +
                         av.shape_str());
  Node n;
  n.op = Op::row;
  n.inputs = {a};
  n.idx = i;
  n.value = Matrix(1, av.cols());
  for (std::size_t j = 0; j < av.cols(); ++j) n.value(0, j) = av(i, j);
  return push(std::move(n));
}

Tape::NodeId Tape::stack_rows(const std::vector<NodeId>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows needs at least one row");
  for (NodeId r : rows) {
    check(r);
    if (nodes_[r].value.rows() != 1)
      throw DimensionError("stack_rows inputs must be 1-row matrices");
    if (nodes_[r].value.cols() != nodes_[rows[0]].value.cols())
      throw DimensionError("stack_rows column mismatch");
  }
  Node n;
  n.op = Op::stack;
  n.inputs = rows;
  n.value = Matrix(rows.size(), nodes_[rows[0]].value.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < n.value.cols(); ++j)
      n.value(i, j) = nodes_[rows[i]].value(0, j);
  return push(std::move(n));
}

Tape::NodeId Tape::mean_pool_rows(NodeId a) {
  check(a);
  Node n;
  n.op = Op::mean_pool;
  n.inputs = {a};
  n.value = num::mean_pool_rows(nodes_[a].value);
  return push(std::move(n));
}

Tape::NodeId Tape::sum(NodeId a) {
  check(a);
  Node n;
  n.op = Op::sum;
  n.inputs = {a};
  n.value = Matrix(1, 1);
  n.value(0, 0) = num::sum(nodes_[a].value);
  return push(std::move(n));
}

Tape::NodeId Tape::cross_entropy(NodeId logits, std::size_t cls) {
  check(logits);
  const Matrix& lv = nodes_[logits].value;
  if (lv.rows() != 1 || cls >= lv.cols())
    throw DimensionError("cross_entropy expects 1xk logits with cls < k");
  Node n;
  n.op = Op::xent;
  n.inputs = {logits};
  n.idx = cls;
  Matrix p = num::softmax_rows(lv);
  n.value = Matrix(1, 1);
  n.value(0, 0) = -std::log(p(0, cls));
  n.aux.push_back(std::move(p));
  return push(std::move(n));
}

const Matrix& Tape::value(NodeId id) const {
  check(id);
  return nodes_[id].value;
}

const Matrix& Tape::grad(NodeId id) const {
  check(id);
  if (!backward_done_) throw StateError("backward has not been run on this tape");
  return nodes_[id].grad;
}

void Tape::accumulate(Matrix& dst, const Matrix& g) {
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g[k];
}

void Tape::backward(NodeId loss) {
  check(loss);
  const Matrix& lv = nodes_[loss].value;
  if (lv.rows() != 1 || lv.cols() != 1)
    throw StateError("backward without explicit gradient requires a scalar loss node");
  backward(loss, Matrix(1, 1, 1.0));
}

void Tape::backward(NodeId out, const Matrix& out_grad) {
  check(out);
  if (nodes_.empty()) throw StateError("backward on empty tape");
  if (backward_done_) throw StateError("backward already run on this tape");
  if (!nodes_[out].value.same_shape(out_grad))
    throw DimensionError("backward seed gradient shape mismatch");
  nodes_[out].grad = out_grad;
  for (NodeId id = out; id >= 0; --id) backprop_node(id);
  backward_done_ = true;
}

void Tape::backprop_node(NodeId id) {
  Node& n = nodes_[id];
  const Matrix& g = n.grad;
  switch (n.op) {
    case Op::leaf:
      break;
    case Op::matmul: {
      const Matrix& a = nodes_[n.inputs[0]].value;
      const Matrix& b = nodes_[n.inputs[1]].value;
      accumulate(nodes_[n.inputs[0]].grad, num::matmul(g, num::transpose(b)));
      accumulate(nodes_[n.inputs[1]].grad, num::matmul(num::transpose(a), g));
      break;
    }
    case Op::transpose:
      accumulate(nodes_[n.inputs[0]].grad, num::transpose(g));
      break;
    case Op::add:
      accumulate(nodes_[n.inputs[0]].grad, g);
      accumulate(nodes_[n.inputs[1]].grad, g);
      break;
    case Op::mul:
      accumulate(nodes_[n.inputs[0]].grad, num::mul(g, nodes_[n.inputs[1]].value));
      accumulate(nodes_[n.inputs[1]].grad, num::mul(g, nodes_[n.inputs[0]].value));
      break;
    case Op::mul_const:
      accumulate(nodes_[n.inputs[0]].grad, num::mul(g, n.aux[0]));
      break;
    case Op::sigmoid: {
      Matrix d(g.rows(), g.cols());
      for (std::size_t k = 0; k < g.size(); ++k)
        d[k] = g[k] * n.value[k] * (1.0 - n.value[k]);
      accumulate(nodes_[n.inputs[0]].grad, d);
      break;
    }
    case Op::tanh_: {
      Matrix d(g.rows(), g.cols());
      for (std::size_t k = 0; k < g.size(); ++k)
        d[k] = g[k] * (1.0 - n.value[k] * n.value[k]);
      accumulate(nodes_[n.inputs[0]].grad, d);
      break;
    }
    case Op::relu: {
      const Matrix& x = nodes_[n.inputs[0]].value;
      Matrix d(g.rows(), g.cols());
      for (std::size_t k = 0; k < g.size(); ++k) d[k] = x[k] > 0.0 ? g[k] : 0.0;
      accumulate(nodes_[n.inputs[0]].grad, d);
      break;
    }
    case Op::scale:
      accumulate(nodes_[n.inputs[0]].grad, num::scale(g, n.c));
      break;
    case Op::softmax: {
      const Matrix& y = n.value;
      Matrix d(g.rows(), g.cols());
      for (std::size_t i = 0; i < g.rows(); ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * y(i, j);
        for (std::size_t j = 0; j < g.cols(); ++j)
          d(i, j) = y(i, j) * (g(i, j) - dot);
      }
      accumulate(nodes_[n.inputs[0]].grad, d);
      break;
    }
    case Op::layer_norm: {
      const Matrix& xhat = n.aux[0];
      const Matrix& inv = n.aux[1];
      const Matrix& gv = nodes_[n.inputs[1]].value;
      Matrix dx(g.rows(), g.cols());
      Matrix dgain(gv.rows(), gv.cols());
      Matrix dbias(gv.rows(), gv.cols());
      const std::size_t c = g.cols();
      for (std::size_t i = 0; i < g.rows(); ++i) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const double gy = g(i, j) * gv[j];
          m1 += gy;
          m2 += gy * xhat(i, j);
          dgain[j] += g(i, j) * xhat(i, j);
          dbias[j] += g(i, j);
        }
        m1 /= static_cast<double>(c);
        m2 /= static_cast<double>(c);
        for (std::size_t j = 0; j < c; ++j)
          dx(i, j) = inv(i, 0) * (g(i, j) * gv[j] - m1 - xhat(i, j) * m2);
      }
      accumulate(nodes_[n.inputs[0]].grad, dx);
      accumulate(nodes_[n.inputs[1]].grad, dgain);
      accumulate(nodes_[n.inputs[2]].grad, dbias);
      break;
    }
    case Op::concat: {
      std::size_t off = 0;
      for (NodeId p : n.inputs) {
        Node& pn = nodes_[p];
        for (std::size_t i = 0; i < pn.value.rows(); ++i)
          for (std::size_t j = 0; j < pn.value.cols(); ++j)
            pn.grad(i, j) += g(i, off + j);
        off += pn.value.cols();
      }
      break;
    }
    case Op::row: {
      Node& pn = nodes_[n.inputs[0]];
      for (std::size_t j = 0; j < g.cols(); ++j) pn.grad(n.idx, j) += g(0, j);
      break;
    }
    case Op::stack: {
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        Node& pn = nodes_[n.inputs[i]];
        for (std::size_t j = 0; j < g.cols(); ++j) pn.grad(0, j) += g(i, j);
      }
      break;
    }
    case Op::mean_pool: {
      Node& pn = nodes_[n.inputs[0]];
      const double w = 1.0 / static_cast<double>(pn.value.rows());
      for (std::size_t i = 0; i < pn.value.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) pn.grad(i, j) += g(0, j) * w;
      break;
    }
    case Op::sum: {
      Node& pn = nodes_[n.inputs[0]];
      for (std::size_t k = 0; k < pn.grad.size(); ++k) pn.grad[k] += g(0, 0);
      break;
    }
    case Op::xent: {
      Node& pn = nodes_[n.inputs[0]];
      const Matrix& p = n.aux[0];
      for (std::size_t j = 0; j < p.cols(); ++j)
        pn.grad(0, j) += g(0, 0) * (p(0, j) - (j == n.idx ? 1.0 : 0.0));
      break;
    }
  }
}

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& x,
                        double step) {
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = probe[k];
    probe[k] = orig + step;
    const double hi = f(probe);
    probe[k] = orig - step;
    const double lo = f(probe);
    probe[k] = orig;
    if (!std::isfinite(hi) || !std::isfinite(lo))
      throw NumericError("finite_diff_grad: non-finite function evaluation at entry " +
                         std::to_string(k));
    grad[k] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

}  // namespace msa::num
