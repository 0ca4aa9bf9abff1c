#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "core/matrix.hpp"

namespace msa::num {

// Reverse-mode gradient tape over Matrix operations. One forward/backward
// pair per tape; single writer.
class Tape {
 public:
  using NodeId = int;

  NodeId leaf(Matrix value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId mul_const(NodeId a, Matrix mask);  // no gradient through the mask
  NodeId sigmoid(NodeId a);
  NodeId tanh_(NodeId a);
  NodeId relu(NodeId a);
  NodeId scale(NodeId a, double c);
  NodeId softmax_rows(NodeId a);
  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, double eps = 1e-5);
  NodeId concat_cols(const std::vector<NodeId>& parts);
  NodeId row(NodeId a, std::size_t i);
  NodeId stack_rows(const std::vector<NodeId>& rows);  // each input 1 x c
  NodeId mean_pool_rows(NodeId a);
  NodeId sum(NodeId a);
  // -log softmax(logits)[cls]; logits must be 1 x k.
  NodeId cross_entropy(NodeId logits, std::size_t cls);

  const Matrix& value(NodeId id) const;
  const Matrix& grad(NodeId id) const;

  // Backward from a scalar (1x1) node with seed gradient 1.
  void backward(NodeId loss);
  // Backward from an arbitrary node with an explicit output gradient.
  void backward(NodeId out, const Matrix& out_grad);

  std::size_t size() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

 private:
  enum class Op {
    leaf, matmul, transpose, add, mul, mul_const, sigmoid, tanh_, relu,
    scale, softmax, layer_norm, concat, row, stack, mean_pool, sum, xent,
  };

  struct Node {
    Op op;
    std::vector<NodeId> inputs;
    Matrix value;
    Matrix grad;
    std::vector<Matrix> aux;
    double c = 0.0;
    std::size_t idx = 0;
  };

  NodeId push(Node n);
  void check(NodeId id) const;
  void accumulate(Matrix& dst, const Matrix& g);
  void backprop_node(NodeId id);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Central-difference gradient of a scalar function, entry by entry.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& x,
                        double step);

}  // namespace msa::num
