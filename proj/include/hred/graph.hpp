#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

#include "hred/tensor.hpp"

namespace hred {

enum class OpKind : std::uint8_t {
  Leaf,
  Add,         // a + b, same shape
  Sub,         // a - b, same shape
  Mul,         // a * b elementwise, same shape
  MatMul,      // [m,k]x[k,n] -> [m,n] or [m,k]x[k] -> [m]
  Tanh,
  Sigmoid,
  Concat,      // rank-1 inputs joined end to end
  Slice,       // rank-1 input, attrs.index = offset, attrs.length = count
  Softmax,     // rank-1
  LogSoftmax,  // rank-1
  Log,
  Sum,         // -> [1]
  Mean,        // -> [1]
  Square,
  Sqrt,
  Max,         // elementwise max(a, b); ties route the gradient to a
  Scale,       // a * attrs.scalar
  Row,         // rank-2 input, row attrs.index -> rank-1
  Pick,        // rank-1 input, element attrs.index -> [1]
};

std::string_view op_name(OpKind kind);

struct OpAttrs {
  std::size_t index = 0;
  std::size_t length = 0;
  double scalar = 1.0;
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; only valid while the graph lives.
class Var {
 public:
  Var() = default;
  Graph* graph() const { return graph_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }
  const Tensor& value() const;

 private:
  friend class Graph;
  Var(Graph* g, std::uint32_t id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Dynamic reverse-mode tape. Nodes are appended in evaluation order, so the
/// node list is always topologically sorted. One graph per example; discard
/// it after backward().
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor t);
  /// Differentiable leaf owned by the graph.
  Var input(Tensor t);
  /// Differentiable leaf that refers to caller-owned storage. The tensor
  /// must outlive the graph and must not change while the graph is in use.
  Var parameter(const Tensor& t);

  Var apply(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs = {});
  Var apply(OpKind kind, std::initializer_list<Var> inputs, const OpAttrs& attrs = {}) {
    return apply(kind, std::span<const Var>(inputs.begin(), inputs.size()), attrs);
  }

  /// Populates gradients of `loss` with respect to every differentiable node.
  void backward(Var loss);

  const Tensor& value(Var v) const;
  /// Gradient after backward(); zeros for nodes the loss does not depend on.
  Tensor grad(Var v) const;
  bool has_grad(Var v) const;

  std::size_t node_count() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  OpKind kind(Var v) const { return nodes_.at(v.id()).kind; }
  std::span<const std::uint32_t> inputs_of(Var v) const { return nodes_.at(v.id()).inputs; }

 private:
  struct Node {
    OpKind kind = OpKind::Leaf;
    std::vector<std::uint32_t> inputs;
    OpAttrs attrs;
    Tensor owned;
    const Tensor* external = nullptr;
    bool requires_grad = false;
    const Tensor& value() const { return external ? *external : owned; }
  };

  Var push_leaf(Tensor t, const Tensor* external, bool requires_grad);
  void check_owner(Var v) const;
  Tensor& grad_slot(std::uint32_t id);
  void backprop_node(std::uint32_t id);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool consumed_ = false;
};

/// Thin wrappers over Graph::apply.
namespace ag {
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var matmul(Var a, Var b);
Var tanh(Var a);
Var sigmoid(Var a);
Var concat(std::span<const Var> parts);
Var concat(Var a, Var b);
Var slice(Var a, std::size_t offset, std::size_t length);
Var softmax(Var a);
Var log_softmax(Var a);
Var log(Var a);
Var sum(Var a);
Var mean(Var a);
Var square(Var a);
Var sqrt(Var a);
Var maximum(Var a, Var b);
Var scale(Var a, double factor);
Var row(Var matrix, std::size_t index);
Var pick(Var a, std::size_t index);
}  // namespace ag

}  // namespace hred
