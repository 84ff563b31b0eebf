#pragma once

// Reverse-mode tape. Nodes are appended in execution order, so creation
// order is already topological; backward() walks the node list once in
// reverse. Primitives register one node per call (sequence ops fuse a whole
// unrolled pass into a single node, see ops_rnn.hpp) and capture whatever
// activations their backward needs by value.

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "funssl/tensor.hpp"

namespace funssl {

template <typename T>
class Graph;

// Lightweight handle into a graph; copying is free.
template <typename T>
struct Var {
  Graph<T>* graph = nullptr;
  std::int32_t id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape; }
  bool requires_grad() const;
};

template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph<T>&)>;

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated on first accumulation
    bool requires_grad = false;
    const char* op = "leaf";
    BackwardFn backward;  // empty for leaves and grad-free nodes
  };

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {
    nodes_.reserve(256);
  }

  bool grad_enabled() const { return grad_enabled_; }

  Var<T> leaf(Tensor<T> value, bool requires_grad = false) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad && grad_enabled_;
    nodes_.push_back(std::move(n));
    return {this, static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

  Var<T> push(Tensor<T> value, bool requires_grad, const char* op,
              BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad && grad_enabled_;
    n.op = op;
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  const Tensor<T>& value(Var<T> v) const { return nodes_[v.id].value; }
  bool requires_grad(Var<T> v) const { return nodes_[v.id].requires_grad; }

  // Gradient of the last backward() root w.r.t. v; zeros if v never
  // received a contribution.
  Tensor<T> grad(Var<T> v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.numel() == 0) return Tensor<T>::zeros(n.value.shape);
    return n.grad;
  }

  // Accumulation buffer for backward closures.
  Tensor<T>& grad_buf(std::int32_t id) {
    Node& n = nodes_[id];
    if (n.grad.numel() == 0) n.grad = Tensor<T>::zeros(n.value.shape);
    return n.grad;
  }

  bool has_grad(std::int32_t id) const {
    return nodes_[id].grad.numel() != 0;
  }

  void backward(Var<T> root) {
    check(root.graph == this, "backward: var from another graph");
    check(nodes_[root.id].value.numel() == 1,
          "backward: root must be scalar");
    check_runtime(nodes_[root.id].requires_grad,
                  "backward: root does not require grad");
    grad_buf(root.id)[0] = T{1};
    for (std::int32_t id = root.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.backward && n.grad.numel() != 0) n.backward(*this);
    }
  }

  std::size_t size() const { return nodes_.size(); }

  // Id the next push() will get; ops capture it so their backward closure
  // can read the output gradient.
  std::int32_t next_id() const {
    return static_cast<std::int32_t>(nodes_.size());
  }

  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
  bool grad_enabled_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph->value(*this);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return graph->requires_grad(*this);
}

}  // namespace funssl
