#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "acnet/rng.hpp"

namespace acnet {

inline int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

template <typename T>
struct TensorNode {
  std::vector<int> shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until needed; same length as data once allocated
  bool requires_grad = false;  // set on leaves the caller wants gradients for
  bool needs_grad = false;     // participates in the backward sweep
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;  // accumulates into parents

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  bool is_leaf() const { return parents.empty(); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

// Value-semantic handle to a node in a reverse-mode differentiation graph.
// Ops create result tensors whose backward functions accumulate (sum
// semantics) into their parents' grad buffers.
template <typename T>
class Tensor {
 public:
  using Node = TensorNode<T>;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    return filled(std::move(shape), T(0), requires_grad);
  }

  static Tensor filled(std::vector<int> shape, T value, bool requires_grad = false) {
    auto node = std::make_shared<Node>();
    node->data.assign(shape_numel(shape), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    node->needs_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor from_data(std::vector<int> shape, std::vector<T> values,
                          bool requires_grad = false) {
    if (shape_numel(shape) != static_cast<int64_t>(values.size())) {
      throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                  " values do not fill shape " + shape_str(shape));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    node->needs_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor randn(std::vector<int> shape, Rng& rng, T stddev = T(1),
                      bool requires_grad = false) {
    auto t = zeros(std::move(shape), requires_grad);
    for (T& v : t.values()) v = static_cast<T>(rng.normal()) * stddev;
    return t;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const std::vector<int>& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int axis) const { return node_->shape[axis]; }
  int64_t numel() const { return node_->numel(); }

  std::vector<T>& values() { return node_->data; }
  const std::vector<T>& values() const { return node_->data; }

  bool requires_grad() const { return node_->requires_grad; }
  bool needs_grad() const { return node_->needs_grad; }
  bool has_grad() const { return !node_->grad.empty(); }

  std::vector<T>& grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  const std::vector<T>& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }

  void zero_grad() { node_->grad.assign(node_->data.size(), T(0)); }

  T item() const {
    if (numel() != 1) {
      throw std::invalid_argument("item: tensor has shape " + shape_str(shape()) +
                                  ", expected a scalar");
    }
    return node_->data[0];
  }

  // New leaf holding a copy of the current values, cut off from the graph.
  Tensor detach() const {
    auto node = std::make_shared<Node>();
    node->shape = node_->shape;
    node->data = node_->data;
    return Tensor(std::move(node));
  }

  Tensor clone() const { return detach(); }

  // Reverse sweep from a scalar root. Leaf grads accumulate across calls;
  // interior grads are scratch and reset on every call.
  void backward() const {
    if (numel() != 1) {
      throw std::invalid_argument("backward: root has shape " + shape_str(shape()) +
                                  ", expected a scalar loss");
    }
    std::vector<Node*> order;  // topological, parents before children
    topo_sort(order);
    for (Node* n : order) {
      if (!n->is_leaf()) {
        n->grad.assign(n->data.size(), T(0));
      } else {
        n->ensure_grad();
      }
    }
    node_->ensure_grad();
    node_->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      if (n->backward_fn && n->needs_grad) n->backward_fn(*n);
    }
  }

  std::shared_ptr<Node> node() const { return node_; }

  static Tensor make_result(std::vector<int> shape,
                            std::vector<std::shared_ptr<Node>> parents,
                            std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->data.assign(shape_numel(shape), T(0));
    node->shape = std::move(shape);
    for (const auto& p : parents) {
      if (p->needs_grad) node->needs_grad = true;
    }
    node->parents = std::move(parents);
    if (node->needs_grad) node->backward_fn = std::move(backward_fn);
    return Tensor(std::move(node));
  }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  void topo_sort(std::vector<Node*>& order) const {
    // Iterative DFS; graphs are acyclic by construction.
    std::unordered_set<Node*> visited;
    struct Frame {
      Node* node;
      size_t next_parent;
    };
    std::vector<Frame> stack;
    if (!node_->needs_grad) {
      order.push_back(node_.get());
      return;
    }
    stack.push_back({node_.get(), 0});
    visited.insert(node_.get());
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next_parent < f.node->parents.size()) {
        Node* p = f.node->parents[f.next_parent++].get();
        if (p->needs_grad && !visited.count(p)) {
          visited.insert(p);
          stack.push_back({p, 0});
        }
      } else {
        order.push_back(f.node);
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<Node> node_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace acnet
