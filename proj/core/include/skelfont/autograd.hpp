#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "skelfont/tensor.hpp"

namespace skelfont {

// Graph recording switch for the current thread.
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

// Disables graph recording for its lifetime (inference, evaluation).
class NoGradGuard {
 public:
  NoGradGuard() : previous_(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Re-enables recording inside an outer NoGradGuard (training entry points).
class EnableGradGuard {
 public:
  EnableGradGuard() : previous_(grad_mode()) { grad_mode() = true; }
  ~EnableGradGuard() { grad_mode() = previous_; }
  EnableGradGuard(const EnableGradGuard&) = delete;
  EnableGradGuard& operator=(const EnableGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs that require grad.
  std::function<void(Node&)> backward_fn;

  Tensor<T>& grad_buffer() {
    if (grad.size() != value.size()) grad = Tensor<T>(value.shape());
    return grad;
  }
  bool has_grad() const { return grad.size() == value.size() && !grad.empty(); }
};

// Handle to a node in a dynamically recorded computation graph. Copies share
// the node, so a parameter held by a layer and the Var flowing through the
// graph are the same object.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  static Var make(Tensor<T> value, const std::vector<Var>& inputs,
                  std::function<void(Node<T>&)> backward_fn) {
    Var out(std::move(value));
    if (!grad_mode()) return out;
    for (const Var& in : inputs) {
      if (in.requires_grad()) {
        out.node_->requires_grad = true;
        break;
      }
    }
    if (out.node_->requires_grad) {
      out.node_->inputs.reserve(inputs.size());
      for (const Var& in : inputs) out.node_->inputs.push_back(in.node_);
      out.node_->backward_fn = std::move(backward_fn);
    }
    return out;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad_buffer(); }
  Tensor<T>& mutable_grad() { return node_->grad_buffer(); }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int i) const { return node_->value.dim(i); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  T item() const { return node_->value[0]; }

  Var detach() const { return Var(node_->value); }

  void zero_grad() {
    if (node_->has_grad()) node_->grad.fill(T(0));
  }

  // Reverse-mode sweep from a scalar root. Leaf gradients accumulate across
  // calls until zero_grad; interior gradients are reset on every sweep.
  void backward() const {
    if (!requires_grad()) return;
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        Node<T>* child = node->inputs[next++].get();
        if (child->requires_grad && !seen.count(child)) {
          seen.insert(child);
          stack.emplace_back(child, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    for (Node<T>* n : order) {
      if (n->backward_fn) n->grad_buffer().fill(T(0));
    }
    node_->grad_buffer().fill(T(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node<T>* n = *it;
      if (n->backward_fn) n->backward_fn(*n);
    }
  }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

}  // namespace skelfont
