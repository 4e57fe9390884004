// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense tensors with a dynamic reverse-mode tape.
//
// A Tensor is a cheap handle onto a shared graph node. Leaves created with
// Tensor::parameter() accumulate gradients; every op result records its
// parents and a backward closure when grad mode is on and at least one input
// requires a gradient. The scalar type is a template parameter so the same
// model code runs in float for training and double for gradient checks.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mvdit {

using Shape = std::vector<std::int64_t>;

// Tensor storage. Every buffer starts on the widest SIMD boundary so the
// vectorized kernels peel identically on every run; with arbitrary heap
// alignment, reductions would change summation order between runs.
template <class T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

inline void validate_shape(const Shape& shape) {
  for (auto e : shape) {
    if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
}

namespace detail {

inline std::atomic<std::uint64_t> next_node_id{1};
inline thread_local bool grad_mode = true;

template <class T>
struct Node {
  Shape shape;
  Buffer<T> value;
  Buffer<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  std::uint64_t id = next_node_id.fetch_add(1, std::memory_order_relaxed);

  Buffer<T>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode; }

// Disables tape recording in the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_mode) { detail::grad_mode = false; }
  ~NoGradGuard() { detail::grad_mode = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <class T>
class Tensor {
 public:
  using Scalar = T;
  using NodeType = detail::Node<T>;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<NodeType> node) : node_(std::move(node)) {}

  static Tensor from(Shape shape, Buffer<T> values, bool requires_grad = false) {
    validate_shape(shape);
    if (static_cast<std::int64_t>(values.size()) != mvdit::numel(shape)) {
      throw ShapeError("data length " + std::to_string(values.size()) + " does not match shape " +
                       shape_str(shape));
    }
    auto node = std::make_shared<NodeType>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  template <class Alloc>
  static Tensor from(Shape shape, const std::vector<T, Alloc>& values, bool requires_grad = false) {
    return from(std::move(shape), Buffer<T>(values.begin(), values.end()), requires_grad);
  }

  static Tensor full(Shape shape, T fill, bool requires_grad = false) {
    validate_shape(shape);
    auto n = static_cast<std::size_t>(mvdit::numel(shape));
    return from(std::move(shape), Buffer<T>(n, fill), requires_grad);
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), T(0), requires_grad);
  }

  static Tensor scalar(T v) { return from({1}, {v}); }

  static Tensor parameter(Shape shape, Buffer<T> values) { return from(std::move(shape), std::move(values), true); }
  template <class Alloc>
  static Tensor parameter(Shape shape, const std::vector<T, Alloc>& values) {
    return from(std::move(shape), values, true);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::int64_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }
  std::int64_t rows() const { return rank() == 1 ? 1 : node_->shape[0]; }
  std::int64_t cols() const { return node_->shape.back(); }

  std::span<const T> data() const { return node_->value; }
  const Buffer<T>& values() const { return node_->value; }
  std::vector<T> to_vector() const { return std::vector<T>(node_->value.begin(), node_->value.end()); }
  // Leaves only: parameters are updated in place by the optimizer between
  // steps, never while a graph referencing them is alive.
  Buffer<T>& mutable_values() {
    if (!node_->parents.empty()) throw GraphError("cannot mutate a non-leaf tensor in place");
    return node_->value;
  }

  T item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }

  T operator[](std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->parents.empty(); }
  std::uint64_t id() const { return node_->id; }

  Tensor detach() const { return from(shape(), values()); }

  template <class U>
  Tensor<U> cast() const {
    Buffer<U> out(node_->value.begin(), node_->value.end());
    return Tensor<U>::from(shape(), std::move(out), requires_grad() && is_leaf());
  }

  NodeType& node() const { return *node_; }
  const std::shared_ptr<NodeType>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<NodeType> node_;
};

namespace detail {

// Builds an op result; the backward closure is kept only when needed.
template <class T, class Backward>
Tensor<T> make_result(Shape shape, Buffer<T> values,
                      std::initializer_list<const Tensor<T>*> inputs, Backward&& backward) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  bool needs = false;
  if (grad_mode) {
    for (const auto* in : inputs) needs = needs || in->requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const auto* in : inputs) node->parents.push_back(in->node_ptr());
    node->backward_fn = std::forward<Backward>(backward);
  }
  return Tensor<T>(std::move(node));
}

template <class T, class Backward>
Tensor<T> make_result_n(Shape shape, Buffer<T> values, const std::vector<Tensor<T>>& inputs,
                        Backward&& backward) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  bool needs = false;
  if (grad_mode) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const auto& in : inputs) node->parents.push_back(in.node_ptr());
    node->backward_fn = std::forward<Backward>(backward);
  }
  return Tensor<T>(std::move(node));
}

// Parent gradient buffer, or nullptr when the parent is a constant.
template <class T>
Buffer<T>* grad_of(Node<T>& self, std::size_t i) {
  auto& p = *self.parents[i];
  return p.requires_grad ? &p.ensure_grad() : nullptr;
}

template <class T>
std::vector<Node<T>*> topological_order(Node<T>* root) {
  enum class Mark : std::uint8_t { Open, Done };
  std::unordered_map<Node<T>*, Mark> marks;
  std::vector<Node<T>*> order;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  marks[root] = Mark::Open;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (!parent->requires_grad) continue;
      auto it = marks.find(parent);
      if (it == marks.end()) {
        marks[parent] = Mark::Open;
        stack.emplace_back(parent, 0);
      } else if (it->second == Mark::Open) {
        throw GraphError("cycle detected in autodiff graph");
      }
    } else {
      marks[node] = Mark::Done;
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children
}

}  // namespace detail

template <class T>
using GradientMap = std::unordered_map<std::uint64_t, Tensor<T>>;

// Reverse-mode sweep from a scalar loss. Returns the gradient of every
// reachable leaf that requires a gradient, keyed by tensor id. Intermediate
// and leaf gradient buffers are released afterwards, so repeated calls do not
// accumulate.
template <class T>
GradientMap<T> backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward() requires a scalar loss");
  }
  GradientMap<T> out;
  if (!loss.requires_grad()) return out;
  auto* root = &loss.node();
  auto order = detail::topological_order(root);
  root->ensure_grad()[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
  for (auto* node : order) {
    if (node->parents.empty() && node->requires_grad) {
      if (node->grad.empty()) node->grad.assign(node->value.size(), T(0));
      out.emplace(node->id, Tensor<T>::from(node->shape, std::move(node->grad)));
    }
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
  return out;
}

// Gradients aligned with `params`; parameters the loss does not reach get
// zeros.
template <class T>
std::vector<Tensor<T>> gradients(const Tensor<T>& loss, const std::vector<Tensor<T>>& params) {
  auto map = backward(loss);
  std::vector<Tensor<T>> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    auto it = map.find(p.id());
    out.push_back(it != map.end() ? it->second : Tensor<T>::zeros(p.shape()));
  }
  return out;
}

}  // namespace mvdit
