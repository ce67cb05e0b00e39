#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "megadance/errors.hpp"

namespace megadance {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  bool released = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the grads of `inputs`.
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
  Node& input(std::size_t i) { return *inputs[i]; }
};

/// Gradient buffer of input `i`, or nullptr when that input is a constant.
inline double* input_grad(Node& self, std::size_t i) {
  auto& in = *self.inputs[i];
  return in.requires_grad ? in.ensure_grad().data() : nullptr;
}

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

/// Disables graph recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Dense row-major tensor of doubles with optional gradient tracking.
///
/// Copies share the underlying storage (handle semantics), so a Tensor held by
/// a parameter registry and one captured in a graph refer to the same leaf.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    if (shape_numel(shape) != values.size()) {
      throw DimensionError("tensor data length " + std::to_string(values.size()) +
                           " does not match shape " + shape_str(shape));
    }
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }
  static Tensor full(Shape shape, double v, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v), requires_grad);
  }
  static Tensor scalar(double v, bool requires_grad = false) {
    return Tensor({1}, {v}, requires_grad);
  }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false) {
    return Tensor({rows, cols}, std::move(values), requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }
  std::size_t rows() const { return node_->shape.empty() ? 1 : node_->shape.front(); }
  std::size_t cols() const {
    return node_->shape.size() < 2 ? 1 : numel() / node_->shape.front();
  }

  std::span<const double> values() const { return node_->value; }
  /// In-place access, used by optimizers and initializers on leaf tensors.
  std::span<double> mutable_values() {
    if (!node_->is_leaf) throw ContractError("in-place mutation of a non-leaf tensor");
    return node_->value;
  }
  double item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }
  double operator()(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double operator[](std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf; }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  /// Gradient buffer; zeros when nothing has been accumulated yet.
  std::vector<double> grad() const {
    return has_grad() ? node_->grad : std::vector<double>(numel(), 0.0);
  }
  std::span<const double> grad_view() const { return node_->grad; }
  void zero_grad() {
    if (has_grad()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }
  /// Drops the gradient buffer; has_grad() is false until the next backward.
  void clear_grad() {
    node_->grad.clear();
    node_->grad.shrink_to_fit();
  }
  void set_requires_grad(bool flag) {
    if (!node_->is_leaf) throw ContractError("requires_grad can only be set on leaves");
    node_->requires_grad = flag;
  }

  /// Reverse-mode sweep from a scalar. Leaf gradients accumulate across calls;
  /// intermediate nodes are released afterwards.
  void backward() const;

  /// A new leaf sharing no graph history.
  Tensor detach() const { return Tensor(shape(), node_->value, false); }

  Tensor reshaped(Shape new_shape) const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

  /// Builds the result of an operation. `backward` is recorded only when grad
  /// mode is on and some input requires grad.
  static Tensor make_op(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                        std::function<void(detail::Node&)> backward) {
    Tensor out(std::move(shape), std::move(value));
    if (!detail::grad_mode()) return out;
    bool any = false;
    for (const auto& t : inputs) any = any || t.requires_grad();
    if (!any) return out;
    auto& node = *out.node_;
    node.requires_grad = true;
    node.is_leaf = false;
    node.inputs.reserve(inputs.size());
    for (auto& t : inputs) node.inputs.push_back(t.node_);
    node.backward = std::move(backward);
    return out;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

inline void Tensor::backward() const {
  if (!defined() || numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " +
                        (defined() ? shape_str(shape()) : std::string("<undefined>")));
  }
  if (node_->released) throw ContractError("backward() through a graph that was already released");
  if (!node_->requires_grad) throw ContractError("backward() on a tensor that does not require grad");

  // Iterative post-order DFS; `order` ends up topologically sorted.
  std::vector<std::shared_ptr<detail::Node>> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(node_, 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      auto child = node->inputs[next++];
      if (child->requires_grad && seen.insert(child.get()).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto& node = **it;
    if (node.backward && node.grad.size() == node.value.size()) node.backward(node);
  }
  for (auto& node : order) {
    if (node->is_leaf) continue;
    node->backward = nullptr;
    node->inputs.clear();
    node->grad.clear();
    node->grad.shrink_to_fit();
    node->released = true;
  }
}

inline Tensor Tensor::reshaped(Shape new_shape) const {
  if (shape_numel(new_shape) != numel()) {
    throw DimensionError("cannot reshape " + shape_str(shape()) + " to " + shape_str(new_shape));
  }
  return make_op(std::move(new_shape), node_->value, {*this}, [](detail::Node& self) {
    double* g = detail::input_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

}  // namespace megadance
