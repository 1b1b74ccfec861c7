#pragma once

#include <algorithm>
#include <cmath>
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

#include "clad/error.hpp"

namespace clad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel_of(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

struct TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty means "absent"
  bool requires_grad = false;

  // Graph edge. A node with a backward function is an interior node; leaves
  // have none. backward_fn reads this node's grad and accumulates into parents.
  std::vector<ImplPtr> parents;
  std::function<void(TensorImpl&)> backward_fn;
  const char* op = "leaf";

  bool is_leaf() const { return !backward_fn; }

  std::vector<double>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Dense row-major float64 array with optional gradient.
///
/// Tensor is a shared handle: copies alias the same storage and graph node,
/// which is what lets parameters be held in a store and used in many graphs.
/// Use clone() or detach() for an independent value.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false)
      : impl_(std::make_shared<detail::TensorImpl>()) {
    for (std::size_t extent : shape) {
      if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
    }
    if (numel_of(shape) != data.size()) {
      throw DimensionError("data length " + std::to_string(data.size()) + " does not match shape " +
                           shape_str(shape));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
  }

  static Tensor zeros(const Shape& shape, bool requires_grad = false) {
    return Tensor(shape, std::vector<double>(numel_of(shape), 0.0), requires_grad);
  }
  static Tensor full(const Shape& shape, double value, bool requires_grad = false) {
    return Tensor(shape, std::vector<double>(numel_of(shape), value), requires_grad);
  }
  static Tensor scalar(double value, bool requires_grad = false) {
    return Tensor({1}, {value}, requires_grad);
  }
  static Tensor vector(std::vector<double> values, bool requires_grad = false) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values), requires_grad);
  }
  static Tensor zeros_like(const Tensor& other) { return zeros(other.shape()); }

  bool defined() const { return static_cast<bool>(impl_); }

  const Shape& shape() const { return impl().shape; }
  std::size_t rank() const { return impl().shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl().shape.at(axis); }
  std::size_t numel() const { return impl().data.size(); }

  std::span<const double> data() const { return impl().data; }

  /// Mutable access to values. Only meaningful on leaves; writing into an
  /// interior node does not propagate through the recorded graph.
  std::span<double> mutable_data() { return impl().data; }

  const std::vector<double>& values() const { return impl().data; }

  double item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return impl().data[0];
  }
  double operator[](std::size_t flat_index) const { return impl().data.at(flat_index); }

  bool requires_grad() const { return impl().requires_grad; }
  Tensor& set_requires_grad(bool flag) {
    impl().requires_grad = flag;
    return *this;
  }

  bool is_leaf() const { return impl().is_leaf(); }
  bool has_grad() const { return !impl().grad.empty(); }
  std::span<const double> grad() const {
    if (!has_grad()) throw StateError("tensor has no gradient");
    return impl().grad;
  }
  Tensor grad_tensor() const { return Tensor(shape(), std::vector<double>(grad().begin(), grad().end())); }

  /// Sets the gradient buffer to zeros (present, not absent).
  void zero_grad() { impl().grad.assign(impl().data.size(), 0.0); }
  void clear_grad() { impl().grad.clear(); }

  /// Same values, no graph, no grad tracking.
  Tensor detach() const { return Tensor(shape(), impl().data); }
  Tensor clone() const { return Tensor(shape(), impl().data, requires_grad()); }

  const char* op_name() const { return impl().op; }

  detail::TensorImpl& impl() const {
    if (!impl_) throw StateError("use of undefined tensor");
    return *impl_;
  }
  const detail::ImplPtr& impl_ptr() const { return impl_; }

  static Tensor from_impl(detail::ImplPtr impl) {
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
  }

 private:
  detail::ImplPtr impl_;
};

namespace detail {

inline void check_finite(const char* op, const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(op, "non-finite value in output");
  }
}

/// Builds an op result. When grad mode is on and any input tracks gradients,
/// the node records its parents and backward function.
inline Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                          std::vector<Tensor> inputs,
                          std::function<void(TensorImpl&)> backward_fn) {
  check_finite(op, data);
  Tensor out(std::move(shape), std::move(data));
  bool track = false;
  if (grad_enabled()) {
    for (const Tensor& in : inputs) track = track || in.requires_grad();
  }
  if (track) {
    TensorImpl& node = out.impl();
    node.requires_grad = true;
    node.op = op;
    node.parents.reserve(inputs.size());
    for (const Tensor& in : inputs) node.parents.push_back(in.impl_ptr());
    node.backward_fn = std::move(backward_fn);
  }
  return out;
}

}  // namespace detail

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
/// calls; call zero_grad() (or ParamStore::zero_grads) between steps.
inline void backward(const Tensor& loss) {
  if (loss.numel() != 1) throw PreconditionError("backward() requires a scalar loss, got shape " +
                                                 shape_str(loss.shape()));
  if (!loss.requires_grad()) throw StateError("backward() on a tensor with no recorded graph");

  // Iterative post-order DFS to get a topological order.
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> visited;
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
  stack.emplace_back(&loss.impl(), 0);
  visited.insert(&loss.impl());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::TensorImpl* parent = node->parents[next++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::TensorImpl* node : order) {
    if (!node->is_leaf()) node->grad.assign(node->data.size(), 0.0);
  }
  loss.impl().ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!(*it)->is_leaf()) (*it)->backward_fn(**it);
  }
}

}  // namespace clad
