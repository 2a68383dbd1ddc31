#ifndef CCN_TENSOR_HPP
#define CCN_TENSOR_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace ccn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

/// Raised by tensor operations on incompatible shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline Index numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename Scalar>
struct TensorNode {
  Shape shape;
  std::vector<Scalar> value;
  std::vector<Scalar> grad;
  bool requires_grad = false;
  bool backward_done = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(TensorNode&)> backward_fn;

  std::vector<Scalar>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), Scalar(0));
    return grad;
  }
};

/// Dense row-major tensor with an optional gradient.
///
/// A Tensor is a cheap handle: copies share the same node. Operations in
/// ops.hpp produce new nodes and, when any input requires a gradient, link
/// them into the reverse-mode graph that backward() walks.
template <typename Scalar>
class Tensor {
 public:
  using Node = TensorNode<Scalar>;

  Tensor() = default;

  Tensor(Shape shape, std::vector<Scalar> data, bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    for (Index d : shape) {
      if (d <= 0) throw DimensionError("tensor dims must be positive, got " + to_string(shape));
    }
    if (numel(shape) != static_cast<Index>(data.size())) {
      throw DimensionError("shape " + to_string(shape) + " does not match " +
                           std::to_string(data.size()) + " values");
    }
    node_->shape = std::move(shape);
    node_->value = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor full(Shape shape, Scalar v, bool requires_grad = false) {
    const Index n = numel(shape);
    return Tensor(std::move(shape), std::vector<Scalar>(static_cast<std::size_t>(n), v),
                  requires_grad);
  }
  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), Scalar(0), requires_grad);
  }
  static Tensor ones(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), Scalar(1), requires_grad);
  }
  static Tensor scalar(Scalar v, bool requires_grad = false) {
    return Tensor({1}, {v}, requires_grad);
  }

  explicit operator bool() const { return static_cast<bool>(node_); }

  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  Index dim(int axis) const {
    return node_->shape.at(static_cast<std::size_t>(axis < 0 ? axis + rank() : axis));
  }
  Index size() const { return static_cast<Index>(node_->value.size()); }

  std::span<const Scalar> data() const { return node_->value; }
  // Only meaningful for leaves (parameters, inputs); interior nodes are
  // immutable once created.
  std::span<Scalar> mutable_data() { return node_->value; }
  const std::vector<Scalar>& values() const { return node_->value; }

  Scalar item() const {
    if (size() != 1) throw DimensionError("item() on tensor of shape " + to_string(shape()));
    return node_->value[0];
  }

  Scalar at(std::initializer_list<Index> idx) const { return node_->value[flat_index(idx)]; }

  Index flat_index(std::initializer_list<Index> idx) const {
    if (static_cast<int>(idx.size()) != rank()) {
      throw DimensionError("index rank mismatch for shape " + to_string(shape()));
    }
    Index flat = 0;
    std::size_t a = 0;
    for (Index i : idx) {
      if (i < 0 || i >= node_->shape[a]) throw std::out_of_range("tensor index out of range");
      flat = flat * node_->shape[a] + i;
      ++a;
    }
    return flat;
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const Scalar> grad() const { return node_->grad; }
  std::span<Scalar> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), Scalar(0));
  }

  bool is_leaf() const { return node_->parents.empty(); }

  /// Same values, cut from the graph.
  Tensor detach() const { return Tensor(node_->shape, node_->value, false); }

  /// Deep copy of the values (and requires_grad flag) into a fresh leaf.
  Tensor clone() const { return Tensor(node_->shape, node_->value, node_->requires_grad); }

  const std::shared_ptr<Node>& node() const { return node_; }

  static Tensor from_node(std::shared_ptr<Node> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

 private:
  std::shared_ptr<Node> node_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

namespace detail {

/// Builds an op result. The graph link is only kept when some input needs a
/// gradient, so eval-mode forwards allocate no backward state.
template <typename Scalar, typename Fn>
Tensor<Scalar> make_result(Shape shape, std::vector<Scalar> value,
                           std::vector<Tensor<Scalar>> inputs, Fn&& backward_fn) {
  auto node = std::make_shared<TensorNode<Scalar>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool any =
      std::any_of(inputs.begin(), inputs.end(), [](const auto& t) { return t.requires_grad(); });
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (auto& t : inputs) node->parents.push_back(t.node());
    node->backward_fn = std::forward<Fn>(backward_fn);
  }
  return Tensor<Scalar>::from_node(std::move(node));
}

}  // namespace detail

/// Reverse pass from a scalar loss. Gradients accumulate into every node
/// that requires one; calling it twice on the same loss is an error.
template <typename Scalar>
void backward(const Tensor<Scalar>& loss) {
  using Node = TensorNode<Scalar>;
  if (!loss) throw std::invalid_argument("backward on empty tensor");
  if (loss.size() != 1) {
    throw DimensionError("backward needs a scalar loss, got shape " + to_string(loss.shape()));
  }
  Node* root = loss.node().get();
  if (root->backward_done) {
    throw std::logic_error("backward called twice on the same graph; rebuild the forward pass");
  }
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order without recursion.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] += Scalar(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) {
      for (auto& p : n->parents) {
        if (p->requires_grad) p->ensure_grad();
      }
      n->backward_fn(*n);
    }
  }
  root->backward_done = true;
}

}  // namespace ccn

#endif  // CCN_TENSOR_HPP
