#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace jiq {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::uint64_t id = 0;  // creation order; a valid topological order
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

/// Handle to a dense row-major tensor that may participate in reverse-mode
/// differentiation. Copies share storage; values are immutable except through
/// mutable_values(), which only the optimizer and checkpoint loader use.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<T> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, T v);
  static Tensor parameter(Shape shape, std::vector<T> values);

  // Result of an op. Records inputs and backward_fn only when some input
  // requires grad and grad mode is enabled.
  static Tensor from_op(Shape shape, std::vector<T> values, std::vector<Tensor> inputs,
                        std::function<void(Node<T>&)> backward_fn, const char* op_name);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const T> values() const { return node_->value; }
  std::span<T> mutable_values() { return node_->value; }
  const T* data() const { return node_->value.data(); }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.clear(); }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}
  std::shared_ptr<Node<T>> node_;
};

/// Disables graph recording on the current thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

/// Topologically ordered record of the nodes reachable from a root.
template <typename T>
class ComputeGraph {
 public:
  static ComputeGraph from(const Tensor<T>& root);
  const std::vector<Node<T>*>& nodes() const { return nodes_; }  // inputs first
  bool contains(const Node<T>* n) const;

 private:
  std::vector<Node<T>*> nodes_;
};

/// Populates .grad for every requires_grad tensor reachable from the scalar
/// `loss`. Tensors in `params` that the loss does not reach receive an explicit
/// zero gradient; their indices are returned (and printed when verbose).
template <typename T>
std::vector<std::size_t> backward(const Tensor<T>& loss, std::span<const Tensor<T>> params = {},
                                  bool verbose = false);

void check_finite(std::span<const float> v, const char* what);
void check_finite(std::span<const double> v, const char* what);

}  // namespace jiq
