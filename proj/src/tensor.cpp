#include "jiq/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include "jiq/error.hpp"

namespace jiq {

namespace {

std::atomic<std::uint64_t> g_next_id{1};
thread_local bool g_grad_enabled = true;

template <typename T>
void check_finite_impl(std::span<const T> v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      std::ostringstream os;
      os << "non-finite value " << v[i] << " at index " << i << " in " << what;
      throw NumericError(os.str());
    }
  }
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int e : shape) {
    if (e < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

void check_finite(std::span<const float> v, const char* what) { check_finite_impl(v, what); }
void check_finite(std::span<const double> v, const char* what) { check_finite_impl(v, what); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_mode_enabled() { return g_grad_enabled; }

template <typename T>
Tensor<T> Tensor<T>::constant(Shape shape, std::vector<T> values) {
  if (numel(shape) != values.size()) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                     shape_str(shape));
  }
  check_finite(std::span<const T>(values), "constant");
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->id = g_next_id.fetch_add(1);
  return Tensor(std::move(n));
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape) {
  std::vector<T> v(numel(shape), T(0));
  return constant(std::move(shape), std::move(v));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  std::vector<T> v(numel(shape), value);
  return constant(std::move(shape), std::move(v));
}

template <typename T>
Tensor<T> Tensor<T>::parameter(Shape shape, std::vector<T> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::from_op(Shape shape, std::vector<T> values, std::vector<Tensor> inputs,
                             std::function<void(Node<T>&)> backward_fn, const char* op_name) {
  if (numel(shape) != values.size()) {
    throw ShapeError(std::string(op_name) + ": produced " + std::to_string(values.size()) +
                     " values for shape " + shape_str(shape));
  }
  check_finite(std::span<const T>(values), op_name);
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->id = g_next_id.fetch_add(1);
  if (g_grad_enabled) {
    bool any = std::any_of(inputs.begin(), inputs.end(),
                           [](const Tensor& t) { return t.defined() && t.requires_grad(); });
    if (any) {
      n->requires_grad = true;
      n->inputs.reserve(inputs.size());
      for (auto& t : inputs) n->inputs.push_back(t.node_);
      n->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor(std::move(n));
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

template <typename T>
ComputeGraph<T> ComputeGraph<T>::from(const Tensor<T>& root) {
  ComputeGraph g;
  std::unordered_set<const Node<T>*> seen;
  std::vector<Node<T>*> stack{root.node()};
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    g.nodes_.push_back(n);
    for (auto& in : n->inputs) {
      if (in && in->requires_grad) stack.push_back(in.get());
    }
  }
  std::sort(g.nodes_.begin(), g.nodes_.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->id < b->id; });
  return g;
}

template <typename T>
bool ComputeGraph<T>::contains(const Node<T>* n) const {
  return std::binary_search(nodes_.begin(), nodes_.end(), n,
                            [](const Node<T>* a, const Node<T>* b) { return a->id < b->id; });
}

template <typename T>
std::vector<std::size_t> backward(const Tensor<T>& loss, std::span<const Tensor<T>> params,
                                  bool verbose) {
  if (loss.size() != 1) throw ShapeError("backward() needs a scalar loss, got " + shape_str(loss.shape()));
  std::vector<std::size_t> disconnected;
  if (!loss.requires_grad()) {
    for (std::size_t i = 0; i < params.size(); ++i) disconnected.push_back(i);
  } else {
    auto graph = ComputeGraph<T>::from(loss);
    loss.node()->grad_buffer()[0] += T(1);
    const auto& nodes = graph.nodes();
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
      Node<T>* n = *it;
      if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!graph.contains(params[i].node())) disconnected.push_back(i);
    }
  }
  for (std::size_t i : disconnected) {
    params[i].node()->grad_buffer();
    if (verbose) {
      std::cerr << "backward: parameter #" << i << " " << shape_str(params[i].shape())
                << " is not reachable from the loss; gradient set to zero\n";
    }
  }
  return disconnected;
}

template class Tensor<float>;
template class Tensor<double>;
template class ComputeGraph<float>;
template class ComputeGraph<double>;
template std::vector<std::size_t> backward(const Tensor<float>&, std::span<const Tensor<float>>, bool);
template std::vector<std::size_t> backward(const Tensor<double>&, std::span<const Tensor<double>>, bool);

}  // namespace jiq
