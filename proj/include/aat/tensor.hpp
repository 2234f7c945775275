#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace aat {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

// One vertex of the dynamic differentiation graph. Non-leaf nodes carry the
// inputs they were computed from and a rule that pushes their gradient back
// into those inputs.
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

}  // namespace detail

// Whether newly executed ops record themselves for backward. Thread-local.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Handle to a dense row-major array that may take part in reverse-mode
// differentiation. Copies share storage, like framework tensors; use clone()
// for an independent copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const T> values() const;
  // Writable view of the storage. Only meaningful for leaves (parameters and
  // inputs); writing into an intermediate does not re-run its producers.
  std::span<T> mutable_values();
  T item() const;
  T operator[](std::size_t i) const { return values()[i]; }

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();

  // New leaf holding a copy of the values, detached from any graph.
  Tensor detach() const;
  // New leaf with copied values and the same requires_grad flag.
  Tensor clone() const;

  const NodePtr& node() const { return node_; }
  static Tensor from_node(NodePtr node);

 private:
  NodePtr node_;
};

// Propagates d(loss)/d(leaf) into every requires_grad leaf reachable from
// `loss`. Leaf gradients accumulate across calls; call zero_grad() between
// steps.
template <typename T>
void backward(const Tensor<T>& loss);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template void backward<float>(const Tensor<float>&);
extern template void backward<double>(const Tensor<double>&);

using Labels = std::vector<int>;

}  // namespace aat
