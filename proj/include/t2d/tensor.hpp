#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace t2d {

#ifdef T2D_USE_FLOAT32
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<int>;

/// Raised when extents of operands do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised on misuse of the gradient tape (e.g. a second backward pass).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;

/// Shared handle to a node of the computation graph.
///
/// Values are written once by the op that creates the tensor. Leaf tensors
/// created with `parameter()` own a gradient buffer that backward passes
/// accumulate into; the optimizer is the only writer of their values.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, Real value);
  static Tensor from(Shape shape, std::vector<Real> values);
  static Tensor parameter(Shape shape, std::vector<Real> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int dim(std::size_t i) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;

  std::span<const Real> data() const;
  std::span<const Real> grad() const;
  bool has_grad() const;
  bool requires_grad() const;
  bool is_leaf() const;
  Real item() const;

  /// Mutable access for leaves only (parameter updates, test perturbations).
  std::span<Real> mutable_data();
  std::span<Real> mutable_grad();
  void zero_grad();

  /// Reverse-mode sweep from a scalar. Parameter gradients accumulate.
  void backward() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

  using BackwardFn = std::function<void(Node&)>;

  /// Construct the result of an op. When grad mode is off or no input tracks
  /// gradients the backward closure is dropped.
  static Tensor make_result(Shape shape, std::vector<Real> values,
                            std::vector<Tensor> inputs, BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;
  bool requires_grad = false;
  bool leaf = true;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> inputs;
  Tensor::BackwardFn backward;

  Node* input(std::size_t i) const { return inputs[i].get(); }
  bool wants_grad(std::size_t i) const { return inputs[i]->requires_grad; }
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace t2d
