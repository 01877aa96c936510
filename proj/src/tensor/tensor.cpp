#include "t2d/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace t2d {

namespace {
thread_local bool g_grad_enabled = true;

void check_shape(const Shape& shape) {
  for (int e : shape) {
    if (e <= 0) throw ShapeError("non-positive extent in shape " + shape_str(shape));
  }
}
}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int e : shape) n *= static_cast<std::size_t>(e);
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), Real(0)); }

Tensor Tensor::full(Shape shape, Real value) {
  check_shape(shape);
  std::vector<Real> v(numel(shape), value);
  return from(std::move(shape), std::move(v));
}

Tensor Tensor::from(Shape shape, std::vector<Real> values) {
  check_shape(shape);
  if (values.size() != numel(shape)) {
    throw ShapeError("data length " + std::to_string(values.size()) + " does not match shape " +
                     shape_str(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  return Tensor(std::move(n));
}

Tensor Tensor::parameter(Shape shape, std::vector<Real> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  t.node_->grad.assign(t.node_->value.size(), Real(0));
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
int Tensor::dim(std::size_t i) const { return node_->shape.at(i); }
std::size_t Tensor::size() const { return node_->value.size(); }
std::span<const Real> Tensor::data() const { return node_->value; }
std::span<const Real> Tensor::grad() const { return node_->grad; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }
bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->leaf; }

Real Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

std::span<Real> Tensor::mutable_data() {
  if (!node_->leaf) throw StateError("mutable_data() on a non-leaf tensor");
  return node_->value;
}

std::span<Real> Tensor::mutable_grad() {
  if (node_->grad.size() != node_->value.size()) node_->grad.assign(node_->value.size(), Real(0));
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_->requires_grad) node_->grad.assign(node_->value.size(), Real(0));
}

Tensor Tensor::make_result(Shape shape, std::vector<Real> values, std::vector<Tensor> inputs,
                           BackwardFn backward) {
  Tensor out = from(std::move(shape), std::move(values));
  out.node_->leaf = false;
  if (!g_grad_enabled) return out;
  bool any = std::any_of(inputs.begin(), inputs.end(),
                         [](const Tensor& t) { return t.defined() && t.requires_grad(); });
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->inputs.reserve(inputs.size());
  for (auto& t : inputs) out.node_->inputs.push_back(t.node_);
  out.node_->backward = std::move(backward);
  return out;
}

void Tensor::backward() const {
  if (size() != 1) throw ShapeError("backward() requires a scalar, got " + shape_str(shape()));
  if (node_->consumed) {
    throw StateError("backward() called twice on the same graph; run a fresh forward pass first");
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs before outputs).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && !child->leaf && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : order) n->grad.assign(n->value.size(), Real(0));
  node_->grad[0] = Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->consumed) throw StateError("backward() through an already-consumed graph");
    for (auto& in : n->inputs) {
      if (in->requires_grad && in->grad.size() != in->value.size()) {
        in->grad.assign(in->value.size(), Real(0));
      }
    }
    n->backward(*n);
  }
  // Release the tape; forward values stay readable.
  for (Node* n : order) {
    n->consumed = true;
    n->backward = nullptr;
    n->inputs.clear();
  }
}

}  // namespace t2d
