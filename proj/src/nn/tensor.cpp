#include "dirfocus/nn/tensor.hpp"

#include <unordered_set>

#include "dirfocus/error.hpp"

namespace dirfocus::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Eigen::VectorXd& Node::grad_buffer() {
  if (grad.size() != value.size()) grad = Eigen::VectorXd::Zero(value.size());
  return grad;
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return from(shape, Eigen::VectorXd::Zero(numel(shape)), requires_grad);
}

Tensor Tensor::from(const Shape& shape, Eigen::VectorXd values, bool requires_grad) {
  if (numel(shape) != values.size()) {
    throw ShapeError("tensor of shape " + shape_string(shape) + " needs " + std::to_string(numel(shape)) +
                     " values, got " + std::to_string(values.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({}, Eigen::VectorXd::Constant(1, v), requires_grad);
}

Node& Tensor::node() const {
  if (!node_) throw ParameterError("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

Index Tensor::dim(Index i) const {
  const auto& s = shape();
  if (i < 0) i += static_cast<Index>(s.size());
  if (i < 0 || i >= static_cast<Index>(s.size())) throw ShapeError("axis out of range for shape " + shape_string(s));
  return s[static_cast<std::size_t>(i)];
}

const Eigen::VectorXd& Tensor::value() const { return node().value; }
Eigen::VectorXd& Tensor::value() { return node().value; }

const Eigen::VectorXd& Tensor::grad() const { return node().grad_buffer(); }

bool Tensor::requires_grad() const { return node().requires_grad; }
void Tensor::set_requires_grad(bool on) { node().requires_grad = on; }

void Tensor::zero_grad() {
  auto& n = node();
  if (n.grad.size() == n.value.size()) n.grad.setZero();
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on a tensor of shape " + shape_string(shape()));
  return value()[0];
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_result(Shape shape, Eigen::VectorXd value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& p : parents) any = any || p.node().requires_grad;
    if (any) {
      node->requires_grad = true;
      for (auto& p : parents) node->parents.push_back(p.ptr());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ParameterError("backward on an undefined tensor; run a forward pass first");
  if (loss.size() != 1) throw ShapeError("backward needs a scalar loss, got shape " + shape_string(loss.shape()));
  Node& root = loss.node();
  if (!root.requires_grad) throw ParameterError("backward on a tensor with no recorded graph; run a forward pass first");

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{&root, 0}};
  visited.insert(&root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root.grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

void check_finite(const Tensor& t, const std::string& where) {
  if (!t.value().allFinite()) throw NumericalError("non-finite value in " + where);
}

}  // namespace dirfocus::nn
