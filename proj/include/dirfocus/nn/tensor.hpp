#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace dirfocus::nn {

using Eigen::Index;
using Shape = std::vector<Index>;

Index numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Graph node: row-major values, a lazily allocated gradient and the closure
/// that pushes this node's gradient to its parents.
struct Node {
  Shape shape;
  Eigen::VectorXd value;
  Eigen::VectorXd grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Eigen::VectorXd& grad_buffer();
};

/// Handle to a node. Copies share the node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor from(const Shape& shape, Eigen::VectorXd values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  Index dim(Index i) const;
  Index rank() const { return static_cast<Index>(shape().size()); }
  Index size() const { return value().size(); }

  const Eigen::VectorXd& value() const;
  Eigen::VectorXd& value();
  /// Gradient accumulated by backward(); zeros when nothing has flowed yet.
  const Eigen::VectorXd& grad() const;
  bool requires_grad() const;
  void set_requires_grad(bool on);
  void zero_grad();
  double item() const;

  Node& node() const;
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// True when ops record the graph (the default).
bool grad_enabled();

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds the output node of an op. The node records `parents` and
/// `backward_fn` only when recording is on and some parent needs a gradient.
Tensor make_result(Shape shape, Eigen::VectorXd value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward_fn);

/// Reverse-mode accumulation from a scalar loss into every reachable node
/// that requires a gradient. Throws when the loss is undefined, not a scalar
/// or carries no recorded graph.
void backward(const Tensor& loss);

/// Throws NumericalError naming `where` if any value is NaN or Inf.
void check_finite(const Tensor& t, const std::string& where);

}  // namespace dirfocus::nn
