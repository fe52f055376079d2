#pragma once

#include <string>
#include <vector>

#include "dirfocus/nn/ops.hpp"
#include "dirfocus/rng.hpp"

namespace dirfocus::nn {

/// A named tensor owned by a model. Buffers (batch-norm running statistics)
/// are stored with trainable = false.
struct Parameter {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

class ParameterStore {
 public:
  Tensor& add(const std::string& name, Tensor tensor, bool trainable = true);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Parameter>& entries() { return params_; }
  const std::vector<Parameter>& entries() const { return params_; }
  std::vector<Tensor> trainable() const;
  Index trainable_count() const;
  void zero_grad();

  /// Deep copy of every value (same names, order and flags).
  ParameterStore clone() const;
  /// Copies values from a store with identical names and shapes.
  void load_values(const ParameterStore& other);

 private:
  std::vector<Parameter> params_;
};

/// Kaiming-uniform draw: U(-b, b) with b = sqrt(6 / fan_in).
Eigen::VectorXd kaiming_uniform(Index count, Index fan_in, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, Index in, Index out, Rng& rng, bool bias = true);
  Tensor forward(const Tensor& x) const;
  Index in_features() const { return in_; }
  Index out_features() const { return out_; }
  Tensor weight, bias;

 private:
  Index in_ = 0, out_ = 0;
};

class Conv {
 public:
  Conv() = default;
  /// `kernel` lists the spatial kernel extents (1-3 axes).
  Conv(ParameterStore& store, const std::string& name, Index in_channels, Index out_channels, std::vector<Index> kernel,
       Rng& rng, std::vector<Index> padding = {}, bool bias = true);
  Tensor forward(const Tensor& x) const;
  Tensor weight, bias;

 private:
  std::vector<Index> padding_;
};

class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(ParameterStore& store, const std::string& name, Index channels, double momentum = 0.1, double eps = 1e-5);
  Tensor forward(const Tensor& x, bool training);
  Tensor gamma, beta, running_mean, running_var;

 private:
  double momentum_ = 0.1, eps_ = 1e-5;
};

}  // namespace dirfocus::nn
