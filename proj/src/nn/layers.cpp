#include "dirfocus/nn/layers.hpp"

#include <cmath>

#include "dirfocus/error.hpp"

namespace dirfocus::nn {

Tensor& ParameterStore::add(const std::string& name, Tensor tensor, bool trainable) {
  if (contains(name)) throw ParameterError("duplicate parameter name " + name);
  tensor.set_requires_grad(trainable);
  params_.push_back({name, std::move(tensor), trainable});
  return params_.back().tensor;
}

Tensor& ParameterStore::get(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p.tensor;
  throw ParameterError("unknown parameter " + name);
}

const Tensor& ParameterStore::get(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.tensor;
  throw ParameterError("unknown parameter " + name);
}

bool ParameterStore::contains(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return true;
  return false;
}

std::vector<Tensor> ParameterStore::trainable() const {
  std::vector<Tensor> out;
  for (const auto& p : params_)
    if (p.trainable) out.push_back(p.tensor);
  return out;
}

Index ParameterStore::trainable_count() const {
  Index n = 0;
  for (const auto& p : params_)
    if (p.trainable) n += p.tensor.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

ParameterStore ParameterStore::clone() const {
  ParameterStore out;
  for (const auto& p : params_) out.add(p.name, Tensor::from(p.tensor.shape(), p.tensor.value()), p.trainable);
  return out;
}

void ParameterStore::load_values(const ParameterStore& other) {
  if (other.params_.size() != params_.size()) throw ShapeError("parameter stores differ in size");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& src = other.params_[i];
    auto& dst = params_[i];
    if (src.name != dst.name || src.tensor.shape() != dst.tensor.shape()) {
      throw ShapeError("parameter " + dst.name + " " + shape_string(dst.tensor.shape()) + " does not match " +
                       src.name + " " + shape_string(src.tensor.shape()));
    }
    dst.tensor.value() = src.tensor.value();
  }
}

Eigen::VectorXd kaiming_uniform(Index count, Index fan_in, Rng& rng) {
  if (fan_in < 1) throw ParameterError("fan_in must be >= 1");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Eigen::VectorXd v(count);
  for (auto& x : v) x = u(rng);
  return v;
}

Linear::Linear(ParameterStore& store, const std::string& name, Index in, Index out, Rng& rng, bool bias)
    : in_(in), out_(out) {
  weight = store.add(name + ".weight", Tensor::from({out, in}, kaiming_uniform(out * in, in, rng)));
  if (bias) this->bias = store.add(name + ".bias", Tensor::zeros({out}));
}

Tensor Linear::forward(const Tensor& x) const { return linear(x, weight, bias); }

Conv::Conv(ParameterStore& store, const std::string& name, Index in_channels, Index out_channels,
           std::vector<Index> kernel, Rng& rng, std::vector<Index> padding, bool bias)
    : padding_(std::move(padding)) {
  Shape shape{out_channels, in_channels};
  Index fan_in = in_channels;
  for (Index k : kernel) {
    shape.push_back(k);
    fan_in *= k;
  }
  weight = store.add(name + ".weight", Tensor::from(shape, kaiming_uniform(numel(shape), fan_in, rng)));
  if (bias) this->bias = store.add(name + ".bias", Tensor::zeros({out_channels}));
}

Tensor Conv::forward(const Tensor& x) const { return conv(x, weight, bias, {}, padding_); }

BatchNorm::BatchNorm(ParameterStore& store, const std::string& name, Index channels, double momentum, double eps)
    : momentum_(momentum), eps_(eps) {
  gamma = store.add(name + ".gamma", Tensor::from({channels}, Eigen::VectorXd::Ones(channels)));
  beta = store.add(name + ".beta", Tensor::zeros({channels}));
  running_mean = store.add(name + ".running_mean", Tensor::zeros({channels}), false);
  running_var = store.add(name + ".running_var", Tensor::from({channels}, Eigen::VectorXd::Ones(channels)), false);
}

Tensor BatchNorm::forward(const Tensor& x, bool training) {
  return batch_norm(x, gamma, beta, running_mean, running_var, training, momentum_, eps_);
}

}  // namespace dirfocus::nn
