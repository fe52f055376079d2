#include "dirfocus/nn/optim.hpp"

#include <cmath>

#include "dirfocus/error.hpp"

namespace dirfocus::nn {

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ParameterError("learning_rate must be positive");
  if (!(lr_decay > 0 && lr_decay <= 1)) throw ParameterError("lr_decay must lie in (0, 1]");
  if (!(l2_lambda >= 0)) throw ParameterError("l2_lambda must be >= 0");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (max_epochs < 1) throw ParameterError("max_epochs must be >= 1");
  if (early_stop_patience < 1) throw ParameterError("early_stop_patience must be >= 1");
  if (plateau_patience < 1) throw ParameterError("plateau_patience must be >= 1");
  if (!(plateau_factor > 0 && plateau_factor <= 1)) throw ParameterError("plateau_factor must lie in (0, 1]");
}

Adam::Adam(std::vector<Tensor> params, double learning_rate, double l2_lambda, AdamOptions options)
    : params_(std::move(params)), lr_(learning_rate), l2_(l2_lambda), opt_(options) {
  if (!(learning_rate >= 0)) throw ParameterError("learning rate must be >= 0");
  for (const auto& p : params_) {
    m_.push_back(Eigen::VectorXd::Zero(p.size()));
    v_.push_back(Eigen::VectorXd::Zero(p.size()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    const Eigen::VectorXd g = p.grad() + l2_ * p.value();
    m_[i] = opt_.beta1 * m_[i] + (1 - opt_.beta1) * g;
    v_[i] = opt_.beta2 * v_[i] + (1 - opt_.beta2) * g.cwiseAbs2();
    p.value().array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + opt_.eps);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double PlateauScheduler::observe(double loss) {
  if (!has_best_ || loss < best_) {
    best_ = loss;
    has_best_ = true;
    bad_epochs_ = 0;
    return 1.0;
  }
  if (++bad_epochs_ >= patience_) {
    bad_epochs_ = 0;
    return factor_;
  }
  return 1.0;
}

bool EarlyStopping::observe(double score) {
  if (!has_best_ || score > best_) {
    best_ = score;
    has_best_ = true;
    bad_epochs_ = 0;
    return true;
  }
  ++bad_epochs_;
  return false;
}

}  // namespace dirfocus::nn
