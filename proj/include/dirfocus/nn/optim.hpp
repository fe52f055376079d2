#pragma once

#include <cstdint>
#include <vector>

#include "dirfocus/nn/layers.hpp"

namespace dirfocus::nn {

struct TrainConfig {
  double learning_rate = 5e-4;
  /// Multiplies the learning rate at every epoch boundary; 1 disables it.
  double lr_decay = 1.0;
  double l2_lambda = 1e-4;
  int batch_size = 32;
  int max_epochs = 100;
  /// Epochs without a validation balanced-accuracy improvement before stopping.
  int early_stop_patience = 10;
  /// Epochs without a validation-loss improvement before the rate is halved.
  int plateau_patience = 3;
  double plateau_factor = 0.5;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed list of tensors with the L2 term lambda * w added to
/// each gradient before the moment updates.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double learning_rate, double l2_lambda, AdamOptions options = {});

  void step();
  void zero_grad();
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  long steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Eigen::VectorXd> m_, v_;
  double lr_, l2_;
  AdamOptions opt_;
  long t_ = 0;
};

/// Halves (by `factor`) the learning rate after `patience` epochs without a
/// strict decrease of the monitored loss.
class PlateauScheduler {
 public:
  PlateauScheduler(int patience, double factor) : patience_(patience), factor_(factor) {}
  /// Returns the multiplier to apply now (1 or factor).
  double observe(double loss);

 private:
  int patience_;
  double factor_;
  double best_ = 0;
  bool has_best_ = false;
  int bad_epochs_ = 0;
};

/// Tracks the best score (higher is better) and signals when `patience`
/// epochs have passed without a strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}
  /// Returns true when this observation is a new best.
  bool observe(double score);
  bool should_stop() const { return bad_epochs_ >= patience_; }
  double best() const { return best_; }

 private:
  int patience_;
  double best_ = 0;
  bool has_best_ = false;
  int bad_epochs_ = 0;
};

}  // namespace dirfocus::nn
