#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dirfocus/nn/tensor.hpp"
#include "dirfocus/rng.hpp"

namespace dirfocus::nn {

struct GradCheckTarget {
  std::string name;
  Tensor tensor;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  int points = 0;
  std::string worst;  // "<name>[index]: analytic vs numeric"
};

struct GradCheckOptions {
  double step = 1e-5;
  int points_per_target = 10;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double rel_floor = 1e-6;
};

/// Compares reverse-mode gradients of the scalar returned by `loss_fn`
/// against central differences at randomly chosen entries of each target.
/// `loss_fn` must be a deterministic function of the target values.
GradCheckResult gradcheck(const std::function<Tensor()>& loss_fn, const std::vector<GradCheckTarget>& targets, Rng& rng,
                          const GradCheckOptions& options = {});

}  // namespace dirfocus::nn
