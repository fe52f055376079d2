#include "dirfocus/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dirfocus/error.hpp"

namespace dirfocus::nn {

GradCheckResult gradcheck(const std::function<Tensor()>& loss_fn, const std::vector<GradCheckTarget>& targets, Rng& rng,
                          const GradCheckOptions& options) {
  for (const auto& t : targets) {
    t.tensor.node().requires_grad = true;
    Tensor(t.tensor).zero_grad();
  }
  const Tensor loss = loss_fn();
  backward(loss);
  std::vector<Eigen::VectorXd> analytic;
  for (const auto& t : targets) analytic.push_back(t.tensor.grad());

  GradCheckResult result;
  NoGradGuard no_grad;
  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
    Tensor t = targets[ti].tensor;
    const Index n = t.size();
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(options.points_per_target)));
    for (Index i : idx) {
      const double saved = t.value()[i];
      t.value()[i] = saved + options.step;
      const double up = loss_fn().item();
      t.value()[i] = saved - options.step;
      const double down = loss_fn().item();
      t.value()[i] = saved;
      const double numeric = (up - down) / (2 * options.step);
      const double a = analytic[ti][i];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), options.rel_floor});
      ++result.points;
      result.max_abs_error = std::max(result.max_abs_error, abs_err);
      if (rel >= result.max_rel_error) {
        result.max_rel_error = rel;
        std::ostringstream os;
        os.precision(10);
        os << targets[ti].name << "[" << i << "]: analytic " << a << " vs numeric " << numeric;
        result.worst = os.str();
      }
    }
  }
  return result;
}

}  // namespace dirfocus::nn
