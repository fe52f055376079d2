#include "dirfocus/eval/metrics.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "dirfocus/error.hpp"
#include "dirfocus/rng.hpp"

namespace dirfocus::eval {

namespace {

EvalResult tally(std::span<const int> predictions, std::span<const int> labels, int n_class) {
  if (n_class < 1) throw ParameterError("n_class must be >= 1");
  if (predictions.size() != labels.size()) {
    throw ParameterError(std::to_string(predictions.size()) + " predictions for " + std::to_string(labels.size()) +
                         " labels");
  }
  EvalResult r;
  r.confusion = Eigen::MatrixXi::Zero(n_class, n_class);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predictions[i];
    if (y < 0 || y >= n_class || p < 0 || p >= n_class) {
      throw ParameterError("class index outside [0, " + std::to_string(n_class) + ") at position " + std::to_string(i));
    }
    ++r.confusion(y, p);
  }
  r.n_samples = r.confusion.rowwise().sum();
  r.per_class_acc = Eigen::VectorXd::Constant(n_class, std::numeric_limits<double>::quiet_NaN());
  double total = 0;
  for (int c = 0; c < n_class; ++c) {
    if (r.n_samples[c] == 0) continue;
    r.per_class_acc[c] = static_cast<double>(r.confusion(c, c)) / r.n_samples[c];
    total += r.per_class_acc[c];
    ++r.classes_present;
  }
  r.balanced_acc = r.classes_present ? total / r.classes_present : 0.0;
  return r;
}

}  // namespace

EvalResult balanced_accuracy(std::span<const int> predictions, std::span<const int> labels, int n_class) {
  auto r = tally(predictions, labels, n_class);
  for (int c = 0; c < n_class; ++c)
    if (r.n_samples[c] == 0) throw ParameterError("class " + std::to_string(c) + " has no labelled sample");
  return r;
}

EvalResult balanced_accuracy_present(std::span<const int> predictions, std::span<const int> labels, int n_class) {
  auto r = tally(predictions, labels, n_class);
  if (r.classes_present == 0) throw ParameterError("no labelled samples");
  return r;
}

double chance_sample(int n, double p, std::uint64_t seed) {
  if (n < 1) throw ParameterError("chance sample needs n >= 1");
  if (!(p > 0 && p < 1)) throw ParameterError("chance level must lie in (0, 1)");
  Rng rng(seed);
  std::binomial_distribution<int> d(n, p);
  return static_cast<double>(d(rng)) / n;
}

std::pair<double, double> binomial_band(int n, double p, double level) {
  if (n < 1) throw ParameterError("binomial band needs n >= 1");
  if (!(p > 0 && p < 1) || !(level > 0 && level < 1)) throw ParameterError("p and level must lie in (0, 1)");
  const double tail = (1 - level) / 2;
  auto pmf = [&](int k) {
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) +
                    (n - k) * std::log1p(-p));
  };
  int lo = 0;
  for (double cdf = pmf(0); cdf < tail && lo < n; cdf += pmf(++lo)) {
  }
  int hi = n;
  for (double sf = pmf(n); sf < tail && hi > 0; sf += pmf(--hi)) {
  }
  return {static_cast<double>(lo) / n, static_cast<double>(hi) / n};
}

}  // namespace dirfocus::eval
