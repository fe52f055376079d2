#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <utility>

namespace dirfocus::eval {

struct EvalResult {
  Eigen::MatrixXi confusion;      // rows: true class, columns: predicted class
  Eigen::VectorXd per_class_acc;  // NaN for classes absent from the labels
  Eigen::VectorXi n_samples;      // per true class
  double balanced_acc = 0.0;
  int classes_present = 0;
};

/// Macro average of per-class accuracies over all n_class classes.
/// Throws ParameterError when a class has no labelled sample, when lengths
/// differ or when an index falls outside [0, n_class).
EvalResult balanced_accuracy(std::span<const int> predictions, std::span<const int> labels, int n_class);

/// Same average restricted to the classes that occur in `labels`; used for
/// validation sets that may miss a class.
EvalResult balanced_accuracy_present(std::span<const int> predictions, std::span<const int> labels, int n_class);

/// One draw of Binomial(n, p) / n.
double chance_sample(int n, double p, std::uint64_t seed);

/// Central `level` band of Binomial(n, p) / n from the exact distribution.
std::pair<double, double> binomial_band(int n, double p, double level);

}  // namespace dirfocus::eval
