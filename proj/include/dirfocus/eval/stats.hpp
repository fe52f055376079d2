#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dirfocus::eval {

struct WilcoxonResult {
  double p_value = 1.0;
  double w_plus = 0.0;  // rank sum of positive differences
  int n_used = 0;       // pairs left after dropping zero differences
  bool exact = true;
  bool all_zero = false;
};

/// Two-sided Wilcoxon signed-rank test of x - y. Zero differences are dropped
/// and ties receive mid-ranks. Exact null distribution for up to 25 non-zero
/// differences (ties included), normal approximation with tie correction above.
/// Throws ParameterError for unequal lengths or fewer than 5 pairs.
WilcoxonResult wilcoxon_signrank(std::span<const double> x, std::span<const double> y);

struct StatTestResult {
  double p_value = 1.0;        // sign-rank p of the observed pairing
  double p95_bootstrap = 1.0;  // 95th percentile over bootstrap replicates
  int n_bootstrap = 0;
  bool greater = false;  // mean of the tested accuracies exceeds the baseline mean
  bool significant = false;
};

/// Pairs each per-fold accuracy with a baseline draw; every replicate
/// resamples the baseline vector with replacement (stream r of `seed`) and
/// recomputes the sign-rank p. Significant when the 95th percentile is below
/// `alpha` and the accuracies lie above the baseline.
/// Throws ParameterError for fewer than 5 folds, mismatched lengths or
/// n_boot < 1000.
StatTestResult bootstrap_significance(std::span<const double> per_fold_acc, std::span<const double> baseline,
                                      int n_boot, std::uint64_t seed, double alpha = 0.05);

/// Matched chance draws: Binomial(test_sizes[i], p) / test_sizes[i], draw i
/// from stream i of `seed`.
std::vector<double> chance_baseline(std::span<const int> test_sizes, double p, std::uint64_t seed);

struct DualNullResult {
  WilcoxonResult versus_reference;  // tested model vs the paired reference model
  StatTestResult versus_chance;     // tested model vs the bootstrapped binary decoder
  bool reference_greater = false;
  bool significant = false;
  double p_value = 1.0;  // the larger of the two decision p values
};

/// Rejects only when the tested model beats both the reference model (paired
/// sign-rank) and the binary random decoder (bootstrap p95).
DualNullResult dual_null_test(std::span<const double> model_acc, std::span<const double> reference_acc,
                              std::span<const double> binary_chance_acc, int n_boot, std::uint64_t seed,
                              double alpha = 0.05);

/// "***" below 0.001, "**" below 0.01, "*" below 0.05, else "".
std::string stars(double p);

}  // namespace dirfocus::eval
