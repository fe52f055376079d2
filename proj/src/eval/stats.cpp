#include "dirfocus/eval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dirfocus/error.hpp"
#include "dirfocus/eval/metrics.hpp"
#include "dirfocus/rng.hpp"

namespace dirfocus::eval {

namespace {

constexpr int kExactLimit = 25;

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

WilcoxonResult wilcoxon_signrank(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ParameterError("sign-rank test needs paired samples of equal length");
  if (x.size() < 5) throw ParameterError("sign-rank test needs at least 5 pairs");

  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != y[i]) d.push_back(x[i] - y[i]);
  WilcoxonResult r;
  r.n_used = static_cast<int>(d.size());
  if (d.empty()) {
    r.all_zero = true;
    return r;
  }

  // Doubled mid-ranks stay integral.
  const int n = r.n_used;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<int> rank2(n);
  double tie_term = 0;
  for (int i = 0; i < n;) {
    int j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const int t = j - i + 1;
    for (int k = i; k <= j; ++k) rank2[order[k]] = (i + 1) + (j + 1);
    tie_term += static_cast<double>(t) * t * t - t;
    i = j + 1;
  }
  int w2 = 0;
  for (int i = 0; i < n; ++i)
    if (d[i] > 0) w2 += rank2[i];
  r.w_plus = w2 / 2.0;

  if (n <= kExactLimit) {
    const int total = std::accumulate(rank2.begin(), rank2.end(), 0);
    std::vector<double> count(total + 1, 0.0);
    count[0] = 1;
    for (int rk : rank2)
      for (int s = total; s >= rk; --s) count[s] += count[s - rk];
    const double all = std::ldexp(1.0, n);
    double lower = 0, upper = 0;
    for (int s = 0; s <= total; ++s) {
      if (s <= w2) lower += count[s];
      if (s >= w2) upper += count[s];
    }
    r.p_value = std::min(1.0, 2 * std::min(lower, upper) / all);
  } else {
    r.exact = false;
    const double mu = n * (n + 1) / 4.0;
    const double var = n * (n + 1) * (2.0 * n + 1) / 24.0 - tie_term / 48.0;
    const double z = (r.w_plus - mu) / std::sqrt(var);
    r.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
  }
  return r;
}

StatTestResult bootstrap_significance(std::span<const double> per_fold_acc, std::span<const double> baseline,
                                      int n_boot, std::uint64_t seed, double alpha) {
  if (per_fold_acc.size() < 5) throw ParameterError("bootstrap significance needs at least 5 folds");
  if (baseline.size() != per_fold_acc.size()) throw ParameterError("baseline needs one draw per fold");
  if (n_boot < 1000) throw ParameterError("bootstrap needs at least 1000 replicates");

  StatTestResult r;
  r.n_bootstrap = n_boot;
  r.p_value = wilcoxon_signrank(per_fold_acc, baseline).p_value;
  const std::size_t m = baseline.size();
  std::vector<double> ps(static_cast<std::size_t>(n_boot));
  std::vector<double> resampled(m);
  for (int b = 0; b < n_boot; ++b) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(b));
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    for (auto& v : resampled) v = baseline[pick(rng)];
    ps[static_cast<std::size_t>(b)] = wilcoxon_signrank(per_fold_acc, resampled).p_value;
  }
  std::sort(ps.begin(), ps.end());
  // Nearest-rank percentile.
  const auto k = static_cast<std::size_t>(std::ceil(0.95 * n_boot)) - 1;
  r.p95_bootstrap = ps[k];
  r.greater = mean_of(per_fold_acc) > mean_of(baseline);
  r.significant = r.greater && r.p95_bootstrap < alpha;
  return r;
}

std::vector<double> chance_baseline(std::span<const int> test_sizes, double p, std::uint64_t seed) {
  std::vector<double> out;
  for (std::size_t i = 0; i < test_sizes.size(); ++i) out.push_back(chance_sample(test_sizes[i], p, derive_seed(seed, i)));
  return out;
}

DualNullResult dual_null_test(std::span<const double> model_acc, std::span<const double> reference_acc,
                              std::span<const double> binary_chance_acc, int n_boot, std::uint64_t seed,
                              double alpha) {
  DualNullResult r;
  r.versus_reference = wilcoxon_signrank(model_acc, reference_acc);
  r.reference_greater = mean_of(model_acc) > mean_of(reference_acc);
  r.versus_chance = bootstrap_significance(model_acc, binary_chance_acc, n_boot, seed, alpha);
  r.p_value = std::max(r.versus_reference.p_value, r.versus_chance.p95_bootstrap);
  r.significant = r.reference_greater && r.versus_reference.p_value < alpha && r.versus_chance.significant;
  return r;
}

std::string stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

}  // namespace dirfocus::eval
