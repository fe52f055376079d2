#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dirfocus/error.hpp"
#include "dirfocus/eval/metrics.hpp"
#include "dirfocus/eval/stats.hpp"
#include "dirfocus/rng.hpp"

using namespace dirfocus;
using namespace dirfocus::eval;
using Catch::Approx;

namespace {

// Exact two-sided p by enumerating every sign pattern of the non-zero differences.
double brute_force_p(const std::vector<double>& d) {
  std::vector<double> a;
  for (double v : d)
    if (v != 0) a.push_back(v);
  const int n = static_cast<int>(a.size());
  std::vector<double> rank(n);
  for (int i = 0; i < n; ++i) {
    int less = 0, equal = 0;
    for (int j = 0; j < n; ++j) {
      if (std::abs(a[j]) < std::abs(a[i])) ++less;
      if (std::abs(a[j]) == std::abs(a[i])) ++equal;
    }
    rank[i] = less + (equal + 1) / 2.0;
  }
  double observed = 0;
  for (int i = 0; i < n; ++i)
    if (a[i] > 0) observed += rank[i];
  long lower = 0, upper = 0;
  for (long mask = 0; mask < (1L << n); ++mask) {
    double w = 0;
    for (int i = 0; i < n; ++i)
      if (mask >> i & 1) w += rank[i];
    if (w <= observed + 1e-9) ++lower;
    if (w >= observed - 1e-9) ++upper;
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / std::ldexp(1.0, n));
}

std::vector<double> zeros(std::size_t n) { return std::vector<double>(n, 0.0); }

}  // namespace

TEST_CASE("balanced accuracy examples", "[eval]") {
  const std::vector<int> y = {0, 1, 2, 2, 1, 0};
  REQUIRE(balanced_accuracy(y, y, 3).balanced_acc == 1.0);

  // Class 0 perfect, class 1 always wrong; sizes deliberately unequal.
  const std::vector<int> labels = {0, 0, 0, 0, 0, 0, 0, 1, 1};
  const std::vector<int> pred = {0, 0, 0, 0, 0, 0, 0, 0, 0};
  const auto r = balanced_accuracy(pred, labels, 2);
  REQUIRE(r.balanced_acc == 0.5);
  REQUIRE(r.confusion(1, 0) == 2);
  REQUIRE(r.n_samples == Eigen::Vector2i(7, 2));

  REQUIRE_THROWS_AS(balanced_accuracy(std::vector<int>{0, 0}, std::vector<int>{0, 0}, 2), ParameterError);
  REQUIRE(balanced_accuracy_present(std::vector<int>{0, 1}, std::vector<int>{0, 0}, 2).balanced_acc == 0.5);
  REQUIRE_THROWS_AS(balanced_accuracy(std::vector<int>{0}, std::vector<int>{0, 1}, 2), ParameterError);
  REQUIRE_THROWS_AS(balanced_accuracy(std::vector<int>{3}, std::vector<int>{0}, 2), ParameterError);
}

TEST_CASE("balanced accuracy properties", "[eval]") {
  Rng rng(3);
  std::uniform_int_distribution<int> cls(0, 5);
  std::vector<int> labels, pred;
  for (int c = 0; c < 6; ++c)
    for (int k = 0; k < 20; ++k) {
      labels.push_back(c);
      pred.push_back(k % 3 == 0 ? c : cls(rng));
    }
  const auto base = balanced_accuracy(pred, labels, 6);
  // Balanced counts: macro average equals plain accuracy exactly.
  int correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += pred[i] == labels[i];
  REQUIRE(base.balanced_acc == Approx(static_cast<double>(correct) / labels.size()).epsilon(1e-15));
  REQUIRE(base.confusion.rowwise().sum() == base.n_samples);

  std::vector<int> perm = {3, 5, 0, 1, 4, 2};
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> l2, p2;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      l2.push_back(perm[labels[i]]);
      p2.push_back(perm[pred[i]]);
    }
    REQUIRE(balanced_accuracy(p2, l2, 6).balanced_acc == Approx(base.balanced_acc).epsilon(1e-15));
  }
}

TEST_CASE("uniform random decoder sits at chance", "[eval]") {
  Rng rng(4);
  std::uniform_int_distribution<int> cls(0, 13);
  std::vector<int> labels, pred;
  for (int i = 0; i < 10000; ++i) {
    labels.push_back(i % 14);
    pred.push_back(cls(rng));
  }
  const double acc = balanced_accuracy(pred, labels, 14).balanced_acc;
  const double p = 1.0 / 14;
  REQUIRE(std::abs(acc - p) < 3 * std::sqrt(p * (1 - p) / 10000));
}

TEST_CASE("binomial band and chance draws", "[eval]") {
  const auto [lo, hi] = binomial_band(1000, 0.5, 0.99);
  // Normal approximation: 0.5 +- 2.576 * sqrt(0.25 / 1000) = [0.459, 0.541].
  REQUIRE(lo == Approx(0.459).margin(0.002));
  REQUIRE(hi == Approx(0.541).margin(0.002));
  REQUIRE(chance_sample(500, 0.3, 7) == chance_sample(500, 0.3, 7));
  double s = 0;
  for (int i = 0; i < 2000; ++i) s += chance_sample(100, 0.25, static_cast<std::uint64_t>(i));
  REQUIRE(s / 2000 == Approx(0.25).margin(0.005));
  REQUIRE_THROWS_AS(chance_sample(10, 1.0, 1), ParameterError);
}

TEST_CASE("sign-rank exact p matches full enumeration", "[eval][wilcoxon]") {
  Rng rng(5);
  std::normal_distribution<double> noise(0.3, 1.0);
  for (int rep = 0; rep < 30; ++rep) {
    const int n = 5 + rep % 10;
    std::vector<double> d(n);
    for (auto& v : d) v = std::round(noise(rng) * 2) / 2;  // coarse grid forces ties and zeros
    if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0; })) d[0] = 1;
    INFO("rep " << rep);
    REQUIRE(wilcoxon_signrank(d, zeros(d.size())).p_value == Approx(brute_force_p(d)).epsilon(1e-12));
  }
}

TEST_CASE("sign-rank frozen reference values", "[eval][wilcoxon]") {
  const std::vector<double> d = {1, 2, 3, 4, 5, 6, -7, 8, 9, 10};
  const auto r = wilcoxon_signrank(d, zeros(d.size()));
  REQUIRE(r.exact);
  REQUIRE(r.w_plus == 48);
  REQUIRE(r.p_value == Approx(0.037109375).epsilon(1e-12));

  const std::vector<double> x = {-0.5, -0.15, 0.2, 0.55, 0.9, 1.25, -0.1, 0.25, 0.6, 0.95, 1.3, 1.65, 0.3, 0.65, 1.0,
                                 1.35, 1.7, 2.05, 0.7, 1.05, 1.4, 1.75, 2.1, 0.75, 1.1, 1.45, 1.8, 2.15, 2.5, 1.15};
  const auto big = wilcoxon_signrank(x, zeros(x.size()));
  REQUIRE_FALSE(big.exact);
  REQUIRE(big.p_value == Approx(4.285685869189864e-06).epsilon(1e-9));

  std::vector<double> tied;
  for (double v : x) tied.push_back(std::nearbyint(v) / 2 - 0.2);  // round half to even
  REQUIRE(wilcoxon_signrank(tied, zeros(tied.size())).p_value == Approx(8.784005977763373e-06).epsilon(1e-9));
}

TEST_CASE("sign-rank edge cases", "[eval][wilcoxon]") {
  const std::vector<double> a = {0.1, 0.2, 0.3, 0.4, 0.5};
  const auto same = wilcoxon_signrank(a, a);
  REQUIRE(same.p_value == 1.0);
  REQUIRE(same.all_zero);
  REQUIRE_THROWS_AS(wilcoxon_signrank(std::vector<double>{1, 2, 3, 4}, std::vector<double>{0, 0, 0, 0}), ParameterError);
  REQUIRE_THROWS_AS(wilcoxon_signrank(a, std::vector<double>{1, 2}), ParameterError);
}

TEST_CASE("sign-rank power and pairing", "[eval][wilcoxon]") {
  Rng rng(6);
  std::normal_distribution<double> g(0, 1);
  std::vector<double> x(20), y(20);
  for (int i = 0; i < 20; ++i) {
    y[i] = g(rng);
    x[i] = y[i] + 1.0 + 0.1 * g(rng);
  }
  REQUIRE(wilcoxon_signrank(x, y).p_value < 0.001);

  int wins = 0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> base(20), shifted(20);
    for (int i = 0; i < 20; ++i) {
      base[i] = 3 * g(rng);
      shifted[i] = base[i] + 0.8 + 0.5 * g(rng);
    }
    const double paired = wilcoxon_signrank(shifted, base).p_value;
    auto permuted = base;
    std::shuffle(permuted.begin(), permuted.end(), rng);
    if (wilcoxon_signrank(shifted, permuted).p_value > paired) ++wins;
  }
  REQUIRE(wins >= 190);
}

TEST_CASE("bootstrap significance", "[eval][bootstrap]") {
  const std::vector<double> acc = {0.62, 0.58, 0.7, 0.66, 0.59, 0.64, 0.61, 0.68};
  const std::vector<int> sizes(8, 220);
  const auto chance = chance_baseline(sizes, 0.5, 11);
  const auto a = bootstrap_significance(acc, chance, 2000, 99);
  const auto b = bootstrap_significance(acc, chance, 2000, 99);
  REQUIRE(a.p95_bootstrap == b.p95_bootstrap);
  REQUIRE(a.n_bootstrap == 2000);
  REQUIRE(a.significant);
  REQUIRE(a.p95_bootstrap == Approx(2.0 / 256).epsilon(1e-12));

  const auto flipped = bootstrap_significance(chance, acc, 2000, 99);
  REQUIRE_FALSE(flipped.greater);
  REQUIRE_FALSE(flipped.significant);

  REQUIRE_THROWS_AS(bootstrap_significance(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2, 3, 4}, 2000, 1),
                    ParameterError);
  REQUIRE_THROWS_AS(bootstrap_significance(acc, chance, 10, 1), ParameterError);
}

TEST_CASE("bootstrap p95 falls as the planted shift grows", "[eval][bootstrap]") {
  Rng rng(8);
  std::normal_distribution<double> g(0, 0.03);
  const std::vector<int> sizes(10, 200);
  const auto chance = chance_baseline(sizes, 1.0 / 14, 3);
  std::vector<double> shifts, p95s;
  for (int k = 0; k <= 8; ++k) {
    const double shift = 0.005 * k;
    std::vector<double> acc;
    for (int i = 0; i < 10; ++i) acc.push_back(1.0 / 14 + shift + g(rng));
    shifts.push_back(shift);
    p95s.push_back(bootstrap_significance(acc, chance, 1000, 5).p95_bootstrap);
  }
  // Spearman correlation; shifts are already ranked.
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        less += w < v[i];
        equal += w == v[i];
      }
      r[i] = less + (equal + 1) / 2;
    }
    return r;
  };
  const auto rs = ranks(shifts), rp = ranks(p95s);
  const double ms = std::accumulate(rs.begin(), rs.end(), 0.0) / rs.size();
  const double mp = std::accumulate(rp.begin(), rp.end(), 0.0) / rp.size();
  double num = 0, ds = 0, dp = 0;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    num += (rs[i] - ms) * (rp[i] - mp);
    ds += (rs[i] - ms) * (rs[i] - ms);
    dp += (rp[i] - mp) * (rp[i] - mp);
  }
  REQUIRE(num / std::sqrt(ds * dp) < 0);
}

TEST_CASE("dual null test needs both comparisons", "[eval][bootstrap]") {
  const std::vector<int> sizes(12, 200);
  const auto binary = chance_baseline(sizes, 0.5, 2);
  std::vector<double> strong, weak;
  for (int i = 0; i < 12; ++i) {
    strong.push_back(0.9 + 0.005 * i);
    weak.push_back(0.14 + 0.003 * i);
  }
  const auto both = dual_null_test(strong, weak, binary, 1000, 4);
  REQUIRE(both.significant);
  REQUIRE(both.p_value < 0.001);

  // Beats the reference model but not the binary decoder.
  std::vector<double> middling;
  for (int i = 0; i < 12; ++i) middling.push_back(0.3 + 0.004 * i);
  REQUIRE_FALSE(dual_null_test(middling, weak, binary, 1000, 4).significant);
  // Beats the binary decoder but not the reference model.
  REQUIRE_FALSE(dual_null_test(strong, strong, binary, 1000, 4).significant);
}

TEST_CASE("significance stars", "[eval]") {
  REQUIRE(stars(0.0005) == "***");
  REQUIRE(stars(0.005) == "**");
  REQUIRE(stars(0.03) == "*");
  REQUIRE(stars(0.05).empty());
}
