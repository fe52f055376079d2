#include "dirfocus/signal/resample.hpp"

#include <cmath>
#include <numeric>

namespace dirfocus::signal {

std::pair<std::int64_t, std::int64_t> rational_ratio(double from_rate, double to_rate) {
  if (!(from_rate > 0) || !(to_rate > 0)) throw ParameterError("resample rates must be positive");
  const bool integral = std::floor(from_rate) == from_rate && std::floor(to_rate) == to_rate &&
                        from_rate < 1e12 && to_rate < 1e12;
  if (integral) {
    const auto f = static_cast<std::int64_t>(from_rate);
    const auto t = static_cast<std::int64_t>(to_rate);
    const std::int64_t g = std::gcd(f, t);
    return {t / g, f / g};
  }

  // Continued fraction of to/from.
  const double ratio = to_rate / from_rate;
  std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double x = ratio;
  for (int iter = 0; iter < 64; ++iter) {
    const auto a = static_cast<std::int64_t>(std::floor(x));
    const std::int64_t p2 = a * p1 + p0;
    const std::int64_t q2 = a * q1 + q0;
    if (q2 > 10000) break;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    const double frac = x - static_cast<double>(a);
    if (frac < 1e-12 || std::abs(static_cast<double>(p1) / static_cast<double>(q1) - ratio) < 1e-12 * ratio) break;
    x = 1.0 / frac;
  }
  if (p1 <= 0 || q1 <= 0) throw ParameterError("cannot express resampling ratio as a fraction");
  return {p1, q1};
}

Eigen::VectorXd polyphase_filter(std::int64_t up, std::int64_t down) {
  const std::int64_t max_rate = std::max(up, down);
  const double cutoff = 1.0 / static_cast<double>(max_rate);
  const std::int64_t half = 10 * max_rate;
  const std::int64_t taps = 2 * half + 1;
  const double beta = 5.0;
  const double i0_beta = std::cyl_bessel_i(0.0, beta);

  Eigen::VectorXd h(taps);
  for (std::int64_t n = 0; n < taps; ++n) {
    const double x = static_cast<double>(n - half);
    const double arg = cutoff * x;
    const double sinc = arg == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
    const double r = x / static_cast<double>(half);
    const double window = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
    h[n] = static_cast<double>(up) * cutoff * sinc * window;
  }
  return h;
}

}  // namespace dirfocus::signal
