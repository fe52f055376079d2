#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <utility>

#include "dirfocus/error.hpp"

namespace dirfocus::signal {

/// Rate ratio to_rate/from_rate as up/down in lowest terms. Integer rates are
/// reduced exactly; other rates go through a continued-fraction approximation
/// with denominators bounded by 10000.
std::pair<std::int64_t, std::int64_t> rational_ratio(double from_rate, double to_rate);

/// Kaiser-windowed sinc lowpass used by the polyphase resampler. Cutoff at
/// 1/max(up, down) of the upsampled Nyquist, gain `up`, 10*max(up, down) taps
/// per side, beta 5.
Eigen::VectorXd polyphase_filter(std::int64_t up, std::int64_t down);

/// Polyphase rational resampling of every row. Output length is
/// round(T * to_rate / from_rate); identical rates return the input unchanged.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> resample(
    const Eigen::MatrixBase<Derived>& signal, double from_rate, double to_rate) {
  using Scalar = typename Derived::Scalar;
  if (!(from_rate > 0) || !(to_rate > 0)) throw ParameterError("resample rates must be positive");
  if (from_rate == to_rate) return signal;

  const auto [up, down] = rational_ratio(from_rate, to_rate);
  const Eigen::VectorXd h = polyphase_filter(up, down);
  const std::int64_t half = (h.size() - 1) / 2;
  const std::int64_t in_len = signal.cols();
  const auto out_len = static_cast<std::int64_t>(std::llround(static_cast<double>(in_len) * to_rate / from_rate));

  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(signal.rows(), out_len);
  for (std::int64_t m = 0; m < out_len; ++m) {
    // Position of output m in the zero-stuffed, filtered stream.
    const std::int64_t t = m * down + half;
    std::int64_t k_lo = t - static_cast<std::int64_t>(h.size()) + 1;
    k_lo = k_lo <= 0 ? 0 : (k_lo + up - 1) / up;
    const std::int64_t k_hi = std::min<std::int64_t>(t / up, in_len - 1);
    for (Eigen::Index c = 0; c < signal.rows(); ++c) {
      double acc = 0.0;
      for (std::int64_t k = k_lo; k <= k_hi; ++k) acc += static_cast<double>(signal(c, k)) * h[t - k * up];
      out(c, m) = static_cast<Scalar>(acc);
    }
  }
  return out;
}

}  // namespace dirfocus::signal
