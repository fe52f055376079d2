#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "dirfocus/error.hpp"

namespace dirfocus::signal {

/// One second-order section, a0 normalized to 1.
template <typename Scalar>
struct Biquad {
  Scalar b0, b1, b2, a1, a2;

  Scalar dc_gain() const { return (b0 + b1 + b2) / (Scalar(1) + a1 + a2); }
};

template <typename Scalar>
using SosCascade = std::vector<Biquad<Scalar>>;

enum class FilterType { Lowpass, Highpass };

/// Butterworth design as a cascade of bilinear-transformed biquads with the
/// cutoff prewarped, so |H(cutoff)| = 1/sqrt(2) exactly. `order` must be even.
template <typename Scalar = double>
SosCascade<Scalar> butterworth(FilterType type, int order, Scalar cutoff, Scalar sample_rate) {
  if (order < 2 || order % 2 != 0) throw ParameterError("butterworth order must be even and >= 2");
  if (!(cutoff > 0) || !(cutoff < sample_rate / 2))
    throw ParameterError("butterworth cutoff must lie in (0, sample_rate/2)");

  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar w0 = 2 * pi * cutoff / sample_rate;
  const Scalar cw = std::cos(w0);
  const Scalar sw = std::sin(w0);

  SosCascade<Scalar> sos;
  for (int k = 0; k < order / 2; ++k) {
    const Scalar q = Scalar(1) / (2 * std::cos(pi * (2 * k + 1) / (2 * order)));
    const Scalar alpha = sw / (2 * q);
    const Scalar a0 = 1 + alpha;
    Biquad<Scalar> s{};
    if (type == FilterType::Lowpass) {
      s.b0 = (1 - cw) / 2 / a0;
      s.b1 = (1 - cw) / a0;
      s.b2 = s.b0;
    } else {
      s.b0 = (1 + cw) / 2 / a0;
      s.b1 = -(1 + cw) / a0;
      s.b2 = s.b0;
    }
    s.a1 = -2 * cw / a0;
    s.a2 = (1 - alpha) / a0;
    sos.push_back(s);
  }
  return sos;
}

/// Magnitude response of a cascade at `freq` Hz.
template <typename Scalar>
Scalar sos_magnitude(const SosCascade<Scalar>& sos, Scalar freq, Scalar sample_rate) {
  const std::complex<Scalar> z1 =
      std::polar(Scalar(1), -2 * std::numbers::pi_v<Scalar> * freq / sample_rate);
  const std::complex<Scalar> z2 = z1 * z1;
  Scalar mag = 1;
  for (const auto& s : sos) {
    mag *= std::abs((s.b0 + s.b1 * z1 + s.b2 * z2) / (Scalar(1) + s.a1 * z1 + s.a2 * z2));
  }
  return mag;
}

/// Direct-form II transposed filtering. When `steady_state` is set the state is
/// initialized to the step response of x[0], which removes the start-up jump.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sosfilt(const SosCascade<Scalar>& sos,
                                                 const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& x,
                                                 bool steady_state = true) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y = x;
  if (x.size() == 0) return y;
  Scalar level = x[0];
  for (const auto& s : sos) {
    Scalar z1 = 0, z2 = 0;
    if (steady_state) {
      const Scalar out = s.dc_gain() * level;
      z1 = out - s.b0 * level;
      z2 = s.b2 * level - s.a2 * out;
      level = out;
    }
    for (Eigen::Index n = 0; n < y.size(); ++n) {
      const Scalar in = y[n];
      const Scalar out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      y[n] = out;
    }
  }
  return y;
}

/// Zero-phase forward-backward filtering with odd-reflection padding.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sosfiltfilt(const SosCascade<Scalar>& sos,
                                                     const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& x) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = x.size();
  if (n == 0) return Vec();
  const Eigen::Index pad = std::min<Eigen::Index>(n - 1, 3 * (2 * static_cast<Eigen::Index>(sos.size()) + 1));

  Vec ext(n + 2 * pad);
  for (Eigen::Index i = 0; i < pad; ++i) {
    ext[i] = 2 * x[0] - x[pad - i];
    ext[n + pad + i] = 2 * x[n - 1] - x[n - 2 - i];
  }
  ext.segment(pad, n) = x;

  Vec fwd = sosfilt<Scalar>(sos, ext);
  Vec rev = fwd.reverse();
  Vec back = sosfilt<Scalar>(sos, rev);
  return back.reverse().segment(pad, n);
}

/// Zero-phase Butterworth bandpass applied to every row of `signal`.
/// `order` is the order of each of the lowpass and highpass halves, per pass.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> bandpass_filter(
    const Eigen::MatrixBase<Derived>& signal, typename Derived::Scalar sample_rate,
    typename Derived::Scalar lo, typename Derived::Scalar hi, int order = 4) {
  using Scalar = typename Derived::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (!(sample_rate > 0)) throw ParameterError("sample rate must be positive");
  if (!(lo > 0) || !(lo < hi) || !(hi < sample_rate / 2)) {
    throw ParameterError("band edges must satisfy 0 < lo < hi < sample_rate/2 (got lo=" +
                         std::to_string(lo) + ", hi=" + std::to_string(hi) + ")");
  }
  SosCascade<Scalar> sos = butterworth<Scalar>(FilterType::Highpass, order, lo, sample_rate);
  const auto lp = butterworth<Scalar>(FilterType::Lowpass, order, hi, sample_rate);
  sos.insert(sos.end(), lp.begin(), lp.end());

  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(signal.rows(), signal.cols());
  for (Eigen::Index c = 0; c < signal.rows(); ++c) {
    Vec row = signal.row(c).transpose();
    out.row(c) = sosfiltfilt<Scalar>(sos, row).transpose();
  }
  return out;
}

}  // namespace dirfocus::signal
