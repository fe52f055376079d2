#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "dirfocus/error.hpp"
#include "dirfocus/signal/audio.hpp"

namespace dirfocus::signal {

/// Periodic Hann window of length n.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> hann_window(Index n) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w(n);
  for (Index i = 0; i < n; ++i) {
    w[i] = Scalar(0.5) - Scalar(0.5) * std::cos(2 * std::numbers::pi_v<Scalar> * Scalar(i) / Scalar(n));
  }
  return w;
}

/// Number of full frames of length `window_len` at stride `hop` in `length` samples.
inline Index frame_count(Index length, Index window_len, Index hop) {
  return length < window_len ? 0 : 1 + (length - window_len) / hop;
}

/// One-sided STFT with a periodic Hann window. Frames start at n*hop and only
/// full frames are kept (no end padding); F = window_len/2 + 1 bins.
inline Spectrogram stft(const MultiChannelAudio& audio, Index window_len = 512, Index hop = 256) {
  audio.validate();
  if (window_len <= 0 || hop <= 0 || hop > window_len)
    throw ParameterError("stft requires 0 < hop <= window_len");
  if (audio.length() < window_len) {
    throw ParameterError("audio of " + std::to_string(audio.length()) +
                         " samples is shorter than one STFT window of " + std::to_string(window_len));
  }

  const Index n_frames = frame_count(audio.length(), window_len, hop);
  const Index n_bins = window_len / 2 + 1;
  const Eigen::VectorXd window = hann_window<double>(window_len);

  Spectrogram spec;
  spec.sample_rate = audio.sample_rate;
  spec.window_len = window_len;
  spec.hop = hop;
  spec.bins.assign(static_cast<std::size_t>(audio.channels()), Eigen::MatrixXcd(n_bins, n_frames));

  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<std::size_t>(window_len));
  std::vector<std::complex<double>> out;
  for (Index l = 0; l < audio.channels(); ++l) {
    for (Index n = 0; n < n_frames; ++n) {
      for (Index i = 0; i < window_len; ++i) {
        frame[static_cast<std::size_t>(i)] = audio.samples(l, n * hop + i) * window[i];
      }
      fft.fwd(out, frame);
      for (Index f = 0; f < n_bins; ++f) spec.bins[static_cast<std::size_t>(l)](f, n) = out[static_cast<std::size_t>(f)];
    }
  }
  return spec;
}

/// Energy of frame `n` of channel `l` recovered from one-sided bins through
/// Parseval: (|X_0|^2 + 2 sum |X_k|^2 + |X_{F-1}|^2) / window_len.
inline double frame_energy_from_bins(const Spectrogram& spec, Index l, Index n) {
  const auto& b = spec.bins[static_cast<std::size_t>(l)];
  const Index last = b.rows() - 1;
  double e = std::norm(b(0, n));
  for (Index f = 1; f < last; ++f) e += 2.0 * std::norm(b(f, n));
  e += (spec.window_len % 2 == 0 ? 1.0 : 2.0) * std::norm(b(last, n));
  return e / static_cast<double>(spec.window_len);
}

}  // namespace dirfocus::signal
