#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace dirfocus::signal {

using Eigen::Index;

/// Time-domain multichannel recording, one row per channel.
struct MultiChannelAudio {
  Eigen::MatrixXd samples;  // channels x samples
  double sample_rate = 0.0;

  Index channels() const { return samples.rows(); }
  Index length() const { return samples.cols(); }

  /// Throws ParameterError when the invariants (>= 1 channel, positive rate) fail.
  void validate() const;
};

/// Complex STFT of every channel. `bins[l]` is the F x N matrix of channel l,
/// rows are frequency bins and columns are frames.
struct Spectrogram {
  std::vector<Eigen::MatrixXcd> bins;
  double sample_rate = 0.0;
  Index window_len = 0;
  Index hop = 0;

  Index channels() const { return static_cast<Index>(bins.size()); }
  Index num_bins() const { return bins.empty() ? 0 : bins.front().rows(); }
  Index num_frames() const { return bins.empty() ? 0 : bins.front().cols(); }
  double freq_resolution() const { return sample_rate / static_cast<double>(window_len); }
  double bin_frequency(Index f) const { return static_cast<double>(f) * freq_resolution(); }
};

}  // namespace dirfocus::signal
