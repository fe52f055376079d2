#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "dirfocus/error.hpp"
#include "dirfocus/signal/audio.hpp"
#include "dirfocus/signal/stft.hpp"

namespace dirfocus::spatial {

using Eigen::Index;

/// Two-element array: microphone spacing and speed of sound.
struct ArrayGeometry {
  double spacing = 0.18;          // m
  double speed_of_sound = 343.0;  // m/s

  void validate() const {
    if (!(spacing > 0)) throw ParameterError("microphone spacing must be positive");
    if (!(speed_of_sound > 0)) throw ParameterError("speed of sound must be positive");
  }

  /// Above this frequency the inter-microphone phase wraps within the scan range.
  double aliasing_frequency() const { return speed_of_sound / (2.0 * spacing); }

  /// Delay of microphone 2 relative to microphone 1 for a plane wave from
  /// `theta_deg`, in seconds. Positive angles (right side) reach mic 2 first,
  /// so mic 2 leads and the returned lead time is positive.
  double lead_time(double theta_deg) const {
    return spacing * std::sin(theta_deg * std::numbers::pi / 180.0) / speed_of_sound;
  }
};

template <typename Scalar>
using SteeringVector = Eigen::Matrix<std::complex<Scalar>, 2, 1>;

/// Far-field steering vector [1, exp(-2 pi i f sin(theta) d / c)] with the
/// left microphone as the phase reference. theta in degrees, [-90, 90].
template <typename Scalar = double>
SteeringVector<Scalar> steering_vector(Scalar freq_hz, Scalar theta_deg, const ArrayGeometry& geom) {
  if (!(theta_deg >= Scalar(-90)) || !(theta_deg <= Scalar(90)))
    throw ParameterError("steering angle " + std::to_string(theta_deg) + " outside [-90, 90] degrees");
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar phase = -2 * pi * freq_hz * std::sin(theta_deg * pi / 180) * Scalar(geom.spacing) /
                       Scalar(geom.speed_of_sound);
  SteeringVector<Scalar> g;
  g << std::complex<Scalar>(1, 0), std::polar(Scalar(1), phase);
  return g;
}

/// Per-bin array correlation R(f)[i][j] = sum_n Y_i(f, n) conj(Y_j(f, n)).
Eigen::Matrix2cd correlation_matrix(const signal::Spectrogram& spec, Index bin);

/// Closed-form inverse of a 2x2 Hermitian matrix; throws NumericalError when
/// the determinant is not positive relative to the squared trace.
Eigen::Matrix2cd hermitian_inverse(const Eigen::Matrix2cd& r, double rel_tol = 1e-14);

/// MVDR power over an angular grid.
struct SpatialSpectrum {
  Eigen::VectorXd power;  // N_theta, all > 0
  Eigen::VectorXd grid;   // degrees, strictly increasing within [-90, 90]

  Index size() const { return power.size(); }
  Index argmax() const;
  double peak_angle() const { return grid[argmax()]; }
  /// Copy scaled so the maximum power is 1.
  Eigen::VectorXd normalized() const;
  /// Grid indices of strict local maxima (interior points only), strongest first.
  std::vector<Index> local_maxima() const;
  void validate() const;
};

struct MvdrOptions {
  /// Diagonal loading factor; R + loading * tr(R)/2 * I is inverted.
  double loading = 1e-3;
  /// Drop bins above c/(2d) from the frequency average.
  bool exclude_aliased = true;
};

/// Uniform scan grid over [-90, 90] with the given step (181 points at 1 degree).
Eigen::VectorXd scan_grid(double step_deg = 1.0);

/// P(theta) = 1/F' sum_f 1 / Re(g^T (R + loading tr(R)/2 I)^{-1} g^*) over the
/// F' bins kept: DC, Nyquist and (optionally) spatially aliased bins are
/// excluded. Bins with zero energy contribute nothing.
SpatialSpectrum mvdr_spectrum(const signal::Spectrogram& spec, const ArrayGeometry& geom,
                              const Eigen::VectorXd& grid, const MvdrOptions& options = {});

/// Audio front end used for every trial: resample to 8 kHz, 512/256 Hann STFT,
/// MVDR scan on the 1-degree grid.
struct SpectrumPipeline {
  double analysis_rate = 8000.0;
  Index window_len = 512;
  Index hop = 256;
  double grid_step_deg = 1.0;
  ArrayGeometry geometry;
  MvdrOptions mvdr;
};

SpatialSpectrum spatial_spectrum_from_audio(const signal::MultiChannelAudio& audio,
                                            const SpectrumPipeline& pipeline = {});

}  // namespace dirfocus::spatial
