#include "dirfocus/spatial/mvdr.hpp"

#include <algorithm>
#include <numeric>

#include "dirfocus/signal/resample.hpp"

namespace dirfocus::spatial {

Eigen::Matrix2cd correlation_matrix(const signal::Spectrogram& spec, Index bin) {
  if (spec.channels() != 2) {
    throw ParameterError("correlation matrix needs a two-channel spectrogram, got " +
                         std::to_string(spec.channels()) + " channel(s)");
  }
  if (bin < 0 || bin >= spec.num_bins()) throw ParameterError("frequency bin out of range");
  const auto y1 = spec.bins[0].row(bin);
  const auto y2 = spec.bins[1].row(bin);
  Eigen::Matrix2cd r;
  r(0, 0) = y1.squaredNorm();
  r(1, 1) = y2.squaredNorm();
  r(0, 1) = (y1.array() * y2.array().conjugate()).sum();
  r(1, 0) = std::conj(r(0, 1));
  return r;
}

Eigen::Matrix2cd hermitian_inverse(const Eigen::Matrix2cd& r, double rel_tol) {
  const double a = r(0, 0).real();
  const double d = r(1, 1).real();
  const double det = a * d - std::norm(r(0, 1));
  const double scale = 0.25 * (a + d) * (a + d);
  if (!(det > rel_tol * scale) || !(scale > 0)) throw NumericalError("singular correlation matrix");
  Eigen::Matrix2cd inv;
  inv(0, 0) = d / det;
  inv(1, 1) = a / det;
  inv(0, 1) = -r(0, 1) / det;
  inv(1, 0) = -r(1, 0) / det;
  return inv;
}

Index SpatialSpectrum::argmax() const {
  Index idx = 0;
  power.maxCoeff(&idx);
  return idx;
}

Eigen::VectorXd SpatialSpectrum::normalized() const {
  const double peak = power.maxCoeff();
  if (!(peak > 0)) throw NumericalError("cannot normalize a spectrum without positive power");
  return power / peak;
}

std::vector<Index> SpatialSpectrum::local_maxima() const {
  std::vector<Index> peaks;
  for (Index i = 1; i + 1 < power.size(); ++i) {
    if (power[i] > power[i - 1] && power[i] >= power[i + 1]) peaks.push_back(i);
  }
  std::sort(peaks.begin(), peaks.end(), [&](Index a, Index b) { return power[a] > power[b]; });
  return peaks;
}

void SpatialSpectrum::validate() const {
  if (power.size() != grid.size() || power.size() == 0)
    throw DataError("spatial spectrum power and grid lengths differ or are empty");
  for (Index i = 0; i < grid.size(); ++i) {
    if (grid[i] < -90.0 || grid[i] > 90.0) throw DataError("spatial spectrum grid leaves [-90, 90]");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw DataError("spatial spectrum grid is not strictly increasing");
    if (!(power[i] > 0) || !std::isfinite(power[i])) throw DataError("spatial spectrum power must be finite and > 0");
  }
}

Eigen::VectorXd scan_grid(double step_deg) {
  if (!(step_deg > 0)) throw ParameterError("grid step must be positive");
  const auto n = static_cast<Index>(std::floor(180.0 / step_deg + 1e-9)) + 1;
  Eigen::VectorXd grid(n);
  for (Index i = 0; i < n; ++i) grid[i] = -90.0 + step_deg * static_cast<double>(i);
  return grid;
}

SpatialSpectrum mvdr_spectrum(const signal::Spectrogram& spec, const ArrayGeometry& geom,
                              const Eigen::VectorXd& grid, const MvdrOptions& options) {
  geom.validate();
  if (spec.channels() != 2) {
    throw ParameterError("MVDR scan needs a two-channel spectrogram, got " + std::to_string(spec.channels()) +
                         " channel(s)");
  }
  if (!(options.loading >= 0)) throw ParameterError("diagonal loading must be >= 0");
  if (grid.size() == 0) throw ParameterError("empty scan grid");

  const double alias_limit = geom.aliasing_frequency();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(grid.size());
  Index used = 0;
  bool any_energy = false;

  // Cache sin(theta) d / c per grid angle; the steering phase is -2 pi f times it.
  Eigen::VectorXd delay(grid.size());
  for (Index k = 0; k < grid.size(); ++k) {
    if (grid[k] < -90.0 || grid[k] > 90.0) throw ParameterError("scan grid leaves [-90, 90]");
    delay[k] = geom.lead_time(grid[k]);
  }

  for (Index f = 1; f + 1 < spec.num_bins(); ++f) {
    const double freq = spec.bin_frequency(f);
    if (options.exclude_aliased && freq > alias_limit) continue;
    ++used;

    Eigen::Matrix2cd r = correlation_matrix(spec, f);
    const double trace = r(0, 0).real() + r(1, 1).real();
    if (!(trace > 0)) continue;
    any_energy = true;
    const double load = options.loading * trace / 2.0;
    r(0, 0) += load;
    r(1, 1) += load;

    Eigen::Matrix2cd inv;
    try {
      inv = hermitian_inverse(r);
    } catch (const NumericalError&) {
      throw NumericalError("singular correlation matrix at frequency bin " + std::to_string(f) + " (" +
                           std::to_string(freq) + " Hz); use a nonzero diagonal loading");
    }

    // g^T R^-1 g* with g = [1, e^{i phi}] expands to i00 + i11 + 2 Re(i01 e^{-i phi}).
    const double i00 = inv(0, 0).real();
    const double i11 = inv(1, 1).real();
    const std::complex<double> i01 = inv(0, 1);
    for (Index k = 0; k < grid.size(); ++k) {
      const double phi = -2.0 * std::numbers::pi * freq * delay[k];
      const double q = i00 + i11 + 2.0 * (i01 * std::polar(1.0, -phi)).real();
      acc[k] += 1.0 / q;
    }
  }
  if (used == 0) throw ParameterError("no frequency bins left in the MVDR average");
  if (!any_energy) throw NumericalError("audio has no energy in the MVDR frequency band");

  SpatialSpectrum out;
  out.grid = grid;
  out.power = acc / static_cast<double>(used);
  return out;
}

SpatialSpectrum spatial_spectrum_from_audio(const signal::MultiChannelAudio& audio, const SpectrumPipeline& p) {
  audio.validate();
  signal::MultiChannelAudio analysis;
  analysis.sample_rate = p.analysis_rate;
  analysis.samples = signal::resample(audio.samples, audio.sample_rate, p.analysis_rate);
  const auto spec = signal::stft(analysis, p.window_len, p.hop);
  return mvdr_spectrum(spec, p.geometry, scan_grid(p.grid_step_deg), p.mvdr);
}

}  // namespace dirfocus::spatial
