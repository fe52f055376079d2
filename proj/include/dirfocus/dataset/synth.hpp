#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dirfocus/dataset/trial.hpp"
#include "dirfocus/rng.hpp"
#include "dirfocus/spatial/mvdr.hpp"

namespace dirfocus::dataset {

/// What the planted EEG pattern encodes.
///   Direction: one spatial pattern per attended direction, built hierarchically
///              (side + quadrant + direction-specific parts).
///   Side:      one pattern per attended side only.
enum class EegSignature { Direction, Side };

std::string to_string(EegSignature signature);
EegSignature parse_eeg_signature(std::string_view name);

struct SynthConfig {
  int n_subjects = 21;
  int trials_per_subject = 32;
  double trial_seconds = 110.0;
  /// Source-to-sensor-noise ratio of the microphone signals, dB.
  double snr_db = 20.0;
  /// Amplitude of the planted pattern relative to the unit-variance background.
  double planted_eeg_gain = 1.0;
  EegSignature signature = EegSignature::Direction;
  /// Weight of the per-subject perturbation of each planted pattern.
  double subject_variability = 0.3;
  /// Must be even; half the stimuli are low voices and half high voices.
  int n_stimuli = 32;
  /// Length of the rendered two-microphone excerpt the spectrum is computed from.
  double audio_seconds = 4.0;
  /// Corner frequency of the head-shadow lowpass applied to sources behind the listener.
  double rear_shadow_hz = 150.0;
  /// Factor on the inter-microphone delay of sources behind the listener
  /// (longer path around the head); 1 keeps the free-field delay.
  double rear_delay_scale = 1.1;
  /// Keep the rendered audio on each trial (needed when writing it to disk).
  bool keep_audio = false;
  spatial::SpectrumPipeline pipeline;

  void validate() const;
};

/// Trial metadata of a synthetic roster: session order, balanced directions
/// (every direction at least floor(trials/14) times per subject) and attended
/// stimuli. synth_generate produces the same metadata for the same seed.
std::vector<TrialMeta> synth_roster(const SynthConfig& config, std::uint64_t seed);

/// Full synthetic dataset: rendered two-source audio, MVDR spectra and EEG
/// with a planted direction pattern. Bit-identical for identical seeds.
std::vector<EegTrial> synth_generate(const SynthConfig& config, std::uint64_t seed);

/// Pitch of a stimulus. Even ids are low voices (98-126 Hz), odd ids high
/// voices (178-220 Hz).
double stimulus_pitch(int stimulus_id);

/// Voiced speech-like signal: harmonics of `f0_hz` with a falling spectral
/// tilt, a little broadband breath noise and a 1-6 Hz syllabic envelope.
/// Unit RMS.
Eigen::VectorXd speech_like_source(Index length, double sample_rate, double f0_hz, Rng& rng);

/// Delays `x` by `delay_samples` (may be fractional or negative) with a
/// frequency-domain phase shift on a zero-padded FFT.
Eigen::VectorXd fractional_delay(const Eigen::VectorXd& x, double delay_samples);

/// A point source in the horizontal plane, azimuth in degrees (-180, 180].
struct SceneSource {
  Eigen::VectorXd signal;
  double azimuth_deg = 0.0;
};

struct SceneOptions {
  double sample_rate = 8000.0;
  spatial::ArrayGeometry geometry;
  double snr_db = 20.0;
  double rear_shadow_hz = 150.0;
  double rear_delay_scale = 1.1;
};

/// Renders far-field sources onto the two-microphone array (left = channel 0)
/// with fractional inter-microphone delays from the array geometry, a
/// first-order lowpass head-shadow (equal at both microphones), and white
/// sensor noise at the given SNR relative to a unit-power source. Sources with
/// |azimuth| > 90 get the shadow and a delay scaled by rear_delay_scale.
signal::MultiChannelAudio render_scene(const std::vector<SceneSource>& sources, const SceneOptions& options, Rng& rng);

}  // namespace dirfocus::dataset
