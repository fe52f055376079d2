#pragma once

#include <Eigen/Dense>
#include <array>
#include <memory>
#include <optional>

#include "dirfocus/signal/audio.hpp"
#include "dirfocus/spatial/mvdr.hpp"

namespace dirfocus::dataset {

using Eigen::Index;

inline constexpr double kEegSampleRate = 128.0;
inline constexpr Index kEegChannels = 32;

/// The fourteen competing-speaker azimuths in degrees; negative is left,
/// magnitudes above 90 are behind the listener.
inline constexpr std::array<int, 14> kDirections = {-135, -120, -90, -60, -45, -30, -15,
                                                    15,   30,   45,   60,  90,  120, 135};

bool is_known_direction(int direction);

/// Metadata of one trial; all that split generation needs.
struct TrialMeta {
  int subject_id = 0;
  int trial_id = 0;
  int trial_order = 0;
  int attended_direction = 0;
  int attended_audio_id = 0;
};

struct EegTrial {
  int subject_id = 0;
  int trial_id = 0;
  int trial_order = 0;
  int attended_direction = 0;
  int unattended_direction = 0;
  int attended_audio_id = 0;
  Eigen::MatrixXd eeg;  // channels x samples at 128 Hz
  spatial::SpatialSpectrum spectrum;
  std::optional<signal::MultiChannelAudio> audio;

  TrialMeta meta() const { return {subject_id, trial_id, trial_order, attended_direction, attended_audio_id}; }

  /// Throws DataError naming the trial when an invariant fails.
  void validate() const;
};

/// One decision window. The spectrum is shared by every window of a trial.
struct Sample {
  Eigen::MatrixXd eeg;  // channels x window samples
  std::shared_ptr<const Eigen::VectorXd> spectrum;
  int label = 0;
  int trial_id = 0;
  int subject_id = 0;
};

}  // namespace dirfocus::dataset
