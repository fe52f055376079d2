#include "dirfocus/dataset/trial.hpp"

#include <string>

#include "dirfocus/dataset/segment.hpp"
#include "dirfocus/error.hpp"

namespace dirfocus::dataset {

void EegTrial::validate() const {
  const std::string who = "trial " + std::to_string(trial_id) + " (subject " + std::to_string(subject_id) + ")";
  if (!is_known_direction(attended_direction))
    throw DataError(who + ": unknown attended direction " + std::to_string(attended_direction));
  if (unattended_direction != -attended_direction)
    throw DataError(who + ": unattended direction must mirror the attended one");
  if (eeg.rows() != kEegChannels) {
    throw DataError(who + ": EEG has " + std::to_string(eeg.rows()) + " channels, expected " +
                    std::to_string(kEegChannels));
  }
  if (eeg.cols() == 0) throw DataError(who + ": EEG is empty");
  if (!eeg.allFinite()) throw DataError(who + ": EEG contains non-finite values");
  try {
    spectrum.validate();
  } catch (const DataError& e) {
    throw DataError(who + ": " + e.what());
  }
}

Index window_samples(double window_seconds) {
  if (!(window_seconds > 0)) throw ParameterError("window length must be positive");
  return static_cast<Index>(std::llround(window_seconds * kEegSampleRate));
}

std::vector<Sample> segment_trial(const EegTrial& trial, double window_seconds, LabelParadigm paradigm) {
  const Index len = window_samples(window_seconds);
  if (len < 1 || len > trial.eeg.cols()) {
    throw ParameterError("window of " + std::to_string(len) + " samples does not fit trial " +
                         std::to_string(trial.trial_id) + " of " + std::to_string(trial.eeg.cols()) + " samples");
  }
  const auto label = label_trial(trial.attended_direction, paradigm);
  std::vector<Sample> out;
  if (!label) return out;

  auto spectrum = std::make_shared<const Eigen::VectorXd>(trial.spectrum.power);
  const Index count = trial.eeg.cols() / len;
  out.reserve(static_cast<std::size_t>(count));
  for (Index w = 0; w < count; ++w) {
    Sample s;
    s.eeg = trial.eeg.middleCols(w * len, len);
    s.spectrum = spectrum;
    s.label = *label;
    s.trial_id = trial.trial_id;
    s.subject_id = trial.subject_id;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> segment_trials(std::span<const EegTrial> trials, double window_seconds, LabelParadigm paradigm) {
  std::vector<Sample> out;
  for (const auto& t : trials) {
    auto part = segment_trial(t, window_seconds, paradigm);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

}  // namespace dirfocus::dataset
