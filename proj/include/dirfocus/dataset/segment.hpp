#pragma once

#include <span>
#include <vector>

#include "dirfocus/dataset/labels.hpp"
#include "dirfocus/dataset/trial.hpp"

namespace dirfocus::dataset {

/// Samples per decision window at the EEG rate.
Index window_samples(double window_seconds);

/// Consecutive non-overlapping windows of a trial. Every sample shares the
/// trial's spectrum (the same object) and label; excluded directions give an
/// empty list. Throws ParameterError when the window is longer than the trial.
std::vector<Sample> segment_trial(const EegTrial& trial, double window_seconds, LabelParadigm paradigm);

/// segment_trial over a whole dataset, concatenated in trial order.
std::vector<Sample> segment_trials(std::span<const EegTrial> trials, double window_seconds, LabelParadigm paradigm);

}  // namespace dirfocus::dataset
