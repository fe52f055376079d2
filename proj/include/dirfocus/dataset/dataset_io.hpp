#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "dirfocus/dataset/trial.hpp"
#include "dirfocus/spatial/mvdr.hpp"

namespace dirfocus::dataset {

struct WriteOptions {
  bool write_audio = false;
  bool write_spectra = true;
};

/// Writes `root/manifest.json`, one float32 EEG file per trial under `eeg/`,
/// and optionally float32 audio (raw + sidecar) under `audio/` and spectra
/// under `spectra/`. File paths in the manifest are relative to `root`.
void write_dataset(const std::filesystem::path& root, std::span<const EegTrial> trials,
                   const WriteOptions& options = {});

/// Reads a dataset written by write_dataset (or converted from recordings).
/// Trials without a spectrum file get one computed from their audio with
/// `pipeline`; a trial with neither is an error. Every trial is validated and
/// errors name the offending trial.
std::vector<EegTrial> load_dataset(const std::filesystem::path& root, const spatial::SpectrumPipeline& pipeline = {});

}  // namespace dirfocus::dataset
