#pragma once

#include <cstdint>
#include <filesystem>

#include "dirfocus/dataset/synth.hpp"
#include "dirfocus/spatial/mvdr.hpp"

namespace dirfocus::app {

struct SpectrumStats {
  int computed = 0;
  int skipped = 0;
};

/// Computes one spectrum per trial of the dataset in `in_dir` (trials need an
/// audio_file). Existing spectrum files in `out_dir` are kept unless `force`.
/// When `out_dir` lies inside `in_dir` the manifest is updated to reference
/// the spectra.
SpectrumStats cmd_spectrum(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                           const spatial::SpectrumPipeline& pipeline, bool force);

/// Generates a synthetic dataset and writes it to `out_dir`; returns the
/// number of trials.
int cmd_synth(const dataset::SynthConfig& config, std::uint64_t seed, const std::filesystem::path& out_dir,
              bool write_audio);

/// Keeps freed training buffers in the heap instead of returning them to the
/// kernel after every batch. No-op outside glibc.
void tune_allocator();

}  // namespace dirfocus::app
