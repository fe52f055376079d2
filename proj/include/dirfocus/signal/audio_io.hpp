#pragma once

#include <filesystem>

#include "dirfocus/signal/audio.hpp"

namespace dirfocus::signal {

/// Reads a RIFF/WAVE file with 16-bit PCM or 32-bit IEEE float samples.
/// PCM is scaled to [-1, 1).
MultiChannelAudio read_wav(const std::filesystem::path& path);

/// Writes 32-bit float WAVE.
void write_wav(const std::filesystem::path& path, const MultiChannelAudio& audio);

/// Reads interleaved float32 little-endian samples; channel count and rate come
/// from the JSON sidecar `<path>.json` ({"channels": L, "sample_rate": Hz}).
MultiChannelAudio read_raw_f32(const std::filesystem::path& path);

void write_raw_f32(const std::filesystem::path& path, const MultiChannelAudio& audio);

/// Dispatches on extension: .wav goes to read_wav, anything else to read_raw_f32.
MultiChannelAudio load_audio(const std::filesystem::path& path);

}  // namespace dirfocus::signal
