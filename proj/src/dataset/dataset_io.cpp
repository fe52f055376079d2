#include "dirfocus/dataset/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <string>

#include "dirfocus/binary_io.hpp"
#include "dirfocus/error.hpp"
#include "dirfocus/signal/audio_io.hpp"
#include "dirfocus/spatial/spectrum_io.hpp"

namespace dirfocus::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "dirfocus-dataset";
constexpr int kVersion = 1;

std::string trial_stem(int trial_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "trial_%06d", trial_id);
  return buf;
}

std::string trial_label(const json& entry, std::size_t index) {
  if (entry.contains("trial_id") && entry["trial_id"].is_number_integer())
    return "trial " + std::to_string(entry["trial_id"].get<int>());
  return "manifest entry " + std::to_string(index);
}

}  // namespace

void write_dataset(const fs::path& root, std::span<const EegTrial> trials, const WriteOptions& options) {
  fs::create_directories(root);
  json manifest;
  manifest["format"] = kFormat;
  manifest["version"] = kVersion;
  manifest["eeg_sample_rate"] = kEegSampleRate;
  manifest["eeg_channels"] = kEegChannels;
  std::set<int> subjects;
  json entries = json::array();
  for (const auto& t : trials) {
    t.validate();
    subjects.insert(t.subject_id);
    const std::string stem = trial_stem(t.trial_id);
    json e;
    e["subject_id"] = t.subject_id;
    e["trial_id"] = t.trial_id;
    e["trial_order"] = t.trial_order;
    e["attended_direction"] = t.attended_direction;
    e["unattended_direction"] = t.unattended_direction;
    e["attended_audio_id"] = t.attended_audio_id;

    const fs::path eeg_rel = fs::path("eeg") / (stem + ".f32");
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> eeg = t.eeg.cast<float>();
    io::write_le_file<float>(root / eeg_rel, std::span<const float>(eeg.data(), static_cast<std::size_t>(eeg.size())));
    e["eeg_file"] = eeg_rel.generic_string();
    e["eeg_shape"] = {t.eeg.rows(), t.eeg.cols()};

    if (options.write_audio && t.audio) {
      const fs::path audio_rel = fs::path("audio") / (stem + ".f32");
      fs::create_directories(root / "audio");
      signal::write_raw_f32(root / audio_rel, *t.audio);
      e["audio_file"] = audio_rel.generic_string();
    }
    if (options.write_spectra) {
      spatial::SpectrumRecord rec;
      rec.trial_id = t.trial_id;
      rec.spectrum = t.spectrum;
      const fs::path header = spatial::write_spectrum(root / "spectra", rec);
      e["spectrum_file"] = (fs::path("spectra") / header.filename()).generic_string();
    }
    entries.push_back(std::move(e));
  }
  manifest["subjects"] = std::vector<int>(subjects.begin(), subjects.end());
  manifest["trials"] = std::move(entries);
  std::ofstream out(root / "manifest.json", std::ios::trunc);
  if (!out) throw DataError("cannot write " + (root / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

std::vector<EegTrial> load_dataset(const fs::path& root, const spatial::SpectrumPipeline& pipeline) {
  const fs::path manifest_path = root / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open dataset manifest " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("trials") || !manifest["trials"].is_array())
    throw DataError("manifest " + manifest_path.string() + " has no 'trials' array");

  std::vector<EegTrial> trials;
  std::set<int> seen;
  const auto& entries = manifest["trials"];
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const json& e = entries[i];
    const std::string who = trial_label(e, i);
    try {
      EegTrial t;
      t.subject_id = e.at("subject_id").get<int>();
      t.trial_id = e.at("trial_id").get<int>();
      t.trial_order = e.at("trial_order").get<int>();
      t.attended_direction = e.at("attended_direction").get<int>();
      t.unattended_direction = e.value("unattended_direction", -t.attended_direction);
      t.attended_audio_id = e.at("attended_audio_id").get<int>();
      if (!is_known_direction(t.attended_direction))
        throw DataError("unknown attended direction " + std::to_string(t.attended_direction));
      if (!seen.insert(t.trial_id).second) throw DataError("duplicate trial_id");

      const auto shape = e.at("eeg_shape").get<std::vector<Index>>();
      if (shape.size() != 2 || shape[0] <= 0 || shape[1] <= 0) throw DataError("eeg_shape must be [channels, samples]");
      const auto raw = io::read_le_file<float>(root / e.at("eeg_file").get<std::string>());
      if (static_cast<Index>(raw.size()) != shape[0] * shape[1]) {
        throw DataError("EEG file holds " + std::to_string(raw.size()) + " values, shape " + std::to_string(shape[0]) +
                        "x" + std::to_string(shape[1]) + " needs " + std::to_string(shape[0] * shape[1]));
      }
      t.eeg = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                  raw.data(), shape[0], shape[1])
                  .cast<double>();

      if (e.contains("audio_file")) t.audio = signal::load_audio(root / e["audio_file"].get<std::string>());
      if (e.contains("spectrum_file")) {
        t.spectrum = spatial::read_spectrum(root / e["spectrum_file"].get<std::string>()).spectrum;
      } else if (t.audio) {
        t.spectrum = spatial::spatial_spectrum_from_audio(*t.audio, pipeline);
      } else {
        throw DataError("neither spectrum_file nor audio_file is given");
      }
      t.validate();
      trials.push_back(std::move(t));
    } catch (const json::exception& ex) {
      throw DataError(who + " in " + manifest_path.string() + ": malformed entry (" + ex.what() + ")");
    } catch (const std::exception& ex) {
      throw DataError(who + " in " + manifest_path.string() + ": " + ex.what());
    }
  }
  return trials;
}

}  // namespace dirfocus::dataset
