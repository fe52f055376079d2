#include "dirfocus/app/commands.hpp"

#include <fstream>
#include <json.hpp>
#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "dirfocus/dataset/dataset_io.hpp"
#include "dirfocus/error.hpp"
#include "dirfocus/signal/audio_io.hpp"
#include "dirfocus/spatial/spectrum_io.hpp"

namespace dirfocus::app {

namespace fs = std::filesystem;
using nlohmann::json;

SpectrumStats cmd_spectrum(const fs::path& in_dir, const fs::path& out_dir, const spatial::SpectrumPipeline& pipeline,
                           bool force) {
  const fs::path manifest_path = in_dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open dataset manifest " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  in.close();
  if (!manifest.contains("trials") || !manifest["trials"].is_array())
    throw DataError("manifest " + manifest_path.string() + " has no 'trials' array");

  fs::create_directories(out_dir);
  const auto rel = fs::weakly_canonical(out_dir).lexically_relative(fs::weakly_canonical(in_dir));
  const bool inside = !rel.empty() && *rel.begin() != "..";

  SpectrumStats stats;
  for (auto& e : manifest["trials"]) {
    const int id = e.at("trial_id").get<int>();
    if (!e.contains("audio_file")) throw DataError("trial " + std::to_string(id) + " has no audio_file");
    const fs::path header = out_dir / (spatial::spectrum_stem(id) + ".json");
    if (!force && fs::exists(header)) {
      ++stats.skipped;
    } else {
      spatial::SpectrumRecord rec;
      rec.trial_id = id;
      rec.loading = pipeline.mvdr.loading;
      rec.geometry = pipeline.geometry;
      try {
        rec.spectrum = spatial::spatial_spectrum_from_audio(signal::load_audio(in_dir / e["audio_file"].get<std::string>()),
                                                            pipeline);
      } catch (const std::exception& ex) {
        throw DataError("trial " + std::to_string(id) + ": " + ex.what());
      }
      spatial::write_spectrum(out_dir, rec);
      ++stats.computed;
    }
    if (inside) e["spectrum_file"] = (rel / header.filename()).generic_string();
  }
  if (inside) {
    std::ofstream out(manifest_path, std::ios::trunc);
    out << manifest.dump(2) << "\n";
  }
  return stats;
}

int cmd_synth(const dataset::SynthConfig& config, std::uint64_t seed, const fs::path& out_dir, bool write_audio) {
  auto cfg = config;
  cfg.keep_audio = cfg.keep_audio || write_audio;
  const auto trials = dataset::synth_generate(cfg, seed);
  dataset::write_dataset(out_dir, trials, {write_audio, true});
  return static_cast<int>(trials.size());
}

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 << 20);
#endif
}

}  // namespace dirfocus::app
