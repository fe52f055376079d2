#pragma once

#include <filesystem>

#include "dirfocus/spatial/mvdr.hpp"

namespace dirfocus::spatial {

/// Header describing one persisted spectrum.
struct SpectrumRecord {
  int trial_id = 0;
  double loading = 0.0;
  ArrayGeometry geometry;
  SpatialSpectrum spectrum;
};

/// File stem used for a trial: "spectrum_<trial_id>" with zero padding.
std::string spectrum_stem(int trial_id);

/// Writes `<dir>/<stem>.f64` (float64 little-endian power values) and
/// `<dir>/<stem>.json` ({trial_id, grid_degrees, loading, geometry, data_file,
/// length}). Returns the path of the JSON header.
std::filesystem::path write_spectrum(const std::filesystem::path& dir, const SpectrumRecord& record);

/// Reads a spectrum given its JSON header path; the data file is resolved
/// relative to the header.
SpectrumRecord read_spectrum(const std::filesystem::path& header_path);

}  // namespace dirfocus::spatial
