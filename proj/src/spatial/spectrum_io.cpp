#include "dirfocus/spatial/spectrum_io.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <vector>

#include "dirfocus/binary_io.hpp"

namespace dirfocus::spatial {

std::string spectrum_stem(int trial_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spectrum_%06d", trial_id);
  return buf;
}

std::filesystem::path write_spectrum(const std::filesystem::path& dir, const SpectrumRecord& record) {
  record.spectrum.validate();
  std::filesystem::create_directories(dir);
  const std::string stem = spectrum_stem(record.trial_id);
  const auto data_path = dir / (stem + ".f64");
  const auto header_path = dir / (stem + ".json");

  const auto& power = record.spectrum.power;
  io::write_le_file<double>(data_path, std::span<const double>(power.data(), static_cast<std::size_t>(power.size())));

  nlohmann::json header;
  header["trial_id"] = record.trial_id;
  header["grid_degrees"] = std::vector<double>(record.spectrum.grid.data(),
                                               record.spectrum.grid.data() + record.spectrum.grid.size());
  header["loading"] = record.loading;
  header["geometry"] = {{"spacing_m", record.geometry.spacing},
                        {"speed_of_sound_mps", record.geometry.speed_of_sound}};
  header["data_file"] = data_path.filename().string();
  header["dtype"] = "float64-le";
  header["length"] = power.size();
  std::ofstream out(header_path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + header_path.string());
  out << header.dump(2) << "\n";
  return header_path;
}

SpectrumRecord read_spectrum(const std::filesystem::path& header_path) {
  std::ifstream in(header_path);
  if (!in) throw DataError("cannot open spectrum header " + header_path.string());
  nlohmann::json header;
  try {
    in >> header;
    SpectrumRecord rec;
    rec.trial_id = header.at("trial_id").get<int>();
    rec.loading = header.at("loading").get<double>();
    rec.geometry.spacing = header.at("geometry").at("spacing_m").get<double>();
    rec.geometry.speed_of_sound = header.at("geometry").at("speed_of_sound_mps").get<double>();
    const auto grid = header.at("grid_degrees").get<std::vector<double>>();
    const auto data_path = header_path.parent_path() / header.at("data_file").get<std::string>();
    const auto power = io::read_le_file<double>(data_path);
    if (power.size() != grid.size()) {
      throw DataError(header_path.string() + ": data file holds " + std::to_string(power.size()) +
                      " values but the grid has " + std::to_string(grid.size()));
    }
    rec.spectrum.grid = Eigen::Map<const Eigen::VectorXd>(grid.data(), static_cast<Index>(grid.size()));
    rec.spectrum.power = Eigen::Map<const Eigen::VectorXd>(power.data(), static_cast<Index>(power.size()));
    rec.spectrum.validate();
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(header_path.string() + ": " + e.what());
  }
}

}  // namespace dirfocus::spatial
