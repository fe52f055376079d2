#include "dirfocus/nn/checkpoint.hpp"

#include <fstream>
#include <json.hpp>

#include "dirfocus/binary_io.hpp"
#include "dirfocus/error.hpp"

namespace dirfocus::nn {

namespace {
std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return stem.string() + suffix;
}
}  // namespace

void save_checkpoint(const ParameterStore& store, const std::filesystem::path& stem) {
  std::vector<double> blob;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& p : store.entries()) {
    entries.push_back({{"name", p.name},
                       {"offset", blob.size()},
                       {"shape", p.tensor.shape()},
                       {"trainable", p.trainable}});
    blob.insert(blob.end(), p.tensor.value().data(), p.tensor.value().data() + p.tensor.size());
  }
  io::write_le_file<double>(with_suffix(stem, ".f64"), blob);
  std::ofstream out(with_suffix(stem, ".json"), std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint map " + with_suffix(stem, ".json").string());
  out << nlohmann::json{{"entries", entries}, {"total", blob.size()}}.dump(2) << "\n";
}

void load_checkpoint(ParameterStore& store, const std::filesystem::path& stem) {
  const auto map_path = with_suffix(stem, ".json");
  std::ifstream in(map_path);
  if (!in) throw DataError("cannot open checkpoint map " + map_path.string());
  nlohmann::json map;
  try {
    in >> map;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint map " + map_path.string() + ": " + e.what());
  }
  const auto blob = io::read_le_file<double>(with_suffix(stem, ".f64"));
  if (blob.size() != map.at("total").get<std::size_t>())
    throw DataError("checkpoint blob size does not match its map " + map_path.string());
  const auto& entries = map.at("entries");
  if (entries.size() != store.entries().size())
    throw DataError("checkpoint holds " + std::to_string(entries.size()) + " tensors, model has " +
                    std::to_string(store.entries().size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& p = store.entries()[i];
    const auto name = entries[i].at("name").get<std::string>();
    const auto shape = entries[i].at("shape").get<Shape>();
    if (name != p.name || shape != p.tensor.shape()) {
      throw DataError("checkpoint entry " + name + " " + shape_string(shape) + " does not match model parameter " +
                      p.name + " " + shape_string(p.tensor.shape()));
    }
    const auto offset = entries[i].at("offset").get<std::size_t>();
    if (offset + static_cast<std::size_t>(p.tensor.size()) > blob.size()) throw DataError("checkpoint entry " + name + " overruns the blob");
    p.tensor.value() = Eigen::Map<const Eigen::VectorXd>(blob.data() + offset, p.tensor.size());
  }
}

}  // namespace dirfocus::nn
