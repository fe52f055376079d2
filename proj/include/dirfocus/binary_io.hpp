#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "dirfocus/error.hpp"

namespace dirfocus::io {

template <typename T>
T byteswap_value(T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

template <typename T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  else return byteswap_value(v);
}

/// Reads a whole file of little-endian T values.
template <typename T>
std::vector<T> read_le_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % sizeof(T) != 0) {
    throw DataError(path.string() + ": size " + std::to_string(bytes) + " is not a multiple of " +
                    std::to_string(sizeof(T)) + " bytes");
  }
  std::vector<T> out(bytes / sizeof(T));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw DataError("short read on " + path.string());
  for (auto& v : out) v = to_little_endian(v);
  return out;
}

template <typename T>
void write_le_file(const std::filesystem::path& path, std::span<const T> values) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (T v : values) {
    const T le = to_little_endian(v);
    out.write(reinterpret_cast<const char*>(&le), sizeof(T));
  }
  if (!out) throw DataError("write failed on " + path.string());
}

}  // namespace dirfocus::io
