#include "dirfocus/signal/audio_io.hpp"

#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "dirfocus/binary_io.hpp"
#include "dirfocus/error.hpp"

namespace dirfocus::signal {
namespace {

template <typename T>
T read_le(const std::vector<char>& buf, std::size_t offset) {
  T v;
  std::memcpy(&v, buf.data() + offset, sizeof(T));
  return io::to_little_endian(v);
}

template <typename T>
void put_le(std::ofstream& out, T v) {
  const T le = io::to_little_endian(v);
  out.write(reinterpret_cast<const char*>(&le), sizeof(T));
}

}  // namespace

MultiChannelAudio read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (buf.size() < 12 || std::string(buf.data(), 4) != "RIFF" || std::string(buf.data() + 8, 4) != "WAVE")
    throw DataError(name + ": not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t data_offset = 0, data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id(buf.data() + pos, 4);
    const auto size = read_le<std::uint32_t>(buf, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + 16 > buf.size()) throw DataError(name + ": truncated fmt chunk");
      format = read_le<std::uint16_t>(buf, body);
      channels = read_le<std::uint16_t>(buf, body + 2);
      rate = read_le<std::uint32_t>(buf, body + 4);
      bits = read_le<std::uint16_t>(buf, body + 14);
      if (format == 0xFFFE && size >= 26) format = read_le<std::uint16_t>(buf, body + 24);
    } else if (id == "data") {
      data_offset = body;
      data_size = std::min<std::size_t>(size, buf.size() - body);
    }
    pos = body + size + (size & 1u);
  }
  if (channels == 0 || rate == 0) throw DataError(name + ": missing fmt chunk");
  if (data_offset == 0) throw DataError(name + ": missing data chunk");

  const bool pcm16 = format == 1 && bits == 16;
  const bool float32 = format == 3 && bits == 32;
  if (!pcm16 && !float32) {
    throw DataError(name + ": unsupported WAVE encoding (format " + std::to_string(format) + ", " +
                    std::to_string(bits) + " bits); expected PCM16 or float32");
  }
  const std::size_t width = bits / 8;
  const std::size_t frames = data_size / (width * channels);

  MultiChannelAudio audio;
  audio.sample_rate = rate;
  audio.samples.resize(channels, static_cast<Index>(frames));
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t off = data_offset + (n * channels + c) * width;
      audio.samples(static_cast<Index>(c), static_cast<Index>(n)) =
          pcm16 ? read_le<std::int16_t>(buf, off) / 32768.0 : static_cast<double>(read_le<float>(buf, off));
    }
  }
  return audio;
}

void write_wav(const std::filesystem::path& path, const MultiChannelAudio& audio) {
  audio.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  const auto channels = static_cast<std::uint16_t>(audio.channels());
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));
  const std::uint32_t data_size = static_cast<std::uint32_t>(audio.length()) * channels * 4u;

  out.write("RIFF", 4);
  put_le<std::uint32_t>(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, 3);
  put_le<std::uint16_t>(out, channels);
  put_le<std::uint32_t>(out, rate);
  put_le<std::uint32_t>(out, rate * channels * 4u);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels * 4u));
  put_le<std::uint16_t>(out, 32);
  out.write("data", 4);
  put_le<std::uint32_t>(out, data_size);
  for (Index n = 0; n < audio.length(); ++n)
    for (Index c = 0; c < audio.channels(); ++c) put_le<float>(out, static_cast<float>(audio.samples(c, n)));
  if (!out) throw DataError("write failed on " + path.string());
}

MultiChannelAudio read_raw_f32(const std::filesystem::path& path) {
  std::filesystem::path sidecar = path;
  sidecar += ".json";
  std::ifstream meta_in(sidecar);
  if (!meta_in) throw DataError("missing sidecar " + sidecar.string());
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(sidecar.string() + ": " + e.what());
  }
  if (!meta.contains("channels") || !meta.contains("sample_rate"))
    throw DataError(sidecar.string() + ": sidecar must declare channels and sample_rate");
  const auto channels = meta.at("channels").get<Index>();
  if (channels < 1) throw DataError(sidecar.string() + ": channels must be >= 1");

  const auto raw = io::read_le_file<float>(path);
  if (raw.size() % static_cast<std::size_t>(channels) != 0)
    throw DataError(path.string() + ": sample count is not a multiple of the channel count");
  const auto frames = static_cast<Index>(raw.size()) / channels;

  MultiChannelAudio audio;
  audio.sample_rate = meta.at("sample_rate").get<double>();
  audio.samples.resize(channels, frames);
  for (Index n = 0; n < frames; ++n)
    for (Index c = 0; c < channels; ++c) audio.samples(c, n) = raw[static_cast<std::size_t>(n * channels + c)];
  audio.validate();
  return audio;
}

void write_raw_f32(const std::filesystem::path& path, const MultiChannelAudio& audio) {
  audio.validate();
  std::vector<float> raw;
  raw.reserve(static_cast<std::size_t>(audio.samples.size()));
  for (Index n = 0; n < audio.length(); ++n)
    for (Index c = 0; c < audio.channels(); ++c) raw.push_back(static_cast<float>(audio.samples(c, n)));
  io::write_le_file<float>(path, raw);
  std::filesystem::path sidecar = path;
  sidecar += ".json";
  std::ofstream meta(sidecar);
  meta << nlohmann::json{{"channels", audio.channels()}, {"sample_rate", audio.sample_rate}}.dump(2) << "\n";
}

MultiChannelAudio load_audio(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext == ".wav" ? read_wav(path) : read_raw_f32(path);
}

}  // namespace dirfocus::signal
