#include <cmath>
#include <cstring>
#include <sstream>

#include "maskwave/dsp.hpp"
#include "maskwave/errors.hpp"
#include "maskwave/io_util.hpp"

namespace maskwave::dsp {

namespace {

std::uint32_t read_u32(std::span<const unsigned char> b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) |
         static_cast<std::uint32_t>(b[off + 1]) << 8 |
         static_cast<std::uint32_t>(b[off + 2]) << 16 |
         static_cast<std::uint32_t>(b[off + 3]) << 24;
}

std::uint16_t read_u16(std::span<const unsigned char> b, std::size_t off) {
  return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

bool tag_is(std::span<const unsigned char> b, std::size_t off,
            const char* tag) {
  return std::memcmp(b.data() + off, tag, 4) == 0;
}

}  // namespace

Waveform decode_wav(std::span<const unsigned char> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE"))
    throw FormatError("not a RIFF/WAVE container");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  const unsigned char* data_ptr = nullptr;
  std::uint32_t data_size = 0;

  std::size_t off = 12;
  while (off + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = read_u32(bytes, off + 4);
    const std::size_t body = off + 8;
    if (body + chunk_size > bytes.size())
      throw FormatError("truncated WAV chunk");
    if (tag_is(bytes, off, "fmt ")) {
      if (chunk_size < 16) throw FormatError("fmt chunk too small");
      format = read_u16(bytes, body + 0);
      channels = read_u16(bytes, body + 2);
      sample_rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
      have_fmt = true;
    } else if (tag_is(bytes, off, "data")) {
      data_ptr = bytes.data() + body;
      data_size = chunk_size;
    }
    off = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (!have_fmt) throw FormatError("missing fmt chunk");
  if (data_ptr == nullptr) throw FormatError("missing data chunk");
  if (format != 1) throw UnsupportedFormatError("only PCM WAV is supported");
  if (channels != 1) throw UnsupportedFormatError("only mono WAV is supported");
  if (bits != 16) throw UnsupportedFormatError("only 16-bit WAV is supported");
  if (data_size % 2 != 0) throw FormatError("odd PCM16 data size");

  Waveform w;
  w.sample_rate = static_cast<int>(sample_rate);
  w.samples.resize(data_size / 2);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const auto raw = static_cast<std::int16_t>(
        data_ptr[2 * i] | (data_ptr[2 * i + 1] << 8));
    w.samples[i] = static_cast<double>(raw) / 32768.0;
  }
  return w;
}

std::vector<unsigned char> encode_wav(const Waveform& w) {
  const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
  const std::uint32_t data_size = n * 2;
  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  auto push_u32 = [&](std::uint32_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 24) & 0xff);
  };
  auto push_u16 = [&](std::uint16_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
  };
  auto push_tag = [&](const char* t) {
    out.insert(out.end(), t, t + 4);
  };
  push_tag("RIFF");
  push_u32(36 + data_size);
  push_tag("WAVE");
  push_tag("fmt ");
  push_u32(16);
  push_u16(1);  // PCM
  push_u16(1);  // mono
  push_u32(static_cast<std::uint32_t>(w.sample_rate));
  push_u32(static_cast<std::uint32_t>(w.sample_rate) * 2);  // byte rate
  push_u16(2);   // block align
  push_u16(16);  // bits
  push_tag("data");
  push_u32(data_size);
  for (double s : w.samples) {
    double clamped = s;
    if (clamped > 32767.0 / 32768.0) clamped = 32767.0 / 32768.0;
    if (clamped < -1.0) clamped = -1.0;
    const auto raw = static_cast<std::int16_t>(std::lrint(clamped * 32768.0));
    push_u16(static_cast<std::uint16_t>(raw));
  }
  return out;
}

Waveform read_wav(const std::filesystem::path& path) {
  const auto bytes = io::read_file_bytes(path);
  try {
    return decode_wav(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const UnsupportedFormatError& e) {
    throw UnsupportedFormatError(path.string() + ": " + e.what());
  }
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  const auto bytes = encode_wav(w);
  io::atomic_write_file(path, [&](std::ostream& os) {
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  });
}

}  // namespace maskwave::dsp
