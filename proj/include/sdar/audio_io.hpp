#pragma once

// Raw audio container: 32-bit float PCM, little-endian, interleaved, with a
// small header declaring channel count and sample rate.
//
//   8 bytes  magic "SDARPCM1"
//   4 bytes  sample rate (uint32 LE)
//   4 bytes  channels (uint32 LE)
//   8 bytes  samples per channel (uint64 LE)
//   data     float32 LE, interleaved by frame

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdar/types.hpp"

namespace sdar {

inline constexpr char kAudioMagic[8] = {'S', 'D', 'A', 'R', 'P', 'C', 'M', '1'};

inline void write_audio(const MultichannelFrame& frame, const std::string& path) {
  frame.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("audio: cannot write " + path);
  out.write(kAudioMagic, 8);
  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  auto put_u64 = [&](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
    out.write(reinterpret_cast<const char*>(b), 8);
  };
  put_u32(static_cast<std::uint32_t>(frame.sample_rate));
  put_u32(static_cast<std::uint32_t>(frame.channel_count()));
  put_u64(frame.length());
  for (std::size_t n = 0; n < frame.length(); ++n) {
    for (std::size_t ch = 0; ch < frame.channel_count(); ++ch) {
      const float v = static_cast<float>(frame.samples[ch][n]);
      char raw[4];
      std::memcpy(raw, &v, 4);
      out.write(raw, 4);
    }
  }
  if (!out) throw std::runtime_error("audio: write failed for " + path);
}

inline MultichannelFrame read_audio(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("audio: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kAudioMagic, 8) != 0) {
    throw std::runtime_error("audio: bad magic in " + path);
  }
  unsigned char hdr[16];
  in.read(reinterpret_cast<char*>(hdr), 16);
  if (!in) throw std::runtime_error("audio: truncated header in " + path);
  std::uint32_t rate = 0, channels = 0;
  std::uint64_t length = 0;
  for (int i = 0; i < 4; ++i) rate |= static_cast<std::uint32_t>(hdr[i]) << (8 * i);
  for (int i = 0; i < 4; ++i) channels |= static_cast<std::uint32_t>(hdr[4 + i]) << (8 * i);
  for (int i = 0; i < 8; ++i) length |= static_cast<std::uint64_t>(hdr[8 + i]) << (8 * i);
  if (channels == 0) throw std::runtime_error("audio: zero channels in " + path);

  MultichannelFrame frame;
  frame.sample_rate = static_cast<int>(rate);
  frame.samples.assign(channels, std::vector<double>(length, 0.0));
  std::vector<char> row(4 * channels);
  for (std::uint64_t n = 0; n < length; ++n) {
    in.read(row.data(), static_cast<std::streamsize>(row.size()));
    if (!in) throw std::runtime_error("audio: truncated data in " + path);
    for (std::uint32_t ch = 0; ch < channels; ++ch) {
      float v;
      std::memcpy(&v, row.data() + 4 * ch, 4);
      frame.samples[ch][n] = static_cast<double>(v);
    }
  }
  return frame;
}

}  // namespace sdar
