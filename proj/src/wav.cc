// wav.cc

// Copyright 2026  The tevkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tev/corpus.h"

namespace tev {

namespace {

std::uint32_t ReadU32(const std::string &b, std::size_t pos) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 3])) << 24;
}

std::uint16_t ReadU16(const std::string &b, std::size_t pos) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[pos]) |
                                    static_cast<unsigned char>(b[pos + 1]) << 8);
}

void PutU32(std::string &b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutU16(std::string &b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>(v >> 8));
}

struct WavLayout {
  std::size_t data_offset = 0;
  std::size_t data_bytes = 0;
};

// Validates the header and locates the data chunk. `available` is the number
// of bytes actually present (the header may be parsed from a prefix).
WavLayout ParseHeader(const std::string &b, std::size_t available, const std::string &what) {
  using K = WavError::Kind;
  if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0 || b.compare(8, 4, "WAVE") != 0)
    throw WavError(K::kMalformed, what + ": not a RIFF/WAVE file");
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::string id = b.substr(pos, 4);
    const std::size_t size = ReadU32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + 16 > b.size())
        throw WavError(K::kMalformed, what + ": truncated fmt chunk");
      const std::uint16_t format = ReadU16(b, body);
      const std::uint16_t channels = ReadU16(b, body + 2);
      const std::uint32_t rate = ReadU32(b, body + 4);
      const std::uint16_t bits = ReadU16(b, body + 14);
      if (format != 1 || bits != 16)
        throw WavError(K::kUnsupportedEncoding,
                       what + ": only 16-bit PCM is supported (format " + std::to_string(format) +
                           ", " + std::to_string(bits) + " bits)");
      if (channels != 1)
        throw WavError(K::kUnsupportedChannels,
                       what + ": only mono is supported (" + std::to_string(channels) + " channels)");
      if (rate != static_cast<std::uint32_t>(kCorpusSampleRate))
        throw WavError(K::kUnsupportedRate,
                       what + ": sample rate must be 16000 Hz, got " + std::to_string(rate));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw WavError(K::kMalformed, what + ": data chunk precedes fmt chunk");
      if (size % 2 != 0) throw WavError(K::kMalformed, what + ": odd data chunk size");
      if (body + size > available) throw WavError(K::kMalformed, what + ": truncated data chunk");
      return {body, size};
    }
    pos = body + size + (size & 1);
  }
  throw WavError(K::kMalformed, what + (have_fmt ? ": missing data chunk" : ": missing fmt chunk"));
}

std::string Slurp(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

AudioSegment ParseWav(const std::string &bytes, const std::string &what) {
  const WavLayout layout = ParseHeader(bytes, bytes.size(), what);
  AudioSegment seg;
  const std::size_t n = layout.data_bytes / 2;
  seg.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = static_cast<std::int16_t>(ReadU16(bytes, layout.data_offset + 2 * i));
    seg.samples[i] = v / 32768.0;
  }
  return seg;
}

AudioSegment ReadWav(const std::filesystem::path &path) {
  return ParseWav(Slurp(path), path.string());
}

std::size_t WavSampleCount(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  const auto total = static_cast<std::size_t>(std::filesystem::file_size(path));
  std::string head(std::min<std::size_t>(total, 4096), '\0');
  is.read(head.data(), static_cast<std::streamsize>(head.size()));
  return ParseHeader(head, total, path.string()).data_bytes / 2;
}

std::string EncodeWav(const AudioSegment &seg) {
  if (seg.sample_rate != kCorpusSampleRate)
    throw InvalidArgument("EncodeWav: sample rate must be 16000 Hz");
  const auto data_bytes = static_cast<std::uint32_t>(seg.samples.size() * 2);
  std::string b;
  b.reserve(44 + data_bytes);
  b += "RIFF";
  PutU32(b, 36 + data_bytes);
  b += "WAVEfmt ";
  PutU32(b, 16);
  PutU16(b, 1);
  PutU16(b, 1);
  PutU32(b, kCorpusSampleRate);
  PutU32(b, kCorpusSampleRate * 2);
  PutU16(b, 2);
  PutU16(b, 16);
  b += "data";
  PutU32(b, data_bytes);
  for (double s : seg.samples) {
    if (!std::isfinite(s)) throw InvalidArgument("EncodeWav: non-finite sample");
    const double q = std::clamp(std::nearbyint(s * 32768.0), -32768.0, 32767.0);
    PutU16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return b;
}

void WriteWav(const std::filesystem::path &path, const AudioSegment &seg) {
  const std::string bytes = EncodeWav(seg);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace tev
