// Copyright 2026 The wavft Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wavft/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace wavft {

namespace {

uint32_t read_u32le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16le(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32le(std::string& s, uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16le(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

AudioBuffer read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  WAVFT_CHECK(f.good(), IoError, "cannot open wav file: ", path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const size_t n = bytes.size();

  WAVFT_CHECK(n >= 44, FormatError, "wav too short for a RIFF header: ", path);
  WAVFT_CHECK(std::memcmp(p, "RIFF", 4) == 0, FormatError, "missing RIFF magic: ", path);
  WAVFT_CHECK(std::memcmp(p + 8, "WAVE", 4) == 0, FormatError, "missing WAVE tag: ", path);

  // Walk chunks; require one fmt chunk before the data chunk.
  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  size_t off = 12;
  while (off + 8 <= n) {
    const char* id = bytes.data() + off;
    const uint32_t sz = read_u32le(p + off + 4);
    const size_t body = off + 8;
    WAVFT_CHECK(body + sz <= n, FormatError, "truncated chunk in wav: ", path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      WAVFT_CHECK(sz >= 16, FormatError, "fmt chunk too small: ", path);
      format = read_u16le(p + body);
      channels = read_u16le(p + body + 2);
      sample_rate = read_u32le(p + body + 4);
      bits = read_u16le(p + body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      WAVFT_CHECK(have_fmt, FormatError, "data chunk before fmt chunk: ", path);
      WAVFT_CHECK(format == 1, FormatError, "unsupported wav encoding (want PCM, got format tag ",
                  format, "): ", path);
      WAVFT_CHECK(channels == 1, FormatError, "unsupported wav encoding (want mono, got ",
                  channels, " channels): ", path);
      WAVFT_CHECK(bits == 16, FormatError, "unsupported wav encoding (want 16-bit, got ", bits,
                  "): ", path);
      WAVFT_CHECK(sample_rate > 0, FormatError, "zero sample rate: ", path);
      AudioBuffer out;
      out.sample_rate_hz = static_cast<int>(sample_rate);
      const size_t count = sz / 2;
      out.samples.resize(count);
      for (size_t i = 0; i < count; ++i) {
        const int16_t s = static_cast<int16_t>(read_u16le(p + body + 2 * i));
        out.samples[i] = static_cast<float>(s) / 32768.0f;
      }
      return out;
    }
    off = body + sz + (sz & 1);  // chunks are word-aligned
  }
  throw FormatError(str_cat("no data chunk found in wav: ", path));
}

void write_wav(const std::string& path, const AudioBuffer& audio) {
  const uint32_t data_bytes = static_cast<uint32_t>(audio.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32le(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put_u32le(out, 16);
  put_u16le(out, 1);  // PCM
  put_u16le(out, 1);  // mono
  put_u32le(out, static_cast<uint32_t>(audio.sample_rate_hz));
  put_u32le(out, static_cast<uint32_t>(audio.sample_rate_hz) * 2);  // byte rate
  put_u16le(out, 2);   // block align
  put_u16le(out, 16);  // bits
  out += "data";
  put_u32le(out, data_bytes);
  for (float v : audio.samples) {
    const float c = std::clamp(v, -1.0f, 1.0f);
    const int16_t s = static_cast<int16_t>(std::lround(c * 32767.0f));
    put_u16le(out, static_cast<uint16_t>(s));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  WAVFT_CHECK(f.good(), IoError, "cannot open for write: ", path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  WAVFT_CHECK(f.good(), IoError, "short write: ", path);
}

}  // namespace wavft
