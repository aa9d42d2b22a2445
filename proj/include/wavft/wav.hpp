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

#ifndef WAVFT_WAV_HPP_
#define WAVFT_WAV_HPP_

#include <string>
#include <vector>

#include "wavft/common.hpp"

namespace wavft {

// One clip of mono audio, amplitudes in [-1, 1].
struct AudioBuffer {
  std::vector<float> samples;
  int sample_rate_hz = 16000;

  double seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate_hz);
  }
};

// Reads a PCM 16-bit signed mono WAV file. Samples are scaled by 1/32768.
// Throws FormatError on malformed RIFF structure or on any encoding other
// than 16-bit mono PCM.
AudioBuffer read_wav(const std::string& path);

// Writes 16-bit mono PCM; samples are clamped to [-1, 1] and scaled by 32767.
void write_wav(const std::string& path, const AudioBuffer& audio);

}  // namespace wavft

#endif  // WAVFT_WAV_HPP_
