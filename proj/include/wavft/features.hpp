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

#ifndef WAVFT_FEATURES_HPP_
#define WAVFT_FEATURES_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wavft/tensor.hpp"
#include "wavft/wav.hpp"

namespace wavft {

// Log-mel filterbank extraction settings. The windowing/FFT companions to
// the canonical 80-dim / 10 ms hop are conventional choices; the floor
// bounds silence at log(floor_eps).
struct LfbConfig {
  int n_mels = 80;
  double win_ms = 25.0;
  double hop_ms = 10.0;
  int fft_size = 512;
  double fmin_hz = 20.0;
  double fmax_hz = 8000.0;
  double floor_eps = 1e-10;
};

// Model-input features: T' x D (D = 160 after pairing), one row per 20 ms.
struct FeatureMatrix {
  Tensor<float> frames;  // [T', D]
  double frame_hop_ms = 20.0;

  int64_t num_frames() const { return frames.rank() == 2 ? frames.dim(0) : 0; }
  int64_t dim() const { return frames.rank() == 2 ? frames.dim(1) : 0; }
};

// One clip: features plus (for labelled data) one class index per model
// OUTPUT frame, i.e. after the trunk's stride-2 subsampling.
struct Utterance {
  std::string id;
  FeatureMatrix features;
  std::optional<std::vector<int>> labels;
};

// ---- frame arithmetic -------------------------------------------------------

// Valid (no padding) sliding-window count; 0 when the signal is too short.
inline int64_t sliding_frame_count(int64_t num_samples, int64_t win, int64_t hop) {
  return num_samples < win ? 0 : (num_samples - win) / hop + 1;
}

// Output length of a valid 1-D convolution / strided pooling over time.
inline int64_t downsampled_frame_count(int64_t frames, int kernel, int stride) {
  return frames < kernel ? 0 : (frames - kernel) / stride + 1;
}

int64_t lfb_frame_count(int64_t num_samples, int sample_rate_hz, const LfbConfig& cfg);

// ---- extraction --------------------------------------------------------------

// Analytic center frequencies (Hz) of the triangular mel filters; shared
// with tests, which locate a pure tone by nearest center.
std::vector<double> mel_filter_centers_hz(const LfbConfig& cfg);

// Hann-windowed power spectra -> triangular mel filters -> log. Returns
// [T_rows, n_mels]. Throws ShapeError when audio is shorter than one window.
Tensor<float> compute_lfb(const AudioBuffer& audio, const LfbConfig& cfg);

// Pairs rows [2t, 2t+1] into one 2D-dim row; a trailing odd row is dropped.
Tensor<float> stack_and_subsample(const Tensor<float>& rows);

// Convenience: full pipeline to a FeatureMatrix.
FeatureMatrix extract_features(const AudioBuffer& audio, const LfbConfig& cfg);

// ---- energy VAD ---------------------------------------------------------------

// Sample-index [begin, end) segments whose 10 ms-frame RMS exceeds
// threshold_db relative to the clip's peak frame RMS, keeping only segments
// of at least min_segment_ms. Silence yields an empty list.
std::vector<std::pair<int64_t, int64_t>> energy_vad(const AudioBuffer& audio, double threshold_db,
                                                    double min_segment_ms);

// ---- on-disk formats ----------------------------------------------------------

// Feature file: magic "WFT1", little-endian u32 T', u32 D, then T'*D
// little-endian f32 values row-major.
void write_feature_file(const std::string& path, const Tensor<float>& frames);
Tensor<float> read_feature_file(const std::string& path);

// Manifest line: <id>\t<feature-or-wav-path>[\t<label-path>]
struct ManifestEntry {
  std::string id;
  std::string path;
  std::string label_path;  // empty when absent
};
std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

std::vector<int> read_label_file(const std::string& path);
void write_label_file(const std::string& path, const std::vector<int>& labels);

// Loads an utterance: feature file plus optional labels.
Utterance load_utterance(const ManifestEntry& entry);

}  // namespace wavft

#endif  // WAVFT_FEATURES_HPP_
