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

#ifndef WAVFT_SYNTH_HPP_
#define WAVFT_SYNTH_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "wavft/features.hpp"
#include "wavft/rng.hpp"
#include "wavft/wav.hpp"

namespace wavft {

// Deterministic synthetic corpus: utterances are sequences of "phones",
// where class c emits noise shaped by a resonator at a class-specific
// center frequency. Per-phone center jitter makes neighbouring classes
// overlap: discriminable, but only from denoised context, so the encoder
// quality (not just the labelled frame count) limits accuracy.
struct SyntheticCorpusSpec {
  int num_classes = 32;
  int utterances_labelled = 100;
  int utterances_unlabelled = 500;
  // Utterance length range in model-input (20 ms) frames, inclusive.
  int min_frames = 40;
  int max_frames = 60;
  uint64_t seed = 1;
  // Plumbing knobs (not part of the corpus identity in any deeper sense):
  double phone_min_ms = 100.0;
  double phone_max_ms = 200.0;
  double gain_min = 0.15;  // per-utterance target RMS range
  double gain_max = 0.35;
  double noise_floor_db = -30.0;  // broadband noise relative to the gain
  double jitter_mel = 50.0;       // per-phone center offset, uniform in +-jitter
  int sample_rate_hz = 16000;
};

struct SyntheticCorpus {
  std::vector<Utterance> labelled;
  std::vector<Utterance> unlabelled;
  // Frame totals, for the beta (unlabelled/labelled data ratio) report.
  int64_t labelled_frames = 0;
  int64_t unlabelled_frames = 0;

  double beta() const {
    return labelled_frames == 0 ? 0.0
                                : static_cast<double>(unlabelled_frames) /
                                      static_cast<double>(labelled_frames);
  }
};

// Center frequency (Hz) of class c's spectral peak: mel-spaced over
// [300, 7000] so neighbouring classes crowd realistically at the top.
double synth_class_center_hz(int class_idx, int num_classes);

// One phone's audio: resonator-filtered noise at the class center plus a
// uniform +-jitter_mel offset drawn from rng, scaled to the requested RMS.
// Consumes rng; pure given the stream state.
std::vector<float> synth_phone_audio(int class_idx, int num_classes, int64_t num_samples,
                                     double target_rms, int sample_rate_hz, RngStream& rng,
                                     double jitter_mel = 0.0);

// Number of samples that yields exactly `frames` stacked feature rows at
// 16 kHz canonical settings (win 400, hop 160, pair-of-2 stacking).
int64_t samples_for_frames(int64_t frames);

// Full corpus. Labels are per model OUTPUT frame (after the trunk's
// stride-2 subsampling): the class emitting at the frame's receptive-field
// center. Identical spec -> bit-identical corpus.
SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusSpec& spec, const LfbConfig& lfb);

}  // namespace wavft

#endif  // WAVFT_SYNTH_HPP_
