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

#include "wavft/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "wavft/common.hpp"

namespace wavft {

namespace {

constexpr double kPi = 3.14159265358979323846;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

struct Phone {
  int64_t end_sample;  // exclusive
  int class_idx;
};

int class_at_sample(const std::vector<Phone>& phones, int64_t s) {
  for (const Phone& p : phones)
    if (s < p.end_sample) return p.class_idx;
  return phones.back().class_idx;
}

Utterance synth_one(const SyntheticCorpusSpec& spec, const LfbConfig& lfb, const std::string& id,
                    uint64_t seed, bool with_labels) {
  RngStream rng(seed);
  const int64_t frames =
      spec.min_frames + static_cast<int64_t>(rng.uniform_int(
                            static_cast<uint64_t>(spec.max_frames - spec.min_frames + 1)));
  const int64_t n = samples_for_frames(frames);
  const double gain = rng.uniform_range(spec.gain_min, spec.gain_max);

  AudioBuffer audio;
  audio.sample_rate_hz = spec.sample_rate_hz;
  audio.samples.resize(static_cast<size_t>(n));
  std::vector<Phone> phones;
  int64_t pos = 0;
  while (pos < n) {
    const int c = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(spec.num_classes)));
    const double dur_ms = rng.uniform_range(spec.phone_min_ms, spec.phone_max_ms);
    const int64_t dur = std::min<int64_t>(
        n - pos, static_cast<int64_t>(std::lround(dur_ms * spec.sample_rate_hz / 1000.0)));
    std::vector<float> burst = synth_phone_audio(c, spec.num_classes, dur, gain,
                                                 spec.sample_rate_hz, rng, spec.jitter_mel);
    std::copy(burst.begin(), burst.end(), audio.samples.begin() + pos);
    pos += dur;
    phones.push_back({pos, c});
  }

  // Broadband noise floor, then a peak guard.
  const double floor_amp = gain * std::pow(10.0, spec.noise_floor_db / 20.0);
  float peak = 0.0f;
  for (auto& s : audio.samples) {
    s += static_cast<float>(floor_amp * rng.uniform_range(-1.0, 1.0));
    peak = std::max(peak, std::fabs(s));
  }
  if (peak > 0.95f)
    for (auto& s : audio.samples) s *= 0.95f / peak;

  Utterance u;
  u.id = id;
  u.features = extract_features(audio, lfb);
  WAVFT_CHECK(u.features.num_frames() == frames, NumericError,
              "synthetic length arithmetic mismatch: want ", frames, " frames, got ",
              u.features.num_frames());
  if (with_labels) {
    // Labels live at the trunk's output rate: trunk frame t sees stacked
    // frames [2t, 2t+2] = samples [640t, 640t+1200); its center is 640t+600.
    const int64_t out_frames = downsampled_frame_count(frames, 3, 2);
    std::vector<int> labels(static_cast<size_t>(out_frames));
    for (int64_t t = 0; t < out_frames; ++t)
      labels[static_cast<size_t>(t)] = class_at_sample(phones, 640 * t + 600);
    u.labels = std::move(labels);
  }
  return u;
}

}  // namespace

double synth_class_center_hz(int class_idx, int num_classes) {
  const double mlo = hz_to_mel(300.0);
  const double mhi = hz_to_mel(7000.0);
  return mel_to_hz(mlo + (mhi - mlo) * (class_idx + 0.5) / num_classes);
}

std::vector<float> synth_phone_audio(int class_idx, int num_classes, int64_t num_samples,
                                     double target_rms, int sample_rate_hz, RngStream& rng,
                                     double jitter_mel) {
  // The jitter draw happens unconditionally so the stream advances the same
  // way whether or not a spec enables it.
  const double offset = rng.uniform_range(-jitter_mel, jitter_mel);
  const double center = synth_class_center_hz(class_idx, num_classes);
  const double fc =
      std::clamp(mel_to_hz(hz_to_mel(center) + offset), 80.0, 0.45 * sample_rate_hz);
  const double r = 0.95;  // pole radius; bandwidth ~ (1-r)*sr/pi ~ 255 Hz
  const double a1 = 2.0 * r * std::cos(2.0 * kPi * fc / sample_rate_hz);
  const double a2 = -r * r;
  std::vector<float> out(static_cast<size_t>(num_samples));
  double y1 = 0.0, y2 = 0.0, energy = 0.0;
  for (int64_t i = 0; i < num_samples; ++i) {
    const double x = rng.uniform_range(-1.0, 1.0);
    const double y = x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    out[static_cast<size_t>(i)] = static_cast<float>(y);
    energy += y * y;
  }
  if (num_samples > 0 && energy > 0.0) {
    const float s = static_cast<float>(target_rms / std::sqrt(energy / num_samples));
    for (auto& v : out) v *= s;
  }
  return out;
}

int64_t samples_for_frames(int64_t frames) {
  // lfb rows = floor((N - 400)/160) + 1; stacked = floor(rows / 2).
  // N = 320*frames + 240 gives exactly 2*frames lfb rows.
  return 320 * frames + 240;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusSpec& spec, const LfbConfig& lfb) {
  WAVFT_CHECK(spec.num_classes >= 2, ConfigError, "synthetic corpus needs >= 2 classes");
  WAVFT_CHECK(spec.utterances_labelled >= 0 && spec.utterances_unlabelled >= 0, ConfigError,
              "negative utterance count");
  WAVFT_CHECK(spec.min_frames >= 5 && spec.max_frames >= spec.min_frames, ConfigError,
              "utterance frame range must be sane and >= 5 (shorter clips cannot "
              "host two maskable positions)");

  SyntheticCorpus corpus;
  corpus.labelled.reserve(static_cast<size_t>(spec.utterances_labelled));
  corpus.unlabelled.reserve(static_cast<size_t>(spec.utterances_unlabelled));
  char id[32];
  for (int i = 0; i < spec.utterances_labelled; ++i) {
    std::snprintf(id, sizeof(id), "lab-%05d", i);
    corpus.labelled.push_back(
        synth_one(spec, lfb, id, derive_seed(spec.seed, "synth/lab", static_cast<uint64_t>(i)),
                  /*with_labels=*/true));
    corpus.labelled_frames += corpus.labelled.back().features.num_frames();
  }
  for (int i = 0; i < spec.utterances_unlabelled; ++i) {
    std::snprintf(id, sizeof(id), "unl-%05d", i);
    corpus.unlabelled.push_back(
        synth_one(spec, lfb, id, derive_seed(spec.seed, "synth/unl", static_cast<uint64_t>(i)),
                  /*with_labels=*/false));
    corpus.unlabelled_frames += corpus.unlabelled.back().features.num_frames();
  }
  return corpus;
}

}  // namespace wavft
