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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "wavft/features.hpp"
#include "wavft/rng.hpp"
#include "wavft/wav.hpp"

using namespace wavft;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

AudioBuffer sine(double freq_hz, double seconds, int sr = 16000, float amp = 0.5f) {
  AudioBuffer a;
  a.sample_rate_hz = sr;
  const int64_t n = static_cast<int64_t>(seconds * sr);
  a.samples.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    a.samples[static_cast<size_t>(i)] =
        amp * static_cast<float>(std::sin(2.0 * M_PI * freq_hz * i / sr));
  return a;
}

}  // namespace

TEST_CASE("wav round-trip: write then read recovers samples to 1 LSB") {
  AudioBuffer a = sine(1000.0, 0.25);
  const std::string path = temp_path("wavft_roundtrip.wav");
  write_wav(path, a);
  AudioBuffer b = read_wav(path);
  REQUIRE(b.sample_rate_hz == 16000);
  REQUIRE(b.samples.size() == a.samples.size());
  float max_err = 0.0f;
  for (size_t i = 0; i < a.samples.size(); ++i)
    max_err = std::max(max_err, std::fabs(a.samples[i] - b.samples[i]));
  CHECK(max_err < 1.0f / 32768.0f);
  std::filesystem::remove(path);
}

TEST_CASE("wav scaling: full-scale positive sample reads as 32767/32768") {
  // Hand-built header + one second of +32767.
  const std::string path = temp_path("wavft_fullscale.wav");
  AudioBuffer a;
  a.samples.assign(16000, 1.0f);  // clamps to 32767 on write
  write_wav(path, a);
  AudioBuffer b = read_wav(path);
  REQUIRE(b.samples.size() == 16000);
  for (size_t i = 0; i < 100; ++i) CHECK(b.samples[i] == doctest::Approx(32767.0 / 32768.0));
  std::filesystem::remove(path);
}

TEST_CASE("wav reader rejects corrupted magic and bad encodings") {
  const std::string path = temp_path("wavft_bad.wav");
  AudioBuffer a = sine(500.0, 0.05);
  write_wav(path, a);

  // Corrupt the RIFF magic.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("JUNK", 4);
  }
  CHECK_THROWS_AS(read_wav(path), FormatError);

  // Rewrite, then claim two channels in the fmt chunk.
  write_wav(path, a);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(22);
    const char two[2] = {2, 0};
    f.write(two, 2);
  }
  CHECK_THROWS_AS(read_wav(path), FormatError);
  CHECK_THROWS_AS(read_wav(temp_path("wavft_missing_file.wav")), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("lfb frame count: 1.0 s at 16 kHz gives 98 rows") {
  LfbConfig cfg;
  AudioBuffer a = sine(440.0, 1.0);
  Tensor<float> rows = compute_lfb(a, cfg);
  // floor((16000 - 400)/160) + 1 = 98
  CHECK(rows.dim(0) == 98);
  CHECK(rows.dim(1) == 80);
  CHECK(lfb_frame_count(16000, 16000, cfg) == 98);
}

TEST_CASE("frame-count arithmetic across random lengths") {
  LfbConfig cfg;
  RngStream rng(404);
  for (int trial = 0; trial < 20; ++trial) {
    const int64_t n = 500 + static_cast<int64_t>(rng.uniform_int(30000));
    AudioBuffer a;
    a.samples.resize(static_cast<size_t>(n));
    for (auto& s : a.samples) s = static_cast<float>(rng.uniform_range(-0.5, 0.5));
    Tensor<float> rows = compute_lfb(a, cfg);
    const int64_t want_rows = (n - 400) / 160 + 1;
    REQUIRE(rows.dim(0) == want_rows);
    if (want_rows >= 2) {
      Tensor<float> stacked = stack_and_subsample(rows);
      CHECK(stacked.dim(0) == want_rows / 2);
      CHECK(stacked.dim(1) == 160);
    }
  }
}

TEST_CASE("pure 1 kHz tone peaks in the analytically nearest mel bin") {
  LfbConfig cfg;
  AudioBuffer a = sine(1000.0, 1.0);
  Tensor<float> rows = compute_lfb(a, cfg);

  std::vector<double> centers = mel_filter_centers_hz(cfg);
  int nearest = 0;
  for (int j = 1; j < cfg.n_mels; ++j)
    if (std::fabs(centers[static_cast<size_t>(j)] - 1000.0) <
        std::fabs(centers[static_cast<size_t>(nearest)] - 1000.0))
      nearest = j;

  // Check a middle frame (edges see window tapering only).
  const int64_t t = rows.dim(0) / 2;
  int argmax = 0;
  for (int j = 1; j < cfg.n_mels; ++j)
    if (rows(t, j) > rows(t, argmax)) argmax = j;
  CHECK(argmax == nearest);
}

TEST_CASE("all-zero audio maps every filterbank entry to log(floor)") {
  LfbConfig cfg;
  AudioBuffer a;
  a.samples.assign(16000, 0.0f);
  Tensor<float> rows = compute_lfb(a, cfg);
  const float expect = static_cast<float>(std::log(cfg.floor_eps));
  for (int64_t i = 0; i < rows.numel(); ++i) REQUIRE(rows(i) == doctest::Approx(expect));
}

TEST_CASE("too-short audio is rejected") {
  LfbConfig cfg;
  AudioBuffer a;
  a.samples.assign(399, 0.1f);  // one sample below the 25 ms window
  CHECK_THROWS_AS(compute_lfb(a, cfg), ShapeError);
}

TEST_CASE("stack_and_subsample pairs rows and drops the odd tail") {
  Tensor<float> rows({5, 3});
  for (int64_t i = 0; i < rows.numel(); ++i) rows(i) = static_cast<float>(i);
  Tensor<float> out = stack_and_subsample(rows);
  REQUIRE(out.dim(0) == 2);
  REQUIRE(out.dim(1) == 6);
  // Row 0 = [row0 || row1], row 1 = [row2 || row3]; row 4 dropped.
  for (int d = 0; d < 3; ++d) {
    CHECK(out(0, d) == rows(0, d));
    CHECK(out(0, 3 + d) == rows(1, d));
    CHECK(out(1, d) == rows(2, d));
    CHECK(out(1, 3 + d) == rows(3, d));
  }
  Tensor<float> one({1, 3});
  CHECK_THROWS_AS(stack_and_subsample(one), ShapeError);
}

TEST_CASE("98 lfb rows stack to 49 and trunk arithmetic gives 24") {
  AudioBuffer a = sine(440.0, 1.0);
  LfbConfig cfg;
  FeatureMatrix fm = extract_features(a, cfg);
  CHECK(fm.num_frames() == 49);
  CHECK(fm.dim() == 160);
  CHECK(fm.frame_hop_ms == doctest::Approx(20.0));
  CHECK(downsampled_frame_count(fm.num_frames(), 3, 2) == 24);
}

TEST_CASE("energy_vad finds the single noise region in padded silence") {
  RngStream rng(17);
  AudioBuffer a;
  a.samples.resize(32000);  // 2 s total
  for (int64_t i = 8000; i < 24000; ++i)  // 0.5 s .. 1.5 s
    a.samples[static_cast<size_t>(i)] = static_cast<float>(rng.uniform_range(-1.0, 1.0));
  auto segs = energy_vad(a, -30.0, 50.0);
  REQUIRE(segs.size() == 1);
  // Within +-2 frames (320 samples) of the construction.
  CHECK(std::llabs(segs[0].first - 8000) <= 320);
  CHECK(std::llabs(segs[0].second - 24000) <= 320);
}

TEST_CASE("energy_vad: silence empty, uniform noise spans everything") {
  AudioBuffer silent;
  silent.samples.assign(16000, 0.0f);
  CHECK(energy_vad(silent, -30.0, 50.0).empty());

  RngStream rng(18);
  AudioBuffer noisy;
  noisy.samples.resize(16123);  // deliberately not frame-aligned
  for (auto& s : noisy.samples) s = static_cast<float>(rng.uniform_range(-1.0, 1.0));
  auto segs = energy_vad(noisy, -30.0, 50.0);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].first == 0);
  CHECK(segs[0].second == 16123);
}

TEST_CASE("energy_vad output is sorted, disjoint, in-bounds, min-length") {
  RngStream rng(19);
  AudioBuffer a;
  a.samples.resize(48000);
  // Three bursts with gaps; one burst deliberately below min length.
  auto burst = [&](int64_t b, int64_t e) {
    for (int64_t i = b; i < e; ++i)
      a.samples[static_cast<size_t>(i)] = static_cast<float>(rng.uniform_range(-1.0, 1.0));
  };
  burst(1600, 8000);
  burst(16000, 16480);  // 30 ms, below the 50 ms minimum
  burst(32000, 43200);
  auto segs = energy_vad(a, -30.0, 50.0);
  REQUIRE(segs.size() == 2);
  int64_t prev_end = 0;
  for (auto [b, e] : segs) {
    CHECK(b >= prev_end);
    CHECK(e > b);
    CHECK(e <= 48000);
    CHECK((e - b) >= 800);  // 50 ms at 16 kHz
    prev_end = e;
  }
}

TEST_CASE("pipeline outputs stay finite for arbitrary finite audio") {
  RngStream rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    AudioBuffer a;
    a.samples.resize(480 + rng.uniform_int(8000));
    for (auto& s : a.samples) s = static_cast<float>(rng.uniform_range(-1.0, 1.0));
    LfbConfig cfg;
    FeatureMatrix fm = extract_features(a, cfg);
    REQUIRE(fm.frames.all_finite());
  }
}

TEST_CASE("feature file round-trip is exact and rejects corruption") {
  Tensor<float> m({7, 5});
  RngStream rng(29);
  for (int64_t i = 0; i < m.numel(); ++i) m(i) = static_cast<float>(rng.uniform_range(-9, 9));
  const std::string path = temp_path("wavft_feat.wft1");
  write_feature_file(path, m);
  Tensor<float> back = read_feature_file(path);
  REQUIRE(back.shape == m.shape);
  for (int64_t i = 0; i < m.numel(); ++i) REQUIRE(back(i) == m(i));

  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("NOPE", 4);
  }
  CHECK_THROWS_AS(read_feature_file(path), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("manifest and label files round-trip; malformed lines rejected") {
  const std::string mpath = temp_path("wavft_manifest.tsv");
  const std::string lpath = temp_path("wavft_labels.txt");
  write_label_file(lpath, {3, 1, 4, 1, 5});
  CHECK(read_label_file(lpath) == std::vector<int>({3, 1, 4, 1, 5}));

  std::vector<ManifestEntry> entries = {
      {"utt-a", "/tmp/a.wft1", lpath},
      {"utt-b", "/tmp/b.wft1", ""},
  };
  write_manifest(mpath, entries);
  auto back = read_manifest(mpath);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "utt-a");
  CHECK(back[0].label_path == lpath);
  CHECK(back[1].label_path.empty());

  {
    std::ofstream f(mpath);
    f << "only-an-id\n";
  }
  CHECK_THROWS_AS(read_manifest(mpath), FormatError);
  {
    std::ofstream f(mpath);
    f << "id\tpath\tlabels\textra-field\n";
  }
  CHECK_THROWS_AS(read_manifest(mpath), FormatError);
  {
    std::ofstream f(lpath);
    f << "1 2 potato\n";
  }
  CHECK_THROWS_AS(read_label_file(lpath), FormatError);
  std::filesystem::remove(mpath);
  std::filesystem::remove(lpath);
}
