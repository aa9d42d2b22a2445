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

#include "wavft/features.hpp"

#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <sstream>

namespace wavft {

namespace {

constexpr double kPi = 3.14159265358979323846;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// In-place iterative radix-2 FFT.
void fft(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

void put_u32le(std::string& s, uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t read_u32le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

int64_t lfb_frame_count(int64_t num_samples, int sample_rate_hz, const LfbConfig& cfg) {
  const int64_t win = static_cast<int64_t>(std::lround(cfg.win_ms * sample_rate_hz / 1000.0));
  const int64_t hop = static_cast<int64_t>(std::lround(cfg.hop_ms * sample_rate_hz / 1000.0));
  return sliding_frame_count(num_samples, win, hop);
}

std::vector<double> mel_filter_centers_hz(const LfbConfig& cfg) {
  const double mlo = hz_to_mel(cfg.fmin_hz);
  const double mhi = hz_to_mel(cfg.fmax_hz);
  std::vector<double> centers(static_cast<size_t>(cfg.n_mels));
  for (int j = 0; j < cfg.n_mels; ++j)
    centers[static_cast<size_t>(j)] =
        mel_to_hz(mlo + (mhi - mlo) * static_cast<double>(j + 1) / (cfg.n_mels + 1));
  return centers;
}

Tensor<float> compute_lfb(const AudioBuffer& audio, const LfbConfig& cfg) {
  const int sr = audio.sample_rate_hz;
  const int64_t win = static_cast<int64_t>(std::lround(cfg.win_ms * sr / 1000.0));
  const int64_t hop = static_cast<int64_t>(std::lround(cfg.hop_ms * sr / 1000.0));
  const int64_t n = static_cast<int64_t>(audio.samples.size());
  WAVFT_CHECK(n >= win, ShapeError, "audio too short for one analysis window: ", n,
              " samples < ", win);
  WAVFT_CHECK(win <= cfg.fft_size, ConfigError, "analysis window (", win,
              ") exceeds fft_size (", cfg.fft_size, ")");
  WAVFT_CHECK((cfg.fft_size & (cfg.fft_size - 1)) == 0, ConfigError,
              "fft_size must be a power of two");
  const int64_t frames = sliding_frame_count(n, win, hop);
  const int64_t bins = cfg.fft_size / 2 + 1;

  // Periodic Hann window.
  std::vector<double> window(static_cast<size_t>(win));
  for (int64_t i = 0; i < win; ++i)
    window[static_cast<size_t>(i)] =
        0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(win));

  // Triangular mel filters evaluated at the FFT bin frequencies. Filters
  // are kept sparse as [first_bin, weights...].
  const double mlo = hz_to_mel(cfg.fmin_hz);
  const double mhi = hz_to_mel(cfg.fmax_hz);
  std::vector<double> edges(static_cast<size_t>(cfg.n_mels) + 2);
  for (int j = 0; j < cfg.n_mels + 2; ++j)
    edges[static_cast<size_t>(j)] =
        mel_to_hz(mlo + (mhi - mlo) * static_cast<double>(j) / (cfg.n_mels + 1));
  const double hz_per_bin = static_cast<double>(sr) / cfg.fft_size;
  std::vector<std::vector<double>> fweights(static_cast<size_t>(cfg.n_mels));
  std::vector<int64_t> ffirst(static_cast<size_t>(cfg.n_mels), 0);
  for (int j = 0; j < cfg.n_mels; ++j) {
    const double lo = edges[static_cast<size_t>(j)];
    const double mid = edges[static_cast<size_t>(j) + 1];
    const double hi = edges[static_cast<size_t>(j) + 2];
    const int64_t b0 = static_cast<int64_t>(std::ceil(lo / hz_per_bin));
    ffirst[static_cast<size_t>(j)] = b0;
    for (int64_t b = b0; b < bins; ++b) {
      const double f = b * hz_per_bin;
      if (f >= hi) break;
      const double w = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      if (w > 0.0) fweights[static_cast<size_t>(j)].push_back(w);
      else if (fweights[static_cast<size_t>(j)].empty()) ++ffirst[static_cast<size_t>(j)];
      else break;
    }
  }

  Tensor<float> out({frames, cfg.n_mels});
  std::vector<std::complex<double>> buf(static_cast<size_t>(cfg.fft_size));
  std::vector<double> power(static_cast<size_t>(bins));
  for (int64_t t = 0; t < frames; ++t) {
    for (int64_t i = 0; i < cfg.fft_size; ++i) {
      double v = 0.0;
      if (i < win) v = static_cast<double>(audio.samples[static_cast<size_t>(t * hop + i)]) *
                       window[static_cast<size_t>(i)];
      buf[static_cast<size_t>(i)] = {v, 0.0};
    }
    fft(buf);
    for (int64_t b = 0; b < bins; ++b) power[static_cast<size_t>(b)] = std::norm(buf[static_cast<size_t>(b)]);
    for (int j = 0; j < cfg.n_mels; ++j) {
      double e = 0.0;
      const auto& w = fweights[static_cast<size_t>(j)];
      const int64_t b0 = ffirst[static_cast<size_t>(j)];
      for (size_t i = 0; i < w.size(); ++i) e += w[i] * power[static_cast<size_t>(b0) + i];
      out(t, j) = static_cast<float>(std::log(e + cfg.floor_eps));
    }
  }
  WAVFT_CHECK(out.all_finite(), NumericError, "non-finite filterbank output");
  return out;
}

Tensor<float> stack_and_subsample(const Tensor<float>& rows) {
  WAVFT_CHECK(rows.rank() == 2, ShapeError, "stack_and_subsample: rank-2 input expected");
  const int64_t t_in = rows.dim(0), d = rows.dim(1);
  WAVFT_CHECK(t_in >= 2, ShapeError, "stack_and_subsample: need at least 2 rows, got ", t_in);
  const int64_t t_out = t_in / 2;
  Tensor<float> out({t_out, 2 * d});
  for (int64_t t = 0; t < t_out; ++t) {
    std::memcpy(&out.data[static_cast<size_t>(t * 2 * d)],
                &rows.data[static_cast<size_t>(2 * t * d)], sizeof(float) * static_cast<size_t>(d));
    std::memcpy(&out.data[static_cast<size_t>(t * 2 * d + d)],
                &rows.data[static_cast<size_t>((2 * t + 1) * d)],
                sizeof(float) * static_cast<size_t>(d));
  }
  return out;
}

FeatureMatrix extract_features(const AudioBuffer& audio, const LfbConfig& cfg) {
  FeatureMatrix fm;
  fm.frames = stack_and_subsample(compute_lfb(audio, cfg));
  fm.frame_hop_ms = 2.0 * cfg.hop_ms;
  return fm;
}

std::vector<std::pair<int64_t, int64_t>> energy_vad(const AudioBuffer& audio, double threshold_db,
                                                    double min_segment_ms) {
  const int64_t n = static_cast<int64_t>(audio.samples.size());
  const int64_t flen = audio.sample_rate_hz / 100;  // 10 ms
  std::vector<std::pair<int64_t, int64_t>> segments;
  if (n == 0 || flen == 0) return segments;
  const int64_t nframes = (n + flen - 1) / flen;

  std::vector<double> rms(static_cast<size_t>(nframes));
  double peak = 0.0;
  for (int64_t i = 0; i < nframes; ++i) {
    const int64_t b = i * flen;
    const int64_t e = std::min(n, b + flen);
    double acc = 0.0;
    for (int64_t s = b; s < e; ++s) {
      const double v = audio.samples[static_cast<size_t>(s)];
      acc += v * v;
    }
    rms[static_cast<size_t>(i)] = std::sqrt(acc / static_cast<double>(e - b));
    peak = std::max(peak, rms[static_cast<size_t>(i)]);
  }
  if (peak <= 0.0) return segments;

  const double thr = peak * std::pow(10.0, threshold_db / 20.0);
  const int64_t min_samples =
      static_cast<int64_t>(std::lround(min_segment_ms * audio.sample_rate_hz / 1000.0));
  int64_t run_start = -1;
  for (int64_t i = 0; i <= nframes; ++i) {
    const bool speech = i < nframes && rms[static_cast<size_t>(i)] > thr;
    if (speech && run_start < 0) run_start = i;
    if (!speech && run_start >= 0) {
      const int64_t begin = run_start * flen;
      const int64_t end = std::min(n, i * flen);
      if (end - begin >= min_samples) segments.emplace_back(begin, end);
      run_start = -1;
    }
  }
  return segments;
}

void write_feature_file(const std::string& path, const Tensor<float>& frames) {
  WAVFT_CHECK(frames.rank() == 2, ShapeError, "feature file payload must be rank 2");
  std::string out;
  out.reserve(12 + static_cast<size_t>(frames.numel()) * 4);
  out += "WFT1";
  put_u32le(out, static_cast<uint32_t>(frames.dim(0)));
  put_u32le(out, static_cast<uint32_t>(frames.dim(1)));
  for (int64_t i = 0; i < frames.numel(); ++i) {
    uint32_t bits;
    float v = frames(i);
    std::memcpy(&bits, &v, 4);
    put_u32le(out, bits);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  WAVFT_CHECK(f.good(), IoError, "cannot open for write: ", path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  WAVFT_CHECK(f.good(), IoError, "short write: ", path);
}

Tensor<float> read_feature_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  WAVFT_CHECK(f.good(), IoError, "cannot open feature file: ", path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  WAVFT_CHECK(bytes.size() >= 12, FormatError, "feature file too short: ", path);
  WAVFT_CHECK(std::memcmp(bytes.data(), "WFT1", 4) == 0, FormatError,
              "bad feature file magic: ", path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const uint32_t t = read_u32le(p + 4);
  const uint32_t d = read_u32le(p + 8);
  const size_t need = 12 + static_cast<size_t>(t) * d * 4;
  WAVFT_CHECK(bytes.size() == need, FormatError, "feature file size mismatch: ", path, " (have ",
              bytes.size(), ", want ", need, ")");
  Tensor<float> out({static_cast<int64_t>(t), static_cast<int64_t>(d)});
  for (int64_t i = 0; i < out.numel(); ++i) {
    const uint32_t bits = read_u32le(p + 12 + 4 * static_cast<size_t>(i));
    float v;
    std::memcpy(&v, &bits, 4);
    out(i) = v;
  }
  WAVFT_CHECK(out.all_finite(), FormatError, "non-finite values in feature file: ", path);
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream f(path);
  WAVFT_CHECK(f.good(), IoError, "cannot open manifest: ", path);
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    ManifestEntry e;
    std::istringstream ss(line);
    std::string extra;
    std::getline(ss, e.id, '\t');
    WAVFT_CHECK(std::getline(ss, e.path, '\t') && !e.id.empty() && !e.path.empty(), FormatError,
                "malformed manifest line ", lineno, " in ", path);
    std::getline(ss, e.label_path, '\t');
    WAVFT_CHECK(!std::getline(ss, extra, '\t'), FormatError, "too many fields on manifest line ",
                lineno, " in ", path);
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream f(path, std::ios::trunc);
  WAVFT_CHECK(f.good(), IoError, "cannot open for write: ", path);
  for (const auto& e : entries) {
    f << e.id << '\t' << e.path;
    if (!e.label_path.empty()) f << '\t' << e.label_path;
    f << '\n';
  }
  WAVFT_CHECK(f.good(), IoError, "short write: ", path);
}

std::vector<int> read_label_file(const std::string& path) {
  std::ifstream f(path);
  WAVFT_CHECK(f.good(), IoError, "cannot open label file: ", path);
  std::vector<int> labels;
  long long v;
  while (f >> v) {
    WAVFT_CHECK(v >= 0, FormatError, "negative label in ", path);
    labels.push_back(static_cast<int>(v));
  }
  WAVFT_CHECK(f.eof(), FormatError, "non-integer token in label file: ", path);
  return labels;
}

void write_label_file(const std::string& path, const std::vector<int>& labels) {
  std::ofstream f(path, std::ios::trunc);
  WAVFT_CHECK(f.good(), IoError, "cannot open for write: ", path);
  for (size_t i = 0; i < labels.size(); ++i) f << labels[i] << (i + 1 < labels.size() ? ' ' : '\n');
  WAVFT_CHECK(f.good(), IoError, "short write: ", path);
}

Utterance load_utterance(const ManifestEntry& entry) {
  Utterance u;
  u.id = entry.id;
  u.features.frames = read_feature_file(entry.path);
  u.features.frame_hop_ms = 20.0;
  if (!entry.label_path.empty()) u.labels = read_label_file(entry.label_path);
  return u;
}

}  // namespace wavft
