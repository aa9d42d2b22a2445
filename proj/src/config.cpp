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

#include "wavft/config.hpp"

#include <charconv>
#include <sstream>
#include <string_view>

#include "wavft/common.hpp"

namespace wavft {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

// Shortest text that parses back to exactly the same double.
std::string fmt_double(double v) {
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  WAVFT_CHECK(ec == std::errc(), NumericError, "unprintable double");
  return std::string(buf, end);
}

double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const char* last = s.data() + s.size();
  auto [end, ec] = std::from_chars(s.data(), last, v);
  WAVFT_CHECK(ec == std::errc() && end == last && !s.empty(), ConfigError, where,
              ": expected a number, got '", std::string(s), "'");
  return v;
}

int64_t parse_int(std::string_view s, const std::string& where) {
  int64_t v = 0;
  const char* last = s.data() + s.size();
  auto [end, ec] = std::from_chars(s.data(), last, v);
  WAVFT_CHECK(ec == std::errc() && end == last && !s.empty(), ConfigError, where,
              ": expected an integer, got '", std::string(s), "'");
  return v;
}

uint64_t parse_uint(std::string_view s, const std::string& where) {
  uint64_t v = 0;
  const char* last = s.data() + s.size();
  auto [end, ec] = std::from_chars(s.data(), last, v);
  WAVFT_CHECK(ec == std::errc() && end == last && !s.empty(), ConfigError, where,
              ": expected an unsigned integer, got '", std::string(s), "'");
  return v;
}

bool parse_bool(std::string_view s, const std::string& where) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError(str_cat(where, ": expected true/false, got '", std::string(s), "'"));
}

// Single routing table for both INI lines and flag overrides, so the two
// spellings can never drift apart.
void set_key(RunConfig& cfg, const std::string& section, const std::string& key,
             std::string_view value, const std::string& where) {
  if (section == "features") {
    LfbConfig& f = cfg.features;
    if (key == "n_mels")
      f.n_mels = static_cast<int>(parse_int(value, where));
    else if (key == "win_ms")
      f.win_ms = parse_double(value, where);
    else if (key == "hop_ms")
      f.hop_ms = parse_double(value, where);
    else if (key == "fft_size")
      f.fft_size = static_cast<int>(parse_int(value, where));
    else if (key == "fmin_hz")
      f.fmin_hz = parse_double(value, where);
    else if (key == "fmax_hz")
      f.fmax_hz = parse_double(value, where);
    else if (key == "floor_eps")
      f.floor_eps = parse_double(value, where);
    else if (key == "vad_threshold_db")
      cfg.vad_threshold_db = parse_double(value, where);
    else if (key == "vad_min_segment_ms")
      cfg.vad_min_segment_ms = parse_double(value, where);
    else
      throw ConfigError(str_cat(where, ": unknown key '", key, "' in [features]"));
  } else if (section == "data") {
    SyntheticCorpusSpec& s = cfg.synth;
    MaskConfig& m = cfg.train.mask;
    if (key == "mask_start_prob")
      m.mask_start_prob = parse_double(value, where);
    else if (key == "mask_span")
      m.mask_span = static_cast<int>(parse_int(value, where));
    else if (key == "synth_num_classes")
      s.num_classes = static_cast<int>(parse_int(value, where));
    else if (key == "synth_utterances_labelled")
      s.utterances_labelled = static_cast<int>(parse_int(value, where));
    else if (key == "synth_utterances_unlabelled")
      s.utterances_unlabelled = static_cast<int>(parse_int(value, where));
    else if (key == "synth_min_frames")
      s.min_frames = static_cast<int>(parse_int(value, where));
    else if (key == "synth_max_frames")
      s.max_frames = static_cast<int>(parse_int(value, where));
    else if (key == "synth_seed")
      s.seed = parse_uint(value, where);
    else if (key == "synth_phone_min_ms")
      s.phone_min_ms = parse_double(value, where);
    else if (key == "synth_phone_max_ms")
      s.phone_max_ms = parse_double(value, where);
    else if (key == "synth_gain_min")
      s.gain_min = parse_double(value, where);
    else if (key == "synth_gain_max")
      s.gain_max = parse_double(value, where);
    else if (key == "synth_noise_floor_db")
      s.noise_floor_db = parse_double(value, where);
    else if (key == "synth_jitter_mel")
      s.jitter_mel = parse_double(value, where);
    else if (key == "synth_sample_rate_hz")
      s.sample_rate_hz = static_cast<int>(parse_int(value, where));
    else
      throw ConfigError(str_cat(where, ": unknown key '", key, "' in [data]"));
  } else if (section == "model") {
    ModelConfig& m = cfg.model;
    if (key == "num_blocks")
      m.num_blocks = static_cast<int>(parse_int(value, where));
    else if (key == "model_dim")
      m.model_dim = static_cast<int>(parse_int(value, where));
    else if (key == "num_heads")
      m.num_heads = static_cast<int>(parse_int(value, where));
    else if (key == "ffn_dim")
      m.ffn_dim = static_cast<int>(parse_int(value, where));
    else if (key == "conv_kernel")
      m.conv_kernel = static_cast<int>(parse_int(value, where));
    else if (key == "num_classes")
      m.num_classes = static_cast<int>(parse_int(value, where));
    else if (key == "context_dim")
      m.context_dim = static_cast<int>(parse_int(value, where));
    else if (key == "max_rel_dist")
      m.max_rel_dist = static_cast<int>(parse_int(value, where));
    else if (key == "input_dim")
      m.input_dim = static_cast<int>(parse_int(value, where));
    else if (key == "subsample_stride")
      m.subsample_stride = static_cast<int>(parse_int(value, where));
    else if (key == "dropout")
      m.dropout = parse_double(value, where);
    else
      throw ConfigError(str_cat(where, ": unknown key '", key, "' in [model]"));
  } else if (section == "train") {
    TrainConfig& t = cfg.train;
    if (key == "alpha")
      t.alpha = parse_double(value, where);
    else if (key == "p")
      t.p = parse_double(value, where);
    else if (key == "total_steps")
      t.total_steps = parse_int(value, where);
    else if (key == "peak_lr")
      t.peak_lr = parse_double(value, where);
    else if (key == "warmup_fraction")
      t.warmup_fraction = parse_double(value, where);
    else if (key == "batch_size")
      t.batch_size = parse_int(value, where);
    else if (key == "seed_data")
      t.seed_data = parse_uint(value, where);
    else if (key == "seed_mask")
      t.seed_mask = parse_uint(value, where);
    else if (key == "seed_distractor")
      t.seed_distractor = parse_uint(value, where);
    else if (key == "seed_init")
      t.seed_init = parse_uint(value, where);
    else if (key == "temperature")
      t.contrastive.temperature = parse_double(value, where);
    else if (key == "num_distractors")
      t.contrastive.num_distractors = static_cast<int>(parse_int(value, where));
    else if (key == "include_positive")
      t.contrastive.include_positive = parse_bool(value, where);
    else if (key == "cosine_epsilon")
      t.contrastive.cosine_epsilon = parse_double(value, where);
    else if (key == "checkpoint_every")
      t.checkpoint_every = parse_int(value, where);
    else if (key == "grad_clip")
      t.grad_clip = parse_double(value, where);
    else if (key == "prefetch_depth")
      t.prefetch_depth = static_cast<int>(parse_int(value, where));
    else if (key == "beta_limit")
      t.beta_limit = parse_double(value, where);
    else
      throw ConfigError(str_cat(where, ": unknown key '", key, "' in [train]"));
  } else if (section == "eval") {
    // Evaluation has no tunables; the section exists so configs can spell
    // it out, but any key inside is a mistake.
    throw ConfigError(str_cat(where, ": unknown key '", key, "' in [eval]"));
  } else {
    throw ConfigError(str_cat(where, ": unknown section [", section, "]"));
  }
}

std::string serialize_model(const ModelConfig& m) {
  std::string out = "[model]\n";
  out += str_cat("num_blocks = ", m.num_blocks, "\n");
  out += str_cat("model_dim = ", m.model_dim, "\n");
  out += str_cat("num_heads = ", m.num_heads, "\n");
  out += str_cat("ffn_dim = ", m.ffn_dim, "\n");
  out += str_cat("conv_kernel = ", m.conv_kernel, "\n");
  out += str_cat("num_classes = ", m.num_classes, "\n");
  out += str_cat("context_dim = ", m.context_dim, "\n");
  out += str_cat("max_rel_dist = ", m.max_rel_dist, "\n");
  out += str_cat("input_dim = ", m.input_dim, "\n");
  out += str_cat("subsample_stride = ", m.subsample_stride, "\n");
  out += str_cat("dropout = ", fmt_double(m.dropout), "\n");
  return out;
}

}  // namespace

void RunConfig::validate() const {
  WAVFT_CHECK(features.n_mels >= 1, ConfigError, "n_mels must be >= 1");
  WAVFT_CHECK(features.win_ms > 0 && features.hop_ms > 0, ConfigError,
              "window and hop must be positive");
  WAVFT_CHECK(features.fft_size >= 2, ConfigError, "fft_size must be >= 2");
  WAVFT_CHECK(features.fmin_hz >= 0 && features.fmax_hz > features.fmin_hz, ConfigError,
              "mel range must satisfy 0 <= fmin < fmax");
  WAVFT_CHECK(features.floor_eps > 0, ConfigError, "floor_eps must be > 0");
  WAVFT_CHECK(vad_min_segment_ms >= 0, ConfigError, "vad_min_segment_ms must be >= 0");
  WAVFT_CHECK(synth.num_classes >= 2, ConfigError, "synth_num_classes must be >= 2");
  WAVFT_CHECK(synth.utterances_labelled >= 0 && synth.utterances_unlabelled >= 0, ConfigError,
              "synthetic utterance counts must be >= 0");
  WAVFT_CHECK(synth.min_frames >= 5 && synth.max_frames >= synth.min_frames, ConfigError,
              "synthetic frame range must satisfy 5 <= min <= max");
  WAVFT_CHECK(synth.jitter_mel >= 0.0, ConfigError, "synth_jitter_mel must be >= 0");
  model.validate();
  train.validate();
}

RunConfig preset_config(const std::string& name) {
  RunConfig cfg;  // desk is the default everywhere
  if (name == "desk") return cfg;
  if (name == "paper") {
    cfg.model = ModelConfig::preset("paper");
    cfg.synth.num_classes = cfg.model.num_classes;
    cfg.train.mask.mask_span = 10;  // full-length utterances take longer spans
    return cfg;
  }
  throw ConfigError(str_cat("unknown preset '", name, "' (expected \"paper\" or \"desk\")"));
}

void apply_ini(RunConfig& cfg, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    const std::string where = str_cat(source, ":", line_no);
    if (line.front() == '[') {
      WAVFT_CHECK(line.back() == ']' && line.size() > 2, ConfigError, where,
                  ": malformed section header '", std::string(line), "'");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      const bool known = section == "features" || section == "data" || section == "model" ||
                         section == "train" || section == "eval";
      WAVFT_CHECK(known, ConfigError, where, ": unknown section [", section, "]");
      continue;
    }
    const size_t eq = line.find('=');
    WAVFT_CHECK(eq != std::string_view::npos, ConfigError, where,
                ": expected 'key = value', got '", std::string(line), "'");
    WAVFT_CHECK(!section.empty(), ConfigError, where, ": key before any [section]");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    WAVFT_CHECK(!key.empty(), ConfigError, where, ": empty key");
    set_key(cfg, section, key, value, where);
  }
}

void apply_override(RunConfig& cfg, const std::string& dotted_key, const std::string& value) {
  const size_t dot = dotted_key.find('.');
  WAVFT_CHECK(dot != std::string::npos && dot > 0 && dot + 1 < dotted_key.size(), ConfigError,
              "override '", dotted_key, "' must be section.key");
  set_key(cfg, dotted_key.substr(0, dot), dotted_key.substr(dot + 1),
          std::string_view(value), str_cat("override ", dotted_key));
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out = "[features]\n";
  out += str_cat("n_mels = ", cfg.features.n_mels, "\n");
  out += str_cat("win_ms = ", fmt_double(cfg.features.win_ms), "\n");
  out += str_cat("hop_ms = ", fmt_double(cfg.features.hop_ms), "\n");
  out += str_cat("fft_size = ", cfg.features.fft_size, "\n");
  out += str_cat("fmin_hz = ", fmt_double(cfg.features.fmin_hz), "\n");
  out += str_cat("fmax_hz = ", fmt_double(cfg.features.fmax_hz), "\n");
  out += str_cat("floor_eps = ", fmt_double(cfg.features.floor_eps), "\n");
  out += str_cat("vad_threshold_db = ", fmt_double(cfg.vad_threshold_db), "\n");
  out += str_cat("vad_min_segment_ms = ", fmt_double(cfg.vad_min_segment_ms), "\n");
  out += "\n[data]\n";
  out += str_cat("mask_start_prob = ", fmt_double(cfg.train.mask.mask_start_prob), "\n");
  out += str_cat("mask_span = ", cfg.train.mask.mask_span, "\n");
  out += str_cat("synth_num_classes = ", cfg.synth.num_classes, "\n");
  out += str_cat("synth_utterances_labelled = ", cfg.synth.utterances_labelled, "\n");
  out += str_cat("synth_utterances_unlabelled = ", cfg.synth.utterances_unlabelled, "\n");
  out += str_cat("synth_min_frames = ", cfg.synth.min_frames, "\n");
  out += str_cat("synth_max_frames = ", cfg.synth.max_frames, "\n");
  out += str_cat("synth_seed = ", cfg.synth.seed, "\n");
  out += str_cat("synth_phone_min_ms = ", fmt_double(cfg.synth.phone_min_ms), "\n");
  out += str_cat("synth_phone_max_ms = ", fmt_double(cfg.synth.phone_max_ms), "\n");
  out += str_cat("synth_gain_min = ", fmt_double(cfg.synth.gain_min), "\n");
  out += str_cat("synth_gain_max = ", fmt_double(cfg.synth.gain_max), "\n");
  out += str_cat("synth_noise_floor_db = ", fmt_double(cfg.synth.noise_floor_db), "\n");
  out += str_cat("synth_jitter_mel = ", fmt_double(cfg.synth.jitter_mel), "\n");
  out += str_cat("synth_sample_rate_hz = ", cfg.synth.sample_rate_hz, "\n");
  out += "\n";
  out += serialize_model(cfg.model);
  out += "\n[train]\n";
  out += str_cat("alpha = ", fmt_double(cfg.train.alpha), "\n");
  out += str_cat("p = ", fmt_double(cfg.train.p), "\n");
  out += str_cat("total_steps = ", cfg.train.total_steps, "\n");
  out += str_cat("peak_lr = ", fmt_double(cfg.train.peak_lr), "\n");
  out += str_cat("warmup_fraction = ", fmt_double(cfg.train.warmup_fraction), "\n");
  out += str_cat("batch_size = ", cfg.train.batch_size, "\n");
  out += str_cat("seed_data = ", cfg.train.seed_data, "\n");
  out += str_cat("seed_mask = ", cfg.train.seed_mask, "\n");
  out += str_cat("seed_distractor = ", cfg.train.seed_distractor, "\n");
  out += str_cat("seed_init = ", cfg.train.seed_init, "\n");
  out += str_cat("temperature = ", fmt_double(cfg.train.contrastive.temperature), "\n");
  out += str_cat("num_distractors = ", cfg.train.contrastive.num_distractors, "\n");
  out += str_cat("include_positive = ",
                 cfg.train.contrastive.include_positive ? "true" : "false", "\n");
  out += str_cat("cosine_epsilon = ", fmt_double(cfg.train.contrastive.cosine_epsilon), "\n");
  out += str_cat("checkpoint_every = ", cfg.train.checkpoint_every, "\n");
  out += str_cat("grad_clip = ", fmt_double(cfg.train.grad_clip), "\n");
  out += str_cat("prefetch_depth = ", cfg.train.prefetch_depth, "\n");
  out += str_cat("beta_limit = ", fmt_double(cfg.train.beta_limit), "\n");
  out += "\n[eval]\n";
  return out;
}

uint64_t config_digest(const RunConfig& cfg) { return fnv1a64(serialize_config(cfg)); }

uint64_t model_digest(const RunConfig& cfg) { return fnv1a64(serialize_model(cfg.model)); }

}  // namespace wavft
