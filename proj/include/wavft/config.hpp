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
//
// The run configuration document: every pipeline hyperparameter under the
// sections [features], [data], [model], [train], [eval], with preset ->
// file -> flag layering and a content digest stamped into every artifact.

#ifndef WAVFT_CONFIG_HPP_
#define WAVFT_CONFIG_HPP_

#include <cstdint>
#include <string>

#include "wavft/features.hpp"
#include "wavft/model.hpp"
#include "wavft/synth.hpp"
#include "wavft/trainer.hpp"

namespace wavft {

// The complete effective configuration of one run. Defaults are the desk
// preset. Masking and contrastive knobs live inside train (where the loop
// consumes them) but are addressed under [data] and [train] respectively.
struct RunConfig {
  LfbConfig features;
  double vad_threshold_db = -30.0;   // [features] vad_threshold_db
  double vad_min_segment_ms = 50.0;  // [features] vad_min_segment_ms
  SyntheticCorpusSpec synth;         // [data] synth_* keys
  ModelConfig model;
  TrainConfig train;

  void validate() const;
};

// "desk" (the struct defaults) or "paper" (the full-size architecture).
RunConfig preset_config(const std::string& name);

// Applies "key = value" lines under [section] headers on top of cfg.
// Full-line comments start with '#' or ';'. Unknown sections or keys are
// ConfigErrors naming source and line number.
void apply_ini(RunConfig& cfg, const std::string& text, const std::string& source);

// One override, addressed as "section.key" (exactly the INI keys).
void apply_override(RunConfig& cfg, const std::string& dotted_key, const std::string& value);

// Canonical text: every key in a fixed order, values in shortest exact
// form. apply_ini(serialize_config(c)) reproduces c; the digest is the
// content hash of exactly this text.
std::string serialize_config(const RunConfig& cfg);
uint64_t config_digest(const RunConfig& cfg);

// Hash of the [model] section alone; artifacts that only need architecture
// compatibility (checkpoints against eval) check this one.
uint64_t model_digest(const RunConfig& cfg);

}  // namespace wavft

#endif  // WAVFT_CONFIG_HPP_
