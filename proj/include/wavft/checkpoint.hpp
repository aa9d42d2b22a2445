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

#ifndef WAVFT_CHECKPOINT_HPP_
#define WAVFT_CHECKPOINT_HPP_

#include <cstdint>
#include <string>

#include "wavft/model.hpp"

namespace wavft {

// A full training snapshot: parameters, Adam moments, and the handful of
// scalars that pin the data-stream position. Together with the (digest-
// checked) config this reproduces the exact continuation trajectory.
struct TrainCheckpoint {
  uint64_t config_digest = 0;  // effective run config
  uint64_t model_digest = 0;   // [model] section only; guards artifact mixing
  int64_t step = 0;
  ParamStore params;
  ParamStore adam_m;
  ParamStore adam_v;
  int64_t labelled_epoch = 0;
  int64_t labelled_cursor = 0;
  int64_t unlabelled_epoch = 0;
  int64_t unlabelled_cursor = 0;
  bool has_optimizer = false;
};

// Binary container: magic "WFTC", format version, the two digests, then
// little-endian records of (name length, name bytes, rank, dims, f32 data).
// Parameters are stored under "param/", moments under "adam.m/" and
// "adam.v/", loop state under "state/" as single-element records.
void write_checkpoint(const std::string& path, const TrainCheckpoint& ckpt);
TrainCheckpoint read_checkpoint(const std::string& path);

// Checks that loaded parameters carry exactly the names and shapes the
// architecture defines.
void validate_params_shape(const ParamStore& params, const ModelConfig& cfg);

}  // namespace wavft

#endif  // WAVFT_CHECKPOINT_HPP_
