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

#ifndef WAVFT_TRAINER_HPP_
#define WAVFT_TRAINER_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wavft/checkpoint.hpp"
#include "wavft/data.hpp"
#include "wavft/losses.hpp"
#include "wavft/model.hpp"

namespace wavft {

struct TrainConfig {
  double alpha = 0.5;  // CE weight on labelled batches
  double p = 0.5;      // probability a step draws a labelled batch
  int64_t total_steps = 600;
  double peak_lr = 1e-3;
  double warmup_fraction = 0.1;
  int64_t batch_size = 8;
  uint64_t seed_data = 11;
  uint64_t seed_mask = 22;
  uint64_t seed_distractor = 33;
  uint64_t seed_init = 44;
  ContrastiveConfig contrastive;
  MaskConfig mask;
  int64_t checkpoint_every = 200;  // 0 = final checkpoint only
  double grad_clip = 0.0;          // global-norm clip; 0 disables
  int prefetch_depth = 0;          // batches prepared ahead; 0 = synchronous
  double beta_limit = 0.0;         // cap on unlabelled/labelled frames; 0 = all

  void validate() const;
};

// Linear warmup for round(warmup_fraction * total) steps, linear decay to
// zero after. lr(0) = 0, lr(W) = peak, lr(total) = 0.
double lr_at_step(int64_t step, int64_t total_steps, double peak_lr, double warmup_fraction);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  int64_t t = 0;  // completed optimizer steps (drives bias correction)
  ParamStore m;
  ParamStore v;
};

// Zero moments shaped like the architecture's parameters.
AdamState make_adam_state(const ModelConfig& cfg);

// One bias-corrected Adam update over every parameter, in registration
// order; grads[i] pairs with params.names()[i]. Fails fast on any
// non-finite gradient.
void adam_step(ParamStore& params, const std::vector<const Tensor<float>*>& grads,
               AdamState& state, double lr, const AdamConfig& cfg = {});

// One metrics record. l_ce is NA on unlabelled steps; l_c is NA on labelled
// steps that skip the contrastive branch (alpha = 1).
struct StepRecord {
  int64_t step = 0;
  LossBreakdown losses;
  bool has_contrastive = false;
  double lr = 0.0;
  double wall_ms = 0.0;  // excluded from determinism comparisons
};

std::string format_metrics_header(uint64_t config_digest, double beta);
std::string format_metrics_line(const StepRecord& rec);

// Total input frames (20 ms rows) in a corpus.
int64_t corpus_frames(const std::vector<Utterance>& utts);

// unlabelled/labelled duration ratio; negative when labelled is empty.
double corpus_beta(const std::vector<Utterance>& labelled,
                   const std::vector<Utterance>& unlabelled);

// Keeps the longest prefix of the unlabelled list whose duration ratio to
// the labelled corpus stays within beta_limit (<= 0 keeps everything).
std::vector<Utterance> truncate_to_beta(const std::vector<Utterance>& labelled,
                                        std::vector<Utterance> unlabelled, double beta_limit);

// Runs the full loop: per step, sample the batch kind, build the batch,
// plan masks, forward, combine the losses, backprop, Adam-update with the
// scheduled lr, and emit one metrics line. Checkpoints go to checkpoint_dir
// ("" disables) as ckpt-<step>.wftc plus final.wftc. Passing resume
// continues from that snapshot (its config digest must match).
TrainCheckpoint train(const ModelConfig& mcfg, const TrainConfig& tcfg,
                      const std::vector<Utterance>& labelled,
                      const std::vector<Utterance>& unlabelled, uint64_t config_digest,
                      uint64_t model_digest, std::ostream* metrics,
                      const std::string& checkpoint_dir,
                      const TrainCheckpoint* resume = nullptr);

}  // namespace wavft

#endif  // WAVFT_TRAINER_HPP_
