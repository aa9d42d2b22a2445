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

#ifndef WAVFT_DATA_HPP_
#define WAVFT_DATA_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "wavft/features.hpp"
#include "wavft/rng.hpp"
#include "wavft/tensor.hpp"

namespace wavft {

enum class BatchKind { Labelled, Unlabelled };

inline const char* batch_kind_name(BatchKind k) {
  return k == BatchKind::Labelled ? "labelled" : "unlabelled";
}

// Span-based time masking over model-input frames. The default span suits
// short desk-scale utterances; the canonical preset stretches it to 10.
struct MaskConfig {
  double mask_start_prob = 0.065;
  int mask_span = 4;
};

// A padded group of utterances ready for one training step.
struct Batch {
  BatchKind kind = BatchKind::Unlabelled;
  std::vector<std::string> ids;
  Tensor<float> features;                // [B, T_max, D]; zero at padding
  std::vector<int> valid_len;            // input frames per utterance
  std::vector<std::vector<int>> labels;  // per utterance, trunk rate; empty if unlabelled
  Tensor<uint8_t> mask_plan;             // [B, T_max]; never set at padding

  int64_t size() const { return features.rank() == 3 ? features.dim(0) : 0; }
  int64_t max_frames() const { return features.rank() == 3 ? features.dim(1) : 0; }
};

struct SamplerConfig {
  double p = 0.5;  // probability of a labelled batch
  uint64_t seed = 0;
};

// ---- masking -----------------------------------------------------------------

// Every frame is independently a span start with probability
// mask_start_prob; spans clip at the sequence end. If nothing got masked,
// one rng-chosen frame is forced (the contrastive loss needs >= 1).
std::vector<uint8_t> plan_masks(int64_t num_frames, double mask_start_prob, int mask_span,
                                RngStream& rng);

// Out-of-graph masking (tests and inspection; the trainer uses the graph op
// with the learned vector instead).
Tensor<float> apply_mask(const Tensor<float>& features, const std::vector<uint8_t>& plan,
                         const std::vector<float>& mask_vector);

// Fills batch.mask_plan for every utterance and then strengthens the plan
// so each utterance covers at least two distinct trunk (output-rate) slots
// with valid masked input frames — the distractor sampler's precondition.
// Requires every valid_len >= 5 (two trunk slots need five input frames).
void plan_batch_masks(Batch& batch, const MaskConfig& cfg, RngStream& rng);

// Trunk slots (post stride-2/kernel-3 subsampling) touched by masked input
// frames: slot t is masked iff input frame 2t or 2t+1 is masked. Returns
// flags over the utterance's valid trunk frames.
std::vector<uint8_t> masked_trunk_slots(const Batch& batch, int64_t utterance_idx);

// ---- batching ------------------------------------------------------------------

// Shuffles utterances with rng, groups them into batch_size-sized batches
// (last may be short), pads features with zero rows. Labels are carried
// when every utterance has them; the batch kind reflects that.
std::vector<Batch> make_batches(const std::vector<Utterance>& utterances, int64_t batch_size,
                                RngStream& rng);

// ---- the labelled/unlabelled sampler ---------------------------------------------

// Pure function of (seed, step): no sequential state, so prefetching any
// number of steps ahead cannot perturb the decision sequence.
BatchKind sample_batch_kind(const SamplerConfig& cfg, int64_t step);

// Step-driven utterance cycle: deals utterances in a per-epoch shuffled
// order, reshuffling on exhaustion. The (epoch, cursor) pair is the entire
// state, which makes checkpoint resume trivial.
class BatchStream {
 public:
  BatchStream(std::vector<Utterance> utterances, int64_t batch_size, uint64_t seed);

  Batch next();

  int64_t epoch() const { return epoch_; }
  int64_t cursor() const { return cursor_; }
  int64_t num_utterances() const { return static_cast<int64_t>(utterances_.size()); }

  // Jumps to a serialized position; the order vector is a pure function of
  // (seed, epoch) so this restores the exact continuation.
  void restore(int64_t epoch, int64_t cursor);

 private:
  void reshuffle();

  std::vector<Utterance> utterances_;
  std::vector<int64_t> order_;
  int64_t batch_size_;
  uint64_t seed_;
  int64_t epoch_ = 0;
  int64_t cursor_ = 0;
};

}  // namespace wavft

#endif  // WAVFT_DATA_HPP_
