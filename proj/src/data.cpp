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

#include "wavft/data.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "wavft/common.hpp"

namespace wavft {

std::vector<uint8_t> plan_masks(int64_t num_frames, double mask_start_prob, int mask_span,
                                RngStream& rng) {
  WAVFT_CHECK(num_frames >= 1, ShapeError, "plan_masks: need at least one frame");
  WAVFT_CHECK(mask_start_prob >= 0.0 && mask_start_prob <= 1.0, ConfigError,
              "mask_start_prob out of [0,1]: ", mask_start_prob);
  WAVFT_CHECK(mask_span >= 1, ConfigError, "mask_span must be >= 1");

  std::vector<uint8_t> plan(static_cast<size_t>(num_frames), 0);
  bool any = false;
  for (int64_t t = 0; t < num_frames; ++t) {
    if (rng.uniform() < mask_start_prob) {
      const int64_t end = std::min<int64_t>(num_frames, t + mask_span);
      for (int64_t s = t; s < end; ++s) plan[static_cast<size_t>(s)] = 1;
      any = true;
    }
  }
  if (!any) plan[rng.uniform_int(static_cast<uint64_t>(num_frames))] = 1;
  return plan;
}

Tensor<float> apply_mask(const Tensor<float>& features, const std::vector<uint8_t>& plan,
                         const std::vector<float>& mask_vector) {
  WAVFT_CHECK(features.rank() == 2, ShapeError, "apply_mask: rank-2 features expected");
  WAVFT_CHECK(static_cast<int64_t>(plan.size()) == features.dim(0), ShapeError,
              "apply_mask: plan length ", plan.size(), " != frame count ", features.dim(0));
  WAVFT_CHECK(static_cast<int64_t>(mask_vector.size()) == features.dim(1), ShapeError,
              "apply_mask: mask vector dim mismatch");
  Tensor<float> out = features;
  for (int64_t t = 0; t < features.dim(0); ++t)
    if (plan[static_cast<size_t>(t)])
      std::memcpy(&out.data[static_cast<size_t>(t * features.dim(1))], mask_vector.data(),
                  sizeof(float) * mask_vector.size());
  return out;
}

void plan_batch_masks(Batch& batch, const MaskConfig& cfg, RngStream& rng) {
  const int64_t b = batch.size();
  const int64_t t_max = batch.max_frames();
  batch.mask_plan = Tensor<uint8_t>({b, t_max});
  for (int64_t i = 0; i < b; ++i) {
    const int64_t valid = batch.valid_len[static_cast<size_t>(i)];
    WAVFT_CHECK(valid >= 5, ShapeError, "utterance ", batch.ids[static_cast<size_t>(i)],
                " has only ", valid,
                " input frames; need >= 5 so two trunk positions can be masked");
    std::vector<uint8_t> plan = plan_masks(valid, cfg.mask_start_prob, cfg.mask_span, rng);
    for (int64_t t = 0; t < valid; ++t) batch.mask_plan(i, t) = plan[static_cast<size_t>(t)];

    // Strengthen until two distinct trunk slots are covered: the
    // contrastive loss needs a positive and at least one distractor drawn
    // from a different position.
    const int64_t trunk = downsampled_frame_count(valid, 3, 2);
    auto covered = [&]() {
      int64_t n = 0;
      for (int64_t t = 0; t < trunk; ++t)
        if (batch.mask_plan(i, 2 * t) || batch.mask_plan(i, 2 * t + 1)) ++n;
      return n;
    };
    while (covered() < 2) {
      std::vector<int64_t> uncovered;
      for (int64_t t = 0; t < trunk; ++t)
        if (!batch.mask_plan(i, 2 * t) && !batch.mask_plan(i, 2 * t + 1)) uncovered.push_back(t);
      WAVFT_CHECK(!uncovered.empty(), ShapeError,
                  "cannot reach two masked trunk slots for utterance ",
                  batch.ids[static_cast<size_t>(i)]);
      const int64_t pick =
          uncovered[rng.uniform_int(static_cast<uint64_t>(uncovered.size()))];
      batch.mask_plan(i, 2 * pick) = 1;
    }
  }
}

std::vector<uint8_t> masked_trunk_slots(const Batch& batch, int64_t utterance_idx) {
  const int64_t valid = batch.valid_len[static_cast<size_t>(utterance_idx)];
  const int64_t trunk = downsampled_frame_count(valid, 3, 2);
  std::vector<uint8_t> out(static_cast<size_t>(trunk), 0);
  for (int64_t t = 0; t < trunk; ++t)
    out[static_cast<size_t>(t)] =
        batch.mask_plan(utterance_idx, 2 * t) || batch.mask_plan(utterance_idx, 2 * t + 1);
  return out;
}

namespace {

Batch make_padded_batch(const std::vector<const Utterance*>& group) {
  int64_t t_max = 0;
  const int64_t dim = group[0]->features.dim();
  bool all_labelled = true;
  for (const Utterance* u : group) {
    WAVFT_CHECK(u->features.dim() == dim, ShapeError, "feature dim mismatch in batch: ",
                u->features.dim(), " vs ", dim);
    t_max = std::max(t_max, u->features.num_frames());
    all_labelled = all_labelled && u->labels.has_value();
  }

  Batch b;
  b.kind = all_labelled ? BatchKind::Labelled : BatchKind::Unlabelled;
  b.features = Tensor<float>({static_cast<int64_t>(group.size()), t_max, dim});
  b.mask_plan = Tensor<uint8_t>({static_cast<int64_t>(group.size()), t_max});
  for (size_t i = 0; i < group.size(); ++i) {
    const Utterance* u = group[i];
    b.ids.push_back(u->id);
    const int64_t frames = u->features.num_frames();
    b.valid_len.push_back(static_cast<int>(frames));
    std::memcpy(&b.features.data[static_cast<size_t>(static_cast<int64_t>(i) * t_max * dim)],
                u->features.frames.data.data(),
                sizeof(float) * static_cast<size_t>(frames * dim));
    if (all_labelled) b.labels.push_back(*u->labels);
  }
  return b;
}

}  // namespace

std::vector<Batch> make_batches(const std::vector<Utterance>& utterances, int64_t batch_size,
                                RngStream& rng) {
  WAVFT_CHECK(batch_size >= 1, ConfigError, "batch_size must be >= 1");
  std::vector<int64_t> order(utterances.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  std::vector<Batch> batches;
  for (size_t at = 0; at < order.size(); at += static_cast<size_t>(batch_size)) {
    const size_t take = std::min(static_cast<size_t>(batch_size), order.size() - at);
    std::vector<const Utterance*> group;
    group.reserve(take);
    for (size_t i = 0; i < take; ++i)
      group.push_back(&utterances[static_cast<size_t>(order[at + i])]);
    batches.push_back(make_padded_batch(group));
  }
  return batches;
}

BatchKind sample_batch_kind(const SamplerConfig& cfg, int64_t step) {
  WAVFT_CHECK(cfg.p >= 0.0 && cfg.p <= 1.0, ConfigError, "sampler p out of [0,1]: ", cfg.p);
  WAVFT_CHECK(step >= 0, ConfigError, "negative step");
  if (cfg.p >= 1.0) return BatchKind::Labelled;
  if (cfg.p <= 0.0) return BatchKind::Unlabelled;
  const uint64_t bits = derive_seed(cfg.seed, "sampler", static_cast<uint64_t>(step));
  const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
  return u < cfg.p ? BatchKind::Labelled : BatchKind::Unlabelled;
}

BatchStream::BatchStream(std::vector<Utterance> utterances, int64_t batch_size, uint64_t seed)
    : utterances_(std::move(utterances)), batch_size_(batch_size), seed_(seed) {
  WAVFT_CHECK(!utterances_.empty(), ConfigError, "BatchStream needs at least one utterance");
  WAVFT_CHECK(batch_size_ >= 1, ConfigError, "batch_size must be >= 1");
  reshuffle();
}

void BatchStream::reshuffle() {
  order_.resize(utterances_.size());
  std::iota(order_.begin(), order_.end(), 0);
  RngStream rng(derive_seed(seed_, "order", static_cast<uint64_t>(epoch_)));
  rng.shuffle(order_);
}

Batch BatchStream::next() {
  if (cursor_ >= static_cast<int64_t>(order_.size())) {
    ++epoch_;
    cursor_ = 0;
    reshuffle();
  }
  const size_t take = std::min(static_cast<size_t>(batch_size_),
                               order_.size() - static_cast<size_t>(cursor_));
  std::vector<const Utterance*> group;
  group.reserve(take);
  for (size_t i = 0; i < take; ++i)
    group.push_back(&utterances_[static_cast<size_t>(order_[static_cast<size_t>(cursor_) + i])]);
  cursor_ += static_cast<int64_t>(take);
  return make_padded_batch(group);
}

void BatchStream::restore(int64_t epoch, int64_t cursor) {
  WAVFT_CHECK(epoch >= 0 && cursor >= 0 && cursor <= static_cast<int64_t>(utterances_.size()),
              ConfigError, "invalid stream state: epoch ", epoch, ", cursor ", cursor);
  epoch_ = epoch;
  cursor_ = cursor;
  reshuffle();
}

}  // namespace wavft
