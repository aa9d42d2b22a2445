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

#ifndef WAVFT_LOSSES_HPP_
#define WAVFT_LOSSES_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "wavft/data.hpp"
#include "wavft/graph.hpp"
#include "wavft/rng.hpp"
#include "wavft/tensor.hpp"

namespace wavft {

// Posterior floor applied before log in the cross-entropy losses. Clamping
// affects the reported value only (and a counter); gradients use the exact
// softmax-minus-one-hot form, which is always finite.
inline constexpr double kPosteriorClampFloor = 1e-12;

struct ContrastiveConfig {
  double temperature = 0.1;
  int num_distractors = 10;
  double cosine_epsilon = 1e-8;
  // When true (the convention used here), the candidate set is the true
  // target plus the distractors, K+1 terms. False drops the positive from
  // the denominator.
  bool include_positive = true;

  void validate() const;
};

// Per-step loss components. l_ce is meaningful only when has_ce (labelled
// batches).
struct LossBreakdown {
  BatchKind batch_kind = BatchKind::Unlabelled;
  bool has_ce = false;
  double l_ce = 0.0;
  double l_c = 0.0;
  double combined = 0.0;
  int64_t num_ce_frames = 0;
  int64_t num_contrastive_positions = 0;
  int64_t clamp_count = 0;
};

// dot(a,b) / (max(|a|, eps) * max(|b|, eps)); the guard keeps zero vectors
// finite (and maps them to similarity 0).
double cosine_sim(const double* a, const double* b, int64_t n, double epsilon = 1e-8);
double cosine_sim(const std::vector<double>& a, const std::vector<double>& b,
                  double epsilon = 1e-8);

// Reference cross-entropy from materialized posteriors: mean over every
// valid frame of -log max(posterior[label], floor). Frame-weighted across
// the batch (sums divided by the total valid-frame count).
double cross_entropy_from_posteriors(const Tensor<float>& posteriors,
                                     const std::vector<std::vector<int>>& labels,
                                     const std::vector<int>& trunk_valid,
                                     int64_t* clamp_count = nullptr);

// K candidate positions for an anchor: uniform WITHOUT replacement from
// masked_positions minus the anchor; if fewer than K others exist, uniform
// WITH replacement from that set. Needs >= 2 masked positions.
std::vector<int> sample_distractors(const std::vector<int>& masked_positions, int anchor,
                                    int num_distractors, RngStream& rng);

// Every masked valid trunk slot becomes an anchor with its own distractor
// draw. Deterministic consumption order: utterances ascending, slots
// ascending. Utterances with no masked slots contribute nothing; exactly
// one masked slot is an error (no distractor pool).
struct ContrastivePlan {
  struct Anchor {
    int utterance = 0;
    int slot = 0;
    std::vector<int> distractor_slots;
  };
  std::vector<Anchor> anchors;
};

ContrastivePlan plan_contrastive(const std::vector<std::vector<uint8_t>>& masked_slots,
                                 int num_distractors, RngStream& rng);

// Fused softmax + cross-entropy over valid frames of [B, T, C] logits.
// Value: frame-weighted mean of -log max(softmax[label], floor); adds any
// clamp events to *clamp_count. Gradient: (softmax - onehot) / total_frames.
template <typename T>
typename Graph<T>::Ref cross_entropy_node(Graph<T>& g, typename Graph<T>::Ref logits,
                                          const std::vector<std::vector<int>>& labels,
                                          const std::vector<int>& trunk_valid,
                                          int64_t* clamp_count = nullptr);

// Mean over anchors of -log softmax(similarities / temperature)[positive],
// where candidate j's similarity is the cosine between the anchor's context
// row and the candidate's target row (same utterance).
template <typename T>
typename Graph<T>::Ref contrastive_node(Graph<T>& g, typename Graph<T>::Ref contexts,
                                        typename Graph<T>::Ref targets,
                                        const ContrastivePlan& plan,
                                        const ContrastiveConfig& cfg);

// Piecewise combination: labelled -> alpha*l_ce + (1-alpha)*l_c;
// unlabelled -> l_c.
double joint_loss(BatchKind kind, double l_ce, double l_c, double alpha);

// Graph-level combination. ce must be a valid ref for labelled batches and
// is ignored for unlabelled ones. For labelled alpha=1 with no contrastive
// branch, pass lc = -1.
template <typename T>
typename Graph<T>::Ref joint_loss_node(Graph<T>& g, BatchKind kind, typename Graph<T>::Ref ce,
                                       typename Graph<T>::Ref lc, double alpha);

// Assembles the per-step record and enforces the labelled-iff-ce invariant.
LossBreakdown make_loss_breakdown(BatchKind kind, std::optional<double> l_ce, double l_c,
                                  double alpha, int64_t num_ce_frames,
                                  int64_t num_contrastive_positions, int64_t clamp_count);

}  // namespace wavft

#endif  // WAVFT_LOSSES_HPP_
