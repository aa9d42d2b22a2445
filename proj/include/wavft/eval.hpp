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
// Masking-free inference, frame-level accuracy, and run comparison.
// Evaluation is pure: it consumes no random stream, touches only the
// classifier path of the model, and is invariant to utterance order.

#ifndef WAVFT_EVAL_HPP_
#define WAVFT_EVAL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "wavft/features.hpp"
#include "wavft/model.hpp"

namespace wavft {

// Accuracy accounting for one reference class.
struct ClassStat {
  int64_t frames = 0;   // reference frames carrying this class
  int64_t correct = 0;  // of those, argmax agreed

  double accuracy() const {
    return frames == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(frames);
  }
  bool operator==(const ClassStat&) const = default;
};

// One evaluation run over a labelled set. Accuracy is always the exact
// ratio of the stored counters.
struct EvalReport {
  uint64_t config_digest = 0;    // effective run config of the evaluated model
  uint64_t eval_set_digest = 0;  // content hash of the eval set, order-invariant
  std::string checkpoint_id;     // free-form provenance label (path or tag)
  int64_t num_frames = 0;
  int64_t num_correct = 0;
  std::vector<ClassStat> per_class;  // indexed by class, size = num_classes

  double frame_accuracy() const {
    return num_frames == 0 ? 0.0
                           : static_cast<double>(num_correct) / static_cast<double>(num_frames);
  }
  bool operator==(const EvalReport&) const = default;
};

// Order-invariant content hash over (id, labels, features) of every
// utterance: per-utterance hashes combine by XOR, so any permutation of
// the same set digests identically.
uint64_t eval_set_digest(const std::vector<Utterance>& eval_set);

// Classifier posteriors for one utterance, masking disabled: [T, C] with
// T the subsampled length. The context head, target transform, and mask
// embedding are never read. Throws ShapeError on a feature dim mismatch.
Tensor<float> infer_posteriors(const ParamStore& params, const ModelConfig& cfg,
                               const Utterance& utterance);

// Per-frame argmax against the reference labels over the whole set. Every
// utterance must carry labels in [0, num_classes). Deterministic and
// order-invariant.
EvalReport evaluate_frame_accuracy(const ParamStore& params, const ModelConfig& cfg,
                                   const std::vector<Utterance>& eval_set,
                                   uint64_t config_digest, const std::string& checkpoint_id);

// Structured text record ("wavft-eval-report v1"); parse() accepts exactly
// what serialize() emits and re-derives the counter invariants.
std::string serialize_report(const EvalReport& report);
EvalReport parse_report(const std::string& text);

// Baseline-vs-candidate deltas. Only reports over the same eval set (and
// hence the same per-class frame counts) compare.
struct CompareSummary {
  double accuracy_a = 0.0;
  double accuracy_b = 0.0;
  double delta_abs = 0.0;  // b - a
  double delta_rel = 0.0;  // (b - a) / a; meaningful only when has_relative
  bool has_relative = false;

  struct ClassDelta {
    int cls = 0;
    int64_t frames = 0;
    double accuracy_a = 0.0;
    double accuracy_b = 0.0;
    double delta = 0.0;
  };
  std::vector<ClassDelta> per_class;  // classes with frames > 0 only
};

// Throws ConfigError when the eval-set digests (or per-class frame counts)
// disagree: reports from different eval sets do not compare.
CompareSummary compare_runs(const EvalReport& a, const EvalReport& b);

// Human-readable comparison, relative delta signed with two decimals.
std::string format_compare(const CompareSummary& cmp);

}  // namespace wavft

#endif  // WAVFT_EVAL_HPP_
