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

#ifndef WAVFT_MODEL_HPP_
#define WAVFT_MODEL_HPP_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "wavft/data.hpp"
#include "wavft/graph.hpp"
#include "wavft/tensor.hpp"

namespace wavft {

// Architecture of the acoustic model: a stride-2 convolutional subsampler
// into a stack of pre-norm blocks, each holding relative-position
// self-attention, a depthwise+pointwise convolution, and an FFN.
struct ModelConfig {
  int num_blocks = 2;
  int model_dim = 64;
  int num_heads = 4;
  int ffn_dim = 128;
  int conv_kernel = 3;
  int num_classes = 32;
  int context_dim = 32;
  int max_rel_dist = 16;
  int input_dim = 160;
  int subsample_stride = 2;  // contract: exactly 2; validate() rejects others
  double dropout = 0.0;

  void validate() const;

  // "paper": the full-scale architecture; "desk": a miniature that trains
  // in seconds on a laptop core.
  static ModelConfig preset(const std::string& name);

  int64_t trunk_frames(int64_t input_frames) const {
    return downsampled_frame_count(input_frames, conv_kernel, subsample_stride);
  }
};

// Named, ordered parameter registry. Iteration follows registration order,
// which fixes the checkpoint layout and the optimizer's update order.
class ParamStore {
 public:
  Tensor<float>& add(const std::string& name, std::vector<int64_t> shape);
  Tensor<float>& at(const std::string& name);
  const Tensor<float>& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  const std::vector<std::string>& names() const { return names_; }
  int64_t total_elements() const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, size_t> index_;
  std::vector<Tensor<float>> tensors_;
};

// Registers every parameter of the architecture (zero-valued).
ParamStore make_param_store(const ModelConfig& cfg);

// Analytic parameter count; make_param_store() must agree exactly.
int64_t param_count(const ModelConfig& cfg);

// Deterministic init: weights truncated-normal (std 0.02), biases and
// relative-position tables zero, layer norms at identity. The classifier
// projection is deliberately all-zero so an untrained model emits exactly
// uniform posteriors.
ParamStore init_params(const ModelConfig& cfg, uint64_t seed);

enum class ForwardMode { Train, Infer };

// Forward results as graph references, for training. Refs are -1 when the
// corresponding branch was not built.
template <typename T>
struct ForwardRefs {
  typename Graph<T>::Ref logits = -1;    // [B, T, C]
  typename Graph<T>::Ref contexts = -1;  // [B, T, context_dim]
  typename Graph<T>::Ref targets = -1;   // [B, T, context_dim]
  std::vector<int> trunk_valid;          // valid trunk frames per utterance
  std::vector<std::vector<uint8_t>> masked_slots;  // per utterance, trunk rate
};

template <typename T>
struct ForwardOptions {
  ForwardMode mode = ForwardMode::Train;
  bool build_classifier = true;   // projection logits
  bool build_contrastive = true;  // context and target branches (Train only)
  RngStream* dropout_rng = nullptr;
  Tensor<T>* attn_probs_block0 = nullptr;  // diagnostics: first block's weights
};

// Binds parameters as graph leaves, in registration order.
template <typename T>
std::unordered_map<std::string, typename Graph<T>::Ref> bind_params(Graph<T>& g,
                                                                    const ParamStore& params,
                                                                    bool requires_grad);

// Builds the model on the tape: mask fill (Train mode), subsampler, blocks,
// final norm, then the requested heads. Targets come from the PRE-mask
// input rows at stride-2 index 2t+1, through the linear target transform.
template <typename T>
ForwardRefs<T> model_forward(Graph<T>& g,
                             const std::unordered_map<std::string, typename Graph<T>::Ref>& p,
                             const ModelConfig& cfg, const Batch& batch,
                             const ForwardOptions<T>& opts);

// Materialized forward pass for evaluation and inspection (no gradients).
struct ForwardOutput {
  Tensor<float> posteriors;  // [B, T, C], rows over valid frames sum to 1
  Tensor<float> contexts;    // empty in Infer mode
  Tensor<float> targets;     // empty in Infer mode
  std::vector<int> trunk_valid;
  std::vector<std::vector<uint8_t>> masked_slots;
};

ForwardOutput run_forward(const ParamStore& params, const ModelConfig& cfg, const Batch& batch,
                          ForwardMode mode);

// Row-wise softmax over the last dim of a rank-3 tensor (out of graph).
Tensor<float> softmax_rows(const Tensor<float>& logits);

}  // namespace wavft

#endif  // WAVFT_MODEL_HPP_
