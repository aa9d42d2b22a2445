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

#ifndef WAVFT_GRAPH_HPP_
#define WAVFT_GRAPH_HPP_

#include <functional>
#include <utility>
#include <vector>

#include "wavft/rng.hpp"
#include "wavft/tensor.hpp"

namespace wavft {

// Reverse-mode tape. A fresh Graph is built for every training step; nodes
// are appended in topological order, so the backward sweep is a reverse
// iteration over node ids. All op kernels are plain loops with a fixed
// iteration order, which is what makes training runs bit-reproducible.
template <typename T>
class Graph {
 public:
  using Ref = int32_t;
  using BackwardFn = std::function<void(Graph&, Ref self)>;

  Ref leaf(Tensor<T> value, bool requires_grad);

  // Extension point: append a node with an arbitrary backward closure.
  // Loss kernels in losses.cpp build on this.
  Ref make_node(Tensor<T> value, std::vector<Ref> parents, BackwardFn backward);

  const Tensor<T>& value(Ref r) const { return nodes_[static_cast<size_t>(r)].value; }
  Tensor<T>& mutable_value(Ref r) { return nodes_[static_cast<size_t>(r)].value; }
  Tensor<T>& grad(Ref r) { return nodes_[static_cast<size_t>(r)].grad; }
  bool requires_grad(Ref r) const { return nodes_[static_cast<size_t>(r)].requires_grad; }
  size_t num_nodes() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and runs the tape in reverse. loss must be a
  // single-element tensor.
  void backward(Ref loss);

  // ---- Core ops ----------------------------------------------------------

  Ref add(Ref a, Ref b);  // same shape
  Ref scale(Ref a, T c);
  // ca * a + cb * b for single-element tensors (loss mixing).
  Ref axpby(T ca, Ref a, T cb, Ref b);
  // x: [..., K] row-major, w: [K, N], b: [N] -> [..., N]
  Ref linear(Ref x, Ref w, Ref b);
  Ref gelu(Ref x);  // exact erf form
  // Normalizes over the last dim; gamma/beta: [D].
  Ref layer_norm(Ref x, Ref gamma, Ref beta, T eps);
  // x: [B, Tin, Cin], w: [K, Cin, Cout], b: [Cout]; valid (no pad) conv,
  // Tout = (Tin - K) / stride + 1.
  Ref conv1d(Ref x, Ref w, Ref b, int stride);
  // x: [B, T, D], w: [K, D], b: [D]; odd K, zero 'same' padding, stride 1.
  Ref depthwise_conv1d(Ref x, Ref w, Ref b);
  // Replaces rows flagged by plan with the learned vector m ([F]).
  Ref mask_fill_rows(Ref x, const Tensor<uint8_t>& plan, Ref m);
  // Zeroes rows t >= valid_len[b]; used to keep padding inert.
  Ref zero_pad_rows(Ref x, const std::vector<int>& valid_len);
  // out[b, t, :] = x[b, stride*t + offset, :] for t < out_valid[b], else 0.
  Ref time_select(Ref x, int stride, int offset, int64_t out_len,
                  const std::vector<int>& out_valid);
  // Multi-head attention core: softmax(QK^T/sqrt(dh) + relbias) V with the
  // per-head relative-offset bias table relbias [H, 2*max_rel_dist+1] and
  // per-sequence valid lengths. Padding keys get exactly zero weight and
  // padding query rows produce zero output. attn_probs_out, when non-null,
  // receives the [B, H, T, T] attention weights (diagnostics/tests only).
  Ref attention_core(Ref q, Ref k, Ref v, Ref relbias, int num_heads, int max_rel_dist,
                     const std::vector<int>& valid_len, Tensor<T>* attn_probs_out = nullptr);
  // Inverted dropout; consumes one uniform per element from rng.
  Ref dropout(Ref x, double rate, RngStream* rng);

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<Ref> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;

  bool any_requires_grad(const std::vector<Ref>& parents) const;
};

// Relative-position offset clipping shared by the op and its tests:
// the positional logit depends on clip(t - s, +-max_rel_dist) only.
inline int rel_offset_index(int64_t t, int64_t s, int max_rel_dist) {
  int64_t d = t - s;
  if (d > max_rel_dist) d = max_rel_dist;
  if (d < -max_rel_dist) d = -max_rel_dist;
  return static_cast<int>(d + max_rel_dist);
}

}  // namespace wavft

#endif  // WAVFT_GRAPH_HPP_
