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

#include "wavft/model.hpp"

#include <cmath>

#include "wavft/common.hpp"

namespace wavft {

void ModelConfig::validate() const {
  WAVFT_CHECK(num_blocks >= 1, ConfigError, "num_blocks must be >= 1");
  WAVFT_CHECK(model_dim >= 1 && ffn_dim >= 1 && context_dim >= 1, ConfigError,
              "model dims must be >= 1");
  WAVFT_CHECK(num_heads >= 1 && model_dim % num_heads == 0, ConfigError, "model_dim (",
              model_dim, ") must be divisible by num_heads (", num_heads, ")");
  WAVFT_CHECK(num_classes >= 2, ConfigError, "num_classes must be >= 2");
  WAVFT_CHECK(conv_kernel == 3, ConfigError, "subsampler kernel is fixed at 3, got ",
              conv_kernel);
  WAVFT_CHECK(subsample_stride == 2, ConfigError, "subsampler stride is fixed at 2, got ",
              subsample_stride);
  WAVFT_CHECK(max_rel_dist >= 1, ConfigError, "max_rel_dist must be >= 1");
  WAVFT_CHECK(input_dim >= 1, ConfigError, "input_dim must be >= 1");
  WAVFT_CHECK(dropout >= 0.0 && dropout < 1.0, ConfigError, "dropout must be in [0, 1)");
}

ModelConfig ModelConfig::preset(const std::string& name) {
  ModelConfig cfg;
  if (name == "paper") {
    cfg.num_blocks = 18;
    cfg.model_dim = 624;
    cfg.num_heads = 8;
    cfg.ffn_dim = 2048;
    cfg.num_classes = 9000;
    cfg.context_dim = 312;
    cfg.max_rel_dist = 64;
  } else if (name == "desk") {
    cfg.num_blocks = 2;
    cfg.model_dim = 64;
    cfg.num_heads = 4;
    cfg.ffn_dim = 128;
    cfg.num_classes = 32;
    cfg.context_dim = 32;
    cfg.max_rel_dist = 16;
  } else {
    throw ConfigError(str_cat("unknown model preset: ", name, " (want paper or desk)"));
  }
  cfg.validate();
  return cfg;
}

Tensor<float>& ParamStore::add(const std::string& name, std::vector<int64_t> shape) {
  WAVFT_CHECK(!has(name), ConfigError, "duplicate parameter name: ", name);
  index_[name] = tensors_.size();
  names_.push_back(name);
  tensors_.emplace_back(std::move(shape));
  return tensors_.back();
}

Tensor<float>& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  WAVFT_CHECK(it != index_.end(), ConfigError, "unknown parameter: ", name);
  return tensors_[it->second];
}

const Tensor<float>& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  WAVFT_CHECK(it != index_.end(), ConfigError, "unknown parameter: ", name);
  return tensors_[it->second];
}

int64_t ParamStore::total_elements() const {
  int64_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

ParamStore make_param_store(const ModelConfig& cfg) {
  cfg.validate();
  const int64_t d = cfg.model_dim, f = cfg.ffn_dim, c = cfg.num_classes;
  const int64_t ctx = cfg.context_dim, in = cfg.input_dim, k = cfg.conv_kernel;
  const int64_t rel = 2 * static_cast<int64_t>(cfg.max_rel_dist) + 1;

  ParamStore ps;
  ps.add("mask.vec", {in});
  ps.add("subsample.w", {k, in, d});
  ps.add("subsample.b", {d});
  for (int b = 0; b < cfg.num_blocks; ++b) {
    const std::string pre = str_cat("block", b, ".");
    ps.add(pre + "attn.ln.gamma", {d});
    ps.add(pre + "attn.ln.beta", {d});
    ps.add(pre + "attn.wq", {d, d});
    ps.add(pre + "attn.bq", {d});
    ps.add(pre + "attn.wk", {d, d});
    ps.add(pre + "attn.bk", {d});
    ps.add(pre + "attn.wv", {d, d});
    ps.add(pre + "attn.bv", {d});
    ps.add(pre + "attn.wo", {d, d});
    ps.add(pre + "attn.bo", {d});
    ps.add(pre + "attn.relbias", {cfg.num_heads, rel});
    ps.add(pre + "conv.ln.gamma", {d});
    ps.add(pre + "conv.ln.beta", {d});
    ps.add(pre + "conv.dw.w", {k, d});
    ps.add(pre + "conv.dw.b", {d});
    ps.add(pre + "conv.pw.w", {d, d});
    ps.add(pre + "conv.pw.b", {d});
    ps.add(pre + "ffn.ln.gamma", {d});
    ps.add(pre + "ffn.ln.beta", {d});
    ps.add(pre + "ffn.w1", {d, f});
    ps.add(pre + "ffn.b1", {f});
    ps.add(pre + "ffn.w2", {f, d});
    ps.add(pre + "ffn.b2", {d});
  }
  ps.add("final.ln.gamma", {d});
  ps.add("final.ln.beta", {d});
  ps.add("proj.w", {d, c});
  ps.add("proj.b", {c});
  ps.add("ctx.w1", {d, d});
  ps.add("ctx.b1", {d});
  ps.add("ctx.w2", {d, ctx});
  ps.add("ctx.b2", {ctx});
  ps.add("tgt.w", {in, ctx});
  ps.add("tgt.b", {ctx});
  return ps;
}

int64_t param_count(const ModelConfig& cfg) {
  const int64_t d = cfg.model_dim, f = cfg.ffn_dim, c = cfg.num_classes;
  const int64_t ctx = cfg.context_dim, in = cfg.input_dim, k = cfg.conv_kernel;
  const int64_t rel = 2 * static_cast<int64_t>(cfg.max_rel_dist) + 1;
  const int64_t per_block = 2 * d                       // attn ln
                            + 4 * (d * d + d)           // q, k, v, o
                            + cfg.num_heads * rel       // relative bias table
                            + 2 * d                     // conv ln
                            + k * d + d                 // depthwise
                            + d * d + d                 // pointwise
                            + 2 * d                     // ffn ln
                            + d * f + f + f * d + d;    // ffn
  return in                       // mask vector
         + k * in * d + d        // subsampler
         + cfg.num_blocks * per_block
         + 2 * d                 // final ln
         + d * c + c             // projection head
         + d * d + d + d * ctx + ctx  // context head
         + in * ctx + ctx;       // target transform
}

ParamStore init_params(const ModelConfig& cfg, uint64_t seed) {
  ParamStore ps = make_param_store(cfg);
  RngStream rng(derive_seed(seed, "init"));
  for (const std::string& name : ps.names()) {
    Tensor<float>& t = ps.at(name);
    const size_t dot = name.rfind('.');
    const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
    if (leaf == "gamma") {
      t.fill(1.0f);  // layer norms start at identity
    } else if (name == "proj.w" || name == "proj.b") {
      // Zero classifier: the untrained model emits exactly uniform posteriors,
      // so chance-level behavior is exact rather than approximate.
      t.zero();
    } else if (leaf == "beta" || leaf == "relbias" || leaf[0] == 'b') {
      t.zero();  // biases and relative-position tables
    } else {
      // Weight matrices and the learned mask vector.
      for (int64_t i = 0; i < t.numel(); ++i)
        t(i) = static_cast<float>(rng.truncated_normal(0.02));
    }
  }
  return ps;
}

// ---- forward ------------------------------------------------------------------

template <typename T>
std::unordered_map<std::string, typename Graph<T>::Ref> bind_params(Graph<T>& g,
                                                                    const ParamStore& params,
                                                                    bool requires_grad) {
  std::unordered_map<std::string, typename Graph<T>::Ref> refs;
  refs.reserve(params.names().size());
  for (const std::string& name : params.names()) {
    if constexpr (std::is_same_v<T, float>) {
      refs[name] = g.leaf(params.at(name), requires_grad);
    } else {
      refs[name] = g.leaf(tensor_cast<T>(params.at(name)), requires_grad);
    }
  }
  return refs;
}

namespace {

template <typename T>
typename Graph<T>::Ref param_ref(
    const std::unordered_map<std::string, typename Graph<T>::Ref>& p, const std::string& name) {
  auto it = p.find(name);
  WAVFT_CHECK(it != p.end(), ConfigError, "parameter not bound: ", name);
  return it->second;
}

}  // namespace

template <typename T>
ForwardRefs<T> model_forward(Graph<T>& g,
                             const std::unordered_map<std::string, typename Graph<T>::Ref>& p,
                             const ModelConfig& cfg, const Batch& batch,
                             const ForwardOptions<T>& opts) {
  cfg.validate();
  const int64_t bsz = batch.size();
  WAVFT_CHECK(bsz >= 1, ShapeError, "empty batch");
  WAVFT_CHECK(batch.features.dim(2) == cfg.input_dim, ShapeError, "feature dim ",
              batch.features.dim(2), " != configured input dim ", cfg.input_dim);
  auto P = [&](const std::string& name) { return param_ref<T>(p, name); };

  ForwardRefs<T> out;
  for (int64_t i = 0; i < bsz; ++i) {
    const int64_t tv = cfg.trunk_frames(batch.valid_len[static_cast<size_t>(i)]);
    WAVFT_CHECK(tv >= 1, ShapeError, "utterance ", batch.ids[static_cast<size_t>(i)],
                " too short for the subsampler");
    out.trunk_valid.push_back(static_cast<int>(tv));
  }
  if (batch.kind == BatchKind::Labelled) {
    for (int64_t i = 0; i < bsz; ++i)
      WAVFT_CHECK(static_cast<int64_t>(batch.labels[static_cast<size_t>(i)].size()) ==
                      out.trunk_valid[static_cast<size_t>(i)],
                  ShapeError, "label length ", batch.labels[static_cast<size_t>(i)].size(),
                  " != trunk frames ", out.trunk_valid[static_cast<size_t>(i)],
                  " for utterance ", batch.ids[static_cast<size_t>(i)]);
  }

  // Input leaf; padding rows are zero by construction of the batch.
  typename Graph<T>::Ref raw;
  if constexpr (std::is_same_v<T, float>) {
    raw = g.leaf(batch.features, /*requires_grad=*/false);
  } else {
    raw = g.leaf(tensor_cast<T>(batch.features), /*requires_grad=*/false);
  }

  typename Graph<T>::Ref x = raw;
  const bool train = opts.mode == ForwardMode::Train;
  if (train) {
    x = g.mask_fill_rows(raw, batch.mask_plan, P("mask.vec"));
    for (int64_t i = 0; i < bsz; ++i)
      out.masked_slots.push_back(masked_trunk_slots(batch, i));
  }

  // Subsampler: stride-2 valid conv + GELU. Trunk positions beyond each
  // utterance's valid length are zeroed here and again after every
  // residual branch, so padding can never contaminate valid frames.
  x = g.conv1d(x, P("subsample.w"), P("subsample.b"), cfg.subsample_stride);
  x = g.gelu(x);
  x = g.zero_pad_rows(x, out.trunk_valid);

  const T eps = static_cast<T>(1e-5);
  for (int b = 0; b < cfg.num_blocks; ++b) {
    const std::string pre = str_cat("block", b, ".");
    {  // self-attention with relative-position bias
      auto h = g.layer_norm(x, P(pre + "attn.ln.gamma"), P(pre + "attn.ln.beta"), eps);
      auto q = g.linear(h, P(pre + "attn.wq"), P(pre + "attn.bq"));
      auto k = g.linear(h, P(pre + "attn.wk"), P(pre + "attn.bk"));
      auto v = g.linear(h, P(pre + "attn.wv"), P(pre + "attn.bv"));
      auto a = g.attention_core(q, k, v, P(pre + "attn.relbias"), cfg.num_heads,
                                cfg.max_rel_dist, out.trunk_valid,
                                b == 0 ? opts.attn_probs_block0 : nullptr);
      auto o = g.linear(a, P(pre + "attn.wo"), P(pre + "attn.bo"));
      if (train && opts.dropout_rng) o = g.dropout(o, cfg.dropout, opts.dropout_rng);
      o = g.zero_pad_rows(o, out.trunk_valid);
      x = g.add(x, o);
    }
    {  // depthwise + pointwise convolution
      auto h = g.layer_norm(x, P(pre + "conv.ln.gamma"), P(pre + "conv.ln.beta"), eps);
      // The kernel reaches one frame past each end; re-zero padding first
      // so the last valid frame convolves against true zeros.
      h = g.zero_pad_rows(h, out.trunk_valid);
      h = g.depthwise_conv1d(h, P(pre + "conv.dw.w"), P(pre + "conv.dw.b"));
      h = g.linear(h, P(pre + "conv.pw.w"), P(pre + "conv.pw.b"));
      h = g.gelu(h);
      if (train && opts.dropout_rng) h = g.dropout(h, cfg.dropout, opts.dropout_rng);
      h = g.zero_pad_rows(h, out.trunk_valid);
      x = g.add(x, h);
    }
    {  // feed-forward
      auto h = g.layer_norm(x, P(pre + "ffn.ln.gamma"), P(pre + "ffn.ln.beta"), eps);
      h = g.linear(h, P(pre + "ffn.w1"), P(pre + "ffn.b1"));
      h = g.gelu(h);
      h = g.linear(h, P(pre + "ffn.w2"), P(pre + "ffn.b2"));
      if (train && opts.dropout_rng) h = g.dropout(h, cfg.dropout, opts.dropout_rng);
      h = g.zero_pad_rows(h, out.trunk_valid);
      x = g.add(x, h);
    }
  }
  x = g.layer_norm(x, P("final.ln.gamma"), P("final.ln.beta"), eps);
  x = g.zero_pad_rows(x, out.trunk_valid);

  if (opts.build_classifier) out.logits = g.linear(x, P("proj.w"), P("proj.b"));

  if (train && opts.build_contrastive) {
    auto c = g.linear(x, P("ctx.w1"), P("ctx.b1"));
    c = g.gelu(c);
    out.contexts = g.linear(c, P("ctx.w2"), P("ctx.b2"));

    // Targets describe the true (pre-mask) signal: input row 2t+1 for
    // trunk frame t, through the linear target transform.
    const int64_t t_out = g.value(x).dim(1);
    auto sel = g.time_select(raw, /*stride=*/2, /*offset=*/1, t_out, out.trunk_valid);
    out.targets = g.linear(sel, P("tgt.w"), P("tgt.b"));
  }
  return out;
}

template std::unordered_map<std::string, Graph<float>::Ref> bind_params<float>(
    Graph<float>&, const ParamStore&, bool);
template std::unordered_map<std::string, Graph<double>::Ref> bind_params<double>(
    Graph<double>&, const ParamStore&, bool);
template ForwardRefs<float> model_forward<float>(
    Graph<float>&, const std::unordered_map<std::string, Graph<float>::Ref>&, const ModelConfig&,
    const Batch&, const ForwardOptions<float>&);
template ForwardRefs<double> model_forward<double>(
    Graph<double>&, const std::unordered_map<std::string, Graph<double>::Ref>&,
    const ModelConfig&, const Batch&, const ForwardOptions<double>&);

Tensor<float> softmax_rows(const Tensor<float>& logits) {
  WAVFT_CHECK(logits.rank() == 3, ShapeError, "softmax_rows: rank-3 input expected");
  Tensor<float> out(logits.shape);
  const int64_t rows = logits.dim(0) * logits.dim(1);
  const int64_t c = logits.dim(2);
  for (int64_t r = 0; r < rows; ++r) {
    const float* in = &logits.data[static_cast<size_t>(r * c)];
    float* o = &out.data[static_cast<size_t>(r * c)];
    float mx = in[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, in[j]);
    double denom = 0.0;
    for (int64_t j = 0; j < c; ++j) denom += std::exp(static_cast<double>(in[j] - mx));
    for (int64_t j = 0; j < c; ++j)
      o[j] = static_cast<float>(std::exp(static_cast<double>(in[j] - mx)) / denom);
  }
  return out;
}

ForwardOutput run_forward(const ParamStore& params, const ModelConfig& cfg, const Batch& batch,
                          ForwardMode mode) {
  Graph<float> g;
  auto refs = bind_params(g, params, /*requires_grad=*/false);
  ForwardOptions<float> opts;
  opts.mode = mode;
  ForwardRefs<float> fwd = model_forward(g, refs, cfg, batch, opts);

  ForwardOutput out;
  out.posteriors = softmax_rows(g.value(fwd.logits));
  if (fwd.contexts >= 0) out.contexts = g.value(fwd.contexts);
  if (fwd.targets >= 0) out.targets = g.value(fwd.targets);
  out.trunk_valid = fwd.trunk_valid;
  out.masked_slots = fwd.masked_slots;
  return out;
}

}  // namespace wavft
