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

#include "wavft/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>
#include <utility>

#include "wavft/common.hpp"

namespace wavft {

void TrainConfig::validate() const {
  WAVFT_CHECK(alpha >= 0.0 && alpha <= 1.0, ConfigError, "alpha must be in [0, 1], got ",
              alpha);
  WAVFT_CHECK(p >= 0.0 && p <= 1.0, ConfigError, "p must be in [0, 1], got ", p);
  WAVFT_CHECK(total_steps >= 1, ConfigError, "total_steps must be >= 1");
  WAVFT_CHECK(peak_lr > 0.0, ConfigError, "peak_lr must be > 0");
  WAVFT_CHECK(warmup_fraction > 0.0 && warmup_fraction < 1.0, ConfigError,
              "warmup_fraction must be in (0, 1)");
  WAVFT_CHECK(batch_size >= 1, ConfigError, "batch_size must be >= 1");
  WAVFT_CHECK(checkpoint_every >= 0, ConfigError, "checkpoint_every must be >= 0");
  WAVFT_CHECK(grad_clip >= 0.0, ConfigError, "grad_clip must be >= 0");
  WAVFT_CHECK(prefetch_depth >= 0, ConfigError, "prefetch_depth must be >= 0");
  WAVFT_CHECK(beta_limit >= 0.0, ConfigError, "beta_limit must be >= 0");
  WAVFT_CHECK(mask.mask_start_prob >= 0.0 && mask.mask_start_prob <= 1.0, ConfigError,
              "mask_start_prob must be in [0, 1]");
  WAVFT_CHECK(mask.mask_span >= 1, ConfigError, "mask_span must be >= 1");
  contrastive.validate();
}

double lr_at_step(int64_t step, int64_t total_steps, double peak_lr, double warmup_fraction) {
  WAVFT_CHECK(total_steps >= 1, ConfigError, "total_steps must be >= 1");
  WAVFT_CHECK(step >= 0 && step <= total_steps, ConfigError, "step ", step,
              " outside [0, ", total_steps, "]");
  int64_t warmup = std::llround(warmup_fraction * static_cast<double>(total_steps));
  warmup = std::max<int64_t>(1, std::min(warmup, total_steps - 1));
  if (step <= warmup)
    return peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
  return peak_lr * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup);
}

AdamState make_adam_state(const ModelConfig& cfg) {
  AdamState st;
  st.m = make_param_store(cfg);
  st.v = make_param_store(cfg);
  return st;
}

void adam_step(ParamStore& params, const std::vector<const Tensor<float>*>& grads,
               AdamState& state, double lr, const AdamConfig& cfg) {
  const auto& names = params.names();
  WAVFT_CHECK(grads.size() == names.size(), ShapeError, "adam_step: ", grads.size(),
              " gradients for ", names.size(), " parameters");
  for (size_t i = 0; i < names.size(); ++i)
    WAVFT_CHECK(grads[i]->all_finite(), NumericError, "non-finite gradient for ", names[i],
                " at optimizer step ", state.t + 1);

  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < names.size(); ++i) {
    Tensor<float>& p = params.at(names[i]);
    Tensor<float>& m = state.m.at(names[i]);
    Tensor<float>& v = state.v.at(names[i]);
    const Tensor<float>& g = *grads[i];
    WAVFT_CHECK(g.same_shape(p), ShapeError, "gradient shape mismatch for ", names[i]);
    for (int64_t e = 0; e < p.numel(); ++e) {
      const double ge = g.data[static_cast<size_t>(e)];
      const double me = cfg.beta1 * m.data[static_cast<size_t>(e)] + (1.0 - cfg.beta1) * ge;
      const double ve =
          cfg.beta2 * v.data[static_cast<size_t>(e)] + (1.0 - cfg.beta2) * ge * ge;
      m.data[static_cast<size_t>(e)] = static_cast<float>(me);
      v.data[static_cast<size_t>(e)] = static_cast<float>(ve);
      const double update = lr * (me / bc1) / (std::sqrt(ve / bc2) + cfg.epsilon);
      p.data[static_cast<size_t>(e)] -= static_cast<float>(update);
    }
  }
}

namespace {

std::string fmt_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string format_metrics_header(uint64_t config_digest, double beta) {
  std::string out = "# wavft-metrics v1\n";
  out += str_cat("# config ", hex64(config_digest), "\n");
  out += beta < 0.0 ? "# beta NA\n" : str_cat("# beta ", fmt_g9(beta), "\n");
  out += "# columns: step\tbatch_kind\tl_ce\tl_c\tcombined\tlr\tclamp_count\twall_ms\n";
  return out;
}

std::string format_metrics_line(const StepRecord& rec) {
  std::string out = str_cat(rec.step, "\t", batch_kind_name(rec.losses.batch_kind), "\t");
  out += rec.losses.has_ce ? fmt_g9(rec.losses.l_ce) : "NA";
  out += "\t";
  out += rec.has_contrastive ? fmt_g9(rec.losses.l_c) : "NA";
  out += str_cat("\t", fmt_g9(rec.losses.combined), "\t", fmt_g9(rec.lr), "\t",
                 rec.losses.clamp_count, "\t");
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.3f", rec.wall_ms);
  out += wall;
  out += "\n";
  return out;
}

int64_t corpus_frames(const std::vector<Utterance>& utts) {
  int64_t n = 0;
  for (const Utterance& u : utts) n += u.features.num_frames();
  return n;
}

double corpus_beta(const std::vector<Utterance>& labelled,
                   const std::vector<Utterance>& unlabelled) {
  const int64_t lab = corpus_frames(labelled);
  if (lab == 0) return -1.0;
  return static_cast<double>(corpus_frames(unlabelled)) / static_cast<double>(lab);
}

std::vector<Utterance> truncate_to_beta(const std::vector<Utterance>& labelled,
                                        std::vector<Utterance> unlabelled, double beta_limit) {
  if (beta_limit <= 0.0) return unlabelled;
  const int64_t lab = corpus_frames(labelled);
  WAVFT_CHECK(lab > 0, ConfigError, "beta_limit needs a non-empty labelled corpus");
  const int64_t cap = static_cast<int64_t>(beta_limit * static_cast<double>(lab));
  int64_t used = 0;
  size_t keep = 0;
  while (keep < unlabelled.size() &&
         used + unlabelled[keep].features.num_frames() <= cap) {
    used += unlabelled[keep].features.num_frames();
    ++keep;
  }
  unlabelled.resize(keep);
  return unlabelled;
}

namespace {

// Everything the training step consumes, assembled ahead of time. The
// stream cursors are snapshotted after this step's batch was drawn so a
// checkpoint taken at this step resumes exactly behind it.
struct PreparedStep {
  int64_t step = 0;
  Batch batch;
  ContrastivePlan plan;
  bool masked = false;
  bool ce_only = false;
  int64_t lab_epoch = 0, lab_cursor = 0;
  int64_t unl_epoch = 0, unl_cursor = 0;
};

// Bounded handoff queue between the preparation thread and the training
// loop. Preparation is strictly sequential inside the producer, so any
// queue depth yields the same step sequence.
class StepQueue {
 public:
  explicit StepQueue(size_t cap) : cap_(cap) {}

  bool push(PreparedStep step) {
    std::unique_lock<std::mutex> lock(mu_);
    cv_space_.wait(lock, [&] { return q_.size() < cap_ || cancelled_; });
    if (cancelled_) return false;
    q_.push_back(std::move(step));
    cv_item_.notify_one();
    return true;
  }

  bool pop(PreparedStep& out) {
    std::unique_lock<std::mutex> lock(mu_);
    cv_item_.wait(lock, [&] { return !q_.empty() || done_ || cancelled_; });
    if (q_.empty()) return false;
    out = std::move(q_.front());
    q_.pop_front();
    cv_space_.notify_one();
    return true;
  }

  void finish(std::exception_ptr err) {
    std::lock_guard<std::mutex> lock(mu_);
    done_ = true;
    error_ = err;
    cv_item_.notify_all();
  }

  void cancel() {
    std::lock_guard<std::mutex> lock(mu_);
    cancelled_ = true;
    cv_space_.notify_all();
    cv_item_.notify_all();
  }

  std::exception_ptr error() {
    std::lock_guard<std::mutex> lock(mu_);
    return error_;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_space_, cv_item_;
  std::deque<PreparedStep> q_;
  size_t cap_;
  bool done_ = false;
  bool cancelled_ = false;
  std::exception_ptr error_;
};

void validate_corpora(const ModelConfig& mcfg, const TrainConfig& tcfg,
                      const std::vector<Utterance>& labelled,
                      const std::vector<Utterance>& unlabelled) {
  WAVFT_CHECK(tcfg.p == 0.0 || !labelled.empty(), ConfigError,
              "p > 0 needs a labelled corpus");
  WAVFT_CHECK(tcfg.p == 1.0 || !unlabelled.empty(), ConfigError,
              "p < 1 needs an unlabelled corpus");
  const bool labelled_masked = tcfg.alpha < 1.0;
  if (tcfg.p > 0.0) {
    for (const Utterance& u : labelled) {
      WAVFT_CHECK(u.features.dim() == mcfg.input_dim, ConfigError, "utterance ", u.id,
                  ": feature dim ", u.features.dim(), " != model input dim ", mcfg.input_dim);
      WAVFT_CHECK(u.labels.has_value(), ConfigError, "labelled utterance ", u.id,
                  " has no labels");
      const int64_t tv = mcfg.trunk_frames(u.features.num_frames());
      WAVFT_CHECK(tv >= 1, ConfigError, "utterance ", u.id, " too short for the subsampler");
      WAVFT_CHECK(static_cast<int64_t>(u.labels->size()) == tv, ConfigError, "utterance ",
                  u.id, ": ", u.labels->size(), " labels for ", tv, " trunk frames");
      WAVFT_CHECK(!labelled_masked || u.features.num_frames() >= 5, ConfigError, "utterance ",
                  u.id, " too short to mask (needs >= 5 frames)");
    }
  }
  if (tcfg.p < 1.0) {
    for (const Utterance& u : unlabelled) {
      WAVFT_CHECK(u.features.dim() == mcfg.input_dim, ConfigError, "utterance ", u.id,
                  ": feature dim ", u.features.dim(), " != model input dim ", mcfg.input_dim);
      WAVFT_CHECK(u.features.num_frames() >= 5, ConfigError, "utterance ", u.id,
                  " too short to mask (needs >= 5 frames)");
    }
  }
}

}  // namespace

TrainCheckpoint train(const ModelConfig& mcfg, const TrainConfig& tcfg,
                      const std::vector<Utterance>& labelled,
                      const std::vector<Utterance>& unlabelled, uint64_t config_digest,
                      uint64_t model_digest, std::ostream* metrics,
                      const std::string& checkpoint_dir, const TrainCheckpoint* resume) {
  mcfg.validate();
  tcfg.validate();

  std::vector<Utterance> unl = truncate_to_beta(labelled, unlabelled, tcfg.beta_limit);
  // The unlabelled path must never leak labels into batch dispatch.
  for (Utterance& u : unl) u.labels.reset();
  validate_corpora(mcfg, tcfg, labelled, unl);

  ParamStore params;
  AdamState adam = make_adam_state(mcfg);
  int64_t step0 = 0;
  std::optional<BatchStream> lab_stream, unl_stream;
  if (!labelled.empty())
    lab_stream.emplace(labelled, tcfg.batch_size, derive_seed(tcfg.seed_data, "order/lab"));
  if (!unl.empty())
    unl_stream.emplace(unl, tcfg.batch_size, derive_seed(tcfg.seed_data, "order/unl"));

  if (resume) {
    WAVFT_CHECK(resume->config_digest == config_digest, ConfigError,
                "checkpoint config digest ", hex64(resume->config_digest),
                " does not match the effective config ", hex64(config_digest));
    WAVFT_CHECK(resume->has_optimizer, ConfigError,
                "checkpoint carries no optimizer state; cannot resume");
    WAVFT_CHECK(resume->step < tcfg.total_steps, ConfigError, "checkpoint step ",
                resume->step, " is already >= total_steps ", tcfg.total_steps);
    validate_params_shape(resume->params, mcfg);
    params = resume->params;
    adam.m = resume->adam_m;
    adam.v = resume->adam_v;
    adam.t = resume->step;
    step0 = resume->step;
    if (lab_stream) lab_stream->restore(resume->labelled_epoch, resume->labelled_cursor);
    if (unl_stream) unl_stream->restore(resume->unlabelled_epoch, resume->unlabelled_cursor);
  } else {
    params = init_params(mcfg, tcfg.seed_init);
  }

  if (metrics && step0 == 0)
    *metrics << format_metrics_header(config_digest, corpus_beta(labelled, unl));

  const SamplerConfig sampler{tcfg.p, tcfg.seed_data};
  auto prepare = [&](int64_t s) {
    PreparedStep ps;
    ps.step = s;
    const BatchKind kind = sample_batch_kind(sampler, s);
    ps.batch = kind == BatchKind::Labelled ? lab_stream->next() : unl_stream->next();
    ps.ce_only = kind == BatchKind::Labelled && tcfg.alpha == 1.0;
    ps.masked = !ps.ce_only;
    if (ps.masked) {
      RngStream mask_rng(derive_seed(tcfg.seed_mask, "mask", static_cast<uint64_t>(s)));
      plan_batch_masks(ps.batch, tcfg.mask, mask_rng);
      std::vector<std::vector<uint8_t>> slots;
      for (int64_t i = 0; i < ps.batch.size(); ++i)
        slots.push_back(masked_trunk_slots(ps.batch, i));
      RngStream dist_rng(
          derive_seed(tcfg.seed_distractor, "distractor", static_cast<uint64_t>(s)));
      ps.plan = plan_contrastive(slots, tcfg.contrastive.num_distractors, dist_rng);
    }
    if (lab_stream) {
      ps.lab_epoch = lab_stream->epoch();
      ps.lab_cursor = lab_stream->cursor();
    }
    if (unl_stream) {
      ps.unl_epoch = unl_stream->epoch();
      ps.unl_cursor = unl_stream->cursor();
    }
    return ps;
  };

  // Optional pipelined preparation. The producer walks steps in order, so
  // the sequence is identical at any depth.
  StepQueue queue(static_cast<size_t>(std::max(tcfg.prefetch_depth, 1)));
  std::thread producer;
  const bool pipelined = tcfg.prefetch_depth > 0;
  if (pipelined) {
    producer = std::thread([&] {
      std::exception_ptr err;
      try {
        for (int64_t s = step0 + 1; s <= tcfg.total_steps; ++s)
          if (!queue.push(prepare(s))) break;
      } catch (...) {
        err = std::current_exception();
      }
      queue.finish(err);
    });
  }
  struct ProducerGuard {
    StepQueue& q;
    std::thread& t;
    ~ProducerGuard() {
      q.cancel();
      if (t.joinable()) t.join();
    }
  } guard{queue, producer};

  TrainCheckpoint ckpt;
  ckpt.config_digest = config_digest;
  ckpt.model_digest = model_digest;
  ckpt.has_optimizer = true;

  auto write_snapshot = [&](const PreparedStep& ps, const std::string& name) {
    ckpt.step = ps.step;
    ckpt.params = params;
    ckpt.adam_m = adam.m;
    ckpt.adam_v = adam.v;
    ckpt.labelled_epoch = ps.lab_epoch;
    ckpt.labelled_cursor = ps.lab_cursor;
    ckpt.unlabelled_epoch = ps.unl_epoch;
    ckpt.unlabelled_cursor = ps.unl_cursor;
    if (!checkpoint_dir.empty()) write_checkpoint(checkpoint_dir + "/" + name, ckpt);
  };

  PreparedStep ps;
  for (int64_t s = step0 + 1; s <= tcfg.total_steps; ++s) {
    if (pipelined) {
      if (!queue.pop(ps)) {
        if (auto err = queue.error()) std::rethrow_exception(err);
        throw Error("batch preparation ended early");
      }
    } else {
      ps = prepare(s);
    }
    WAVFT_CHECK(ps.step == s, Error, "prepared step ", ps.step, " arrived at step ", s);
    const auto t0 = std::chrono::steady_clock::now();

    Graph<float> g;
    auto refs = bind_params(g, params, /*requires_grad=*/true);
    ForwardOptions<float> opts;
    opts.mode = ps.ce_only ? ForwardMode::Infer : ForwardMode::Train;
    opts.build_classifier = ps.batch.kind == BatchKind::Labelled;
    opts.build_contrastive = ps.masked;
    const ForwardRefs<float> fwd = model_forward(g, refs, mcfg, ps.batch, opts);

    int64_t clamp_count = 0;
    int64_t ce_frames = 0;
    typename Graph<float>::Ref ce = -1, lc = -1;
    if (ps.batch.kind == BatchKind::Labelled) {
      ce = cross_entropy_node(g, fwd.logits, ps.batch.labels, fwd.trunk_valid, &clamp_count);
      for (int tv : fwd.trunk_valid) ce_frames += tv;
    }
    if (ps.masked) lc = contrastive_node(g, fwd.contexts, fwd.targets, ps.plan, tcfg.contrastive);
    const auto loss = joint_loss_node(g, ps.batch.kind, ce, lc, tcfg.alpha);
    g.backward(loss);

    std::vector<const Tensor<float>*> grads;
    grads.reserve(params.names().size());
    for (const std::string& name : params.names()) grads.push_back(&g.grad(refs.at(name)));

    if (tcfg.grad_clip > 0.0) {
      double sq = 0.0;
      for (const Tensor<float>* t : grads)
        for (int64_t e = 0; e < t->numel(); ++e) {
          const double v = t->data[static_cast<size_t>(e)];
          sq += v * v;
        }
      const double norm = std::sqrt(sq);
      if (norm > tcfg.grad_clip) {
        const float scale = static_cast<float>(tcfg.grad_clip / norm);
        for (const std::string& name : params.names()) {
          Tensor<float>& t = g.grad(refs.at(name));
          for (int64_t e = 0; e < t.numel(); ++e) t.data[static_cast<size_t>(e)] *= scale;
        }
      }
    }

    const double lr = lr_at_step(s, tcfg.total_steps, tcfg.peak_lr, tcfg.warmup_fraction);
    adam_step(params, grads, adam, lr);

    StepRecord rec;
    rec.step = s;
    rec.has_contrastive = ps.masked;
    rec.losses = make_loss_breakdown(
        ps.batch.kind,
        ce >= 0 ? std::optional<double>(g.value(ce)(0)) : std::nullopt,
        lc >= 0 ? static_cast<double>(g.value(lc)(0)) : 0.0, tcfg.alpha, ce_frames,
        lc >= 0 ? static_cast<int64_t>(ps.plan.anchors.size()) : 0, clamp_count);
    rec.lr = lr;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                            t0)
                      .count();
    if (metrics) *metrics << format_metrics_line(rec);

    if (tcfg.checkpoint_every > 0 && s % tcfg.checkpoint_every == 0 && s != tcfg.total_steps)
      write_snapshot(ps, str_cat("ckpt-", s, ".wftc"));
    if (s == tcfg.total_steps) write_snapshot(ps, "final.wftc");
  }
  if (metrics) metrics->flush();
  return ckpt;
}

}  // namespace wavft
