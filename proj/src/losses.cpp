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

#include "wavft/losses.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "wavft/common.hpp"

namespace wavft {

void ContrastiveConfig::validate() const {
  WAVFT_CHECK(temperature > 0.0, ConfigError, "contrastive temperature must be > 0, got ",
              temperature);
  WAVFT_CHECK(num_distractors >= 1, ConfigError, "num_distractors must be >= 1, got ",
              num_distractors);
  WAVFT_CHECK(cosine_epsilon > 0.0, ConfigError, "cosine_epsilon must be > 0");
}

double cosine_sim(const double* a, const double* b, int64_t n, double epsilon) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::max(std::sqrt(na), epsilon) * std::max(std::sqrt(nb), epsilon));
}

double cosine_sim(const std::vector<double>& a, const std::vector<double>& b, double epsilon) {
  WAVFT_CHECK(a.size() == b.size(), ShapeError, "cosine_sim: length mismatch ", a.size(),
              " vs ", b.size());
  WAVFT_CHECK(!a.empty(), ShapeError, "cosine_sim: empty vectors");
  return cosine_sim(a.data(), b.data(), static_cast<int64_t>(a.size()), epsilon);
}

double cross_entropy_from_posteriors(const Tensor<float>& posteriors,
                                     const std::vector<std::vector<int>>& labels,
                                     const std::vector<int>& trunk_valid,
                                     int64_t* clamp_count) {
  WAVFT_CHECK(posteriors.rank() == 3, ShapeError, "posteriors must be [B, T, C]");
  const int64_t bsz = posteriors.dim(0), t_max = posteriors.dim(1), c = posteriors.dim(2);
  WAVFT_CHECK(static_cast<int64_t>(labels.size()) == bsz &&
                  static_cast<int64_t>(trunk_valid.size()) == bsz,
              ShapeError, "labels/valid counts must match the batch size");

  double sum = 0.0;
  int64_t frames = 0;
  for (int64_t b = 0; b < bsz; ++b) {
    const int tv = trunk_valid[static_cast<size_t>(b)];
    WAVFT_CHECK(static_cast<int64_t>(labels[static_cast<size_t>(b)].size()) >= tv &&
                    tv <= t_max,
                ShapeError, "label run shorter than the valid frame count");
    for (int t = 0; t < tv; ++t) {
      const int y = labels[static_cast<size_t>(b)][static_cast<size_t>(t)];
      WAVFT_CHECK(y >= 0 && y < c, ShapeError, "label ", y, " out of range [0, ", c, ")");
      double p = posteriors(b, t, y);
      if (p < kPosteriorClampFloor) {
        p = kPosteriorClampFloor;
        if (clamp_count) ++*clamp_count;
      }
      sum -= std::log(p);
      ++frames;
    }
  }
  WAVFT_CHECK(frames >= 1, ShapeError, "cross entropy needs at least one valid frame");
  return sum / static_cast<double>(frames);
}

std::vector<int> sample_distractors(const std::vector<int>& masked_positions, int anchor,
                                    int num_distractors, RngStream& rng) {
  WAVFT_CHECK(num_distractors >= 1, ConfigError, "num_distractors must be >= 1");
  std::vector<int> others;
  others.reserve(masked_positions.size());
  bool saw_anchor = false;
  for (int pos : masked_positions) {
    if (pos == anchor) {
      saw_anchor = true;
    } else {
      others.push_back(pos);
    }
  }
  WAVFT_CHECK(saw_anchor, ShapeError, "anchor ", anchor, " is not a masked position");
  WAVFT_CHECK(!others.empty(), ShapeError,
              "distractor sampling needs >= 2 masked positions in the utterance");

  const size_t k = static_cast<size_t>(num_distractors);
  std::vector<int> out;
  out.reserve(k);
  if (others.size() >= k) {
    // Partial Fisher-Yates: the first k entries are a uniform sample
    // without replacement.
    for (size_t i = 0; i < k; ++i) {
      const size_t j = i + static_cast<size_t>(rng.uniform_int(others.size() - i));
      std::swap(others[i], others[j]);
      out.push_back(others[i]);
    }
  } else {
    for (size_t i = 0; i < k; ++i)
      out.push_back(others[static_cast<size_t>(rng.uniform_int(others.size()))]);
  }
  return out;
}

ContrastivePlan plan_contrastive(const std::vector<std::vector<uint8_t>>& masked_slots,
                                 int num_distractors, RngStream& rng) {
  ContrastivePlan plan;
  for (size_t b = 0; b < masked_slots.size(); ++b) {
    std::vector<int> positions;
    for (size_t t = 0; t < masked_slots[b].size(); ++t)
      if (masked_slots[b][t]) positions.push_back(static_cast<int>(t));
    if (positions.empty()) continue;
    WAVFT_CHECK(positions.size() >= 2, ShapeError, "utterance ", b,
                " has a single masked position; distractors are degenerate");
    for (int t : positions) {
      ContrastivePlan::Anchor a;
      a.utterance = static_cast<int>(b);
      a.slot = t;
      a.distractor_slots = sample_distractors(positions, t, num_distractors, rng);
      plan.anchors.push_back(std::move(a));
    }
  }
  return plan;
}

// ---- graph nodes ----------------------------------------------------------------

template <typename T>
typename Graph<T>::Ref cross_entropy_node(Graph<T>& g, typename Graph<T>::Ref logits,
                                          const std::vector<std::vector<int>>& labels,
                                          const std::vector<int>& trunk_valid,
                                          int64_t* clamp_count) {
  const Tensor<T>& x = g.value(logits);
  WAVFT_CHECK(x.rank() == 3, ShapeError, "cross_entropy_node: logits must be [B, T, C]");
  const int64_t bsz = x.dim(0), t_max = x.dim(1), c = x.dim(2);
  WAVFT_CHECK(static_cast<int64_t>(labels.size()) == bsz &&
                  static_cast<int64_t>(trunk_valid.size()) == bsz,
              ShapeError, "labels/valid counts must match the batch size");

  int64_t frames = 0;
  for (int tv : trunk_valid) frames += tv;
  WAVFT_CHECK(frames >= 1, ShapeError, "cross entropy needs at least one valid frame");

  // Softmax rows cached for the backward pass; doubles for a stable sum.
  auto probs = std::make_shared<std::vector<double>>(
      static_cast<size_t>(bsz * t_max * c), 0.0);
  double sum = 0.0;
  for (int64_t b = 0; b < bsz; ++b) {
    const int tv = trunk_valid[static_cast<size_t>(b)];
    WAVFT_CHECK(tv <= t_max, ShapeError, "valid length ", tv, " exceeds padded length ",
                t_max);
    WAVFT_CHECK(static_cast<int64_t>(labels[static_cast<size_t>(b)].size()) == tv, ShapeError,
                "label length ", labels[static_cast<size_t>(b)].size(),
                " != valid frames ", tv);
    for (int t = 0; t < tv; ++t) {
      const int y = labels[static_cast<size_t>(b)][static_cast<size_t>(t)];
      WAVFT_CHECK(y >= 0 && y < c, ShapeError, "label ", y, " out of range [0, ", c, ")");
      double mx = static_cast<double>(x(b, t, 0));
      for (int64_t j = 1; j < c; ++j) mx = std::max(mx, static_cast<double>(x(b, t, j)));
      double denom = 0.0;
      double* row = &(*probs)[static_cast<size_t>((b * t_max + t) * c)];
      for (int64_t j = 0; j < c; ++j) {
        row[j] = std::exp(static_cast<double>(x(b, t, j)) - mx);
        denom += row[j];
      }
      for (int64_t j = 0; j < c; ++j) row[j] /= denom;
      double p = row[y];
      if (p < kPosteriorClampFloor) {
        p = kPosteriorClampFloor;
        if (clamp_count) ++*clamp_count;
      }
      sum -= std::log(p);
    }
  }

  Tensor<T> out({1});
  out(0) = static_cast<T>(sum / static_cast<double>(frames));
  // Copies for the closure; the caller's vectors may not outlive the graph.
  auto lab = std::make_shared<std::vector<std::vector<int>>>(labels);
  auto valid = std::make_shared<std::vector<int>>(trunk_valid);
  return g.make_node(
      std::move(out), {logits},
      [logits, probs, lab, valid, bsz, t_max, c, frames](Graph<T>& gg,
                                                         typename Graph<T>::Ref self) {
        if (!gg.requires_grad(logits)) return;
        const T go = gg.grad(self)(0);
        const T inv = static_cast<T>(1.0 / static_cast<double>(frames));
        Tensor<T>& gx = gg.grad(logits);
        for (int64_t b = 0; b < bsz; ++b) {
          const int tv = (*valid)[static_cast<size_t>(b)];
          for (int t = 0; t < tv; ++t) {
            const int y = (*lab)[static_cast<size_t>(b)][static_cast<size_t>(t)];
            const double* row = &(*probs)[static_cast<size_t>((b * t_max + t) * c)];
            for (int64_t j = 0; j < c; ++j) {
              const double onehot = j == y ? 1.0 : 0.0;
              gx(b, t, j) += go * inv * static_cast<T>(row[j] - onehot);
            }
          }
        }
      });
}

namespace {

// Cosine forward pieces reused by the contrastive backward.
template <typename T>
struct CosinePieces {
  double sim = 0.0;
  double na = 0.0;      // clamped |a|
  double nb = 0.0;      // clamped |b|
  bool a_live = false;  // norm above the epsilon guard (gradient flows)
  bool b_live = false;
};

template <typename T>
CosinePieces<T> cosine_pieces(const T* a, const T* b, int64_t n, double eps) {
  double dot = 0.0, na2 = 0.0, nb2 = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na2 += static_cast<double>(a[i]) * a[i];
    nb2 += static_cast<double>(b[i]) * b[i];
  }
  CosinePieces<T> p;
  const double na = std::sqrt(na2), nb = std::sqrt(nb2);
  p.a_live = na >= eps;
  p.b_live = nb >= eps;
  p.na = std::max(na, eps);
  p.nb = std::max(nb, eps);
  p.sim = dot / (p.na * p.nb);
  return p;
}

}  // namespace

template <typename T>
typename Graph<T>::Ref contrastive_node(Graph<T>& g, typename Graph<T>::Ref contexts,
                                        typename Graph<T>::Ref targets,
                                        const ContrastivePlan& plan,
                                        const ContrastiveConfig& cfg) {
  cfg.validate();
  const Tensor<T>& cx = g.value(contexts);
  const Tensor<T>& qx = g.value(targets);
  WAVFT_CHECK(cx.rank() == 3 && qx.rank() == 3, ShapeError,
              "contrastive_node: contexts/targets must be [B, T, D]");
  WAVFT_CHECK(cx.same_shape(qx), ShapeError, "contexts and targets must share a shape");
  WAVFT_CHECK(!plan.anchors.empty(), ShapeError,
              "contrastive loss needs at least one masked position");
  const int64_t bsz = cx.dim(0), t_max = cx.dim(1), d = cx.dim(2);
  for (const auto& a : plan.anchors) {
    WAVFT_CHECK(a.utterance >= 0 && a.utterance < bsz && a.slot >= 0 && a.slot < t_max,
                ShapeError, "anchor out of range");
    WAVFT_CHECK(static_cast<int>(a.distractor_slots.size()) == cfg.num_distractors, ShapeError,
                "anchor carries ", a.distractor_slots.size(), " distractors, expected ",
                cfg.num_distractors);
    for (int s : a.distractor_slots)
      WAVFT_CHECK(s >= 0 && s < t_max, ShapeError, "distractor slot out of range");
  }

  const double invk = 1.0 / cfg.temperature;
  const double eps = cfg.cosine_epsilon;
  const size_t n_cand = static_cast<size_t>(cfg.num_distractors) + 1;

  double total = 0.0;
  for (const auto& a : plan.anchors) {
    const T* crow = &cx.data[static_cast<size_t>((a.utterance * t_max + a.slot) * d)];
    std::vector<double> logit(n_cand);
    for (size_t j = 0; j < n_cand; ++j) {
      const int slot = j == 0 ? a.slot : a.distractor_slots[j - 1];
      const T* qrow = &qx.data[static_cast<size_t>((a.utterance * t_max + slot) * d)];
      logit[j] = cosine_pieces(crow, qrow, d, eps).sim * invk;
    }
    const size_t j0 = cfg.include_positive ? 0 : 1;
    double mx = logit[j0];
    for (size_t j = j0; j < n_cand; ++j) mx = std::max(mx, logit[j]);
    double denom = 0.0;
    for (size_t j = j0; j < n_cand; ++j) denom += std::exp(logit[j] - mx);
    total += -logit[0] + mx + std::log(denom);
  }

  Tensor<T> out({1});
  out(0) = static_cast<T>(total / static_cast<double>(plan.anchors.size()));
  auto plan_copy = std::make_shared<ContrastivePlan>(plan);
  const ContrastiveConfig cfg_copy = cfg;
  return g.make_node(
      std::move(out), {contexts, targets},
      [contexts, targets, plan_copy, cfg_copy, t_max, d](Graph<T>& gg,
                                                         typename Graph<T>::Ref self) {
        const bool want_c = gg.requires_grad(contexts);
        const bool want_q = gg.requires_grad(targets);
        if (!want_c && !want_q) return;
        const Tensor<T>& cx = gg.value(contexts);
        const Tensor<T>& qx = gg.value(targets);
        Tensor<T> gc(cx.shape), gq(qx.shape);
        gc.zero();
        gq.zero();

        const double invk = 1.0 / cfg_copy.temperature;
        const double eps = cfg_copy.cosine_epsilon;
        const size_t n_cand = static_cast<size_t>(cfg_copy.num_distractors) + 1;
        const double upstream = static_cast<double>(gg.grad(self)(0)) /
                                static_cast<double>(plan_copy->anchors.size());

        std::vector<double> logit(n_cand), prob(n_cand);
        std::vector<CosinePieces<T>> pieces(n_cand);
        for (const auto& a : plan_copy->anchors) {
          const size_t coff = static_cast<size_t>((a.utterance * t_max + a.slot) * d);
          const T* crow = &cx.data[coff];
          for (size_t j = 0; j < n_cand; ++j) {
            const int slot = j == 0 ? a.slot : a.distractor_slots[j - 1];
            const T* qrow = &qx.data[static_cast<size_t>((a.utterance * t_max + slot) * d)];
            pieces[j] = cosine_pieces(crow, qrow, d, eps);
            logit[j] = pieces[j].sim * invk;
          }
          const size_t j0 = cfg_copy.include_positive ? 0 : 1;
          double mx = logit[j0];
          for (size_t j = j0; j < n_cand; ++j) mx = std::max(mx, logit[j]);
          double denom = 0.0;
          for (size_t j = j0; j < n_cand; ++j) denom += std::exp(logit[j] - mx);
          for (size_t j = 0; j < n_cand; ++j)
            prob[j] = j < j0 ? 0.0 : std::exp(logit[j] - mx) / denom;

          for (size_t j = 0; j < n_cand; ++j) {
            // d(loss)/d(logit_j), then through the temperature.
            const double dlogit = prob[j] - (j == 0 ? 1.0 : 0.0);
            if (dlogit == 0.0) continue;
            const double ds = upstream * dlogit * invk;
            const int slot = j == 0 ? a.slot : a.distractor_slots[j - 1];
            const size_t qoff = static_cast<size_t>((a.utterance * t_max + slot) * d);
            const T* qrow = &qx.data[qoff];
            const CosinePieces<T>& pc = pieces[j];
            const double inv_ab = 1.0 / (pc.na * pc.nb);
            for (int64_t i = 0; i < d; ++i) {
              const double ai = static_cast<double>(crow[i]);
              const double bi = static_cast<double>(qrow[i]);
              double dai = bi * inv_ab;
              double dbi = ai * inv_ab;
              if (pc.a_live) dai -= pc.sim * ai / (pc.na * pc.na);
              if (pc.b_live) dbi -= pc.sim * bi / (pc.nb * pc.nb);
              gc.data[coff + static_cast<size_t>(i)] += static_cast<T>(ds * dai);
              gq.data[qoff + static_cast<size_t>(i)] += static_cast<T>(ds * dbi);
            }
          }
        }
        if (want_c) {
          Tensor<T>& dst = gg.grad(contexts);
          for (int64_t i = 0; i < gc.numel(); ++i)
            dst.data[static_cast<size_t>(i)] += gc.data[static_cast<size_t>(i)];
        }
        if (want_q) {
          Tensor<T>& dst = gg.grad(targets);
          for (int64_t i = 0; i < gq.numel(); ++i)
            dst.data[static_cast<size_t>(i)] += gq.data[static_cast<size_t>(i)];
        }
      });
}

double joint_loss(BatchKind kind, double l_ce, double l_c, double alpha) {
  WAVFT_CHECK(alpha >= 0.0 && alpha <= 1.0, ConfigError, "alpha must be in [0, 1], got ",
              alpha);
  if (kind == BatchKind::Unlabelled) return l_c;
  if (alpha == 1.0) return l_ce;  // exact, not alpha*l_ce + 0*l_c
  return alpha * l_ce + (1.0 - alpha) * l_c;
}

template <typename T>
typename Graph<T>::Ref joint_loss_node(Graph<T>& g, BatchKind kind, typename Graph<T>::Ref ce,
                                       typename Graph<T>::Ref lc, double alpha) {
  WAVFT_CHECK(alpha >= 0.0 && alpha <= 1.0, ConfigError, "alpha must be in [0, 1], got ",
              alpha);
  if (kind == BatchKind::Unlabelled) {
    WAVFT_CHECK(lc >= 0, ShapeError, "unlabelled batches need the contrastive loss");
    return lc;
  }
  WAVFT_CHECK(ce >= 0, ShapeError, "labelled batches need the cross-entropy loss");
  if (lc < 0) {
    WAVFT_CHECK(alpha == 1.0, ShapeError,
                "labelled batches need the contrastive loss when alpha < 1");
    return ce;
  }
  if (alpha == 1.0) return ce;
  return g.axpby(static_cast<T>(alpha), ce, static_cast<T>(1.0 - alpha), lc);
}

LossBreakdown make_loss_breakdown(BatchKind kind, std::optional<double> l_ce, double l_c,
                                  double alpha, int64_t num_ce_frames,
                                  int64_t num_contrastive_positions, int64_t clamp_count) {
  WAVFT_CHECK(l_ce.has_value() == (kind == BatchKind::Labelled), ShapeError,
              "cross-entropy must be present exactly for labelled batches");
  LossBreakdown out;
  out.batch_kind = kind;
  out.has_ce = l_ce.has_value();
  out.l_ce = l_ce.value_or(0.0);
  out.l_c = l_c;
  out.combined = joint_loss(kind, out.l_ce, l_c, alpha);
  out.num_ce_frames = num_ce_frames;
  out.num_contrastive_positions = num_contrastive_positions;
  out.clamp_count = clamp_count;
  WAVFT_CHECK(std::isfinite(out.combined), NumericError, "non-finite combined loss");
  return out;
}

template Graph<float>::Ref cross_entropy_node<float>(Graph<float>&, Graph<float>::Ref,
                                                     const std::vector<std::vector<int>>&,
                                                     const std::vector<int>&, int64_t*);
template Graph<double>::Ref cross_entropy_node<double>(Graph<double>&, Graph<double>::Ref,
                                                       const std::vector<std::vector<int>>&,
                                                       const std::vector<int>&, int64_t*);
template Graph<float>::Ref contrastive_node<float>(Graph<float>&, Graph<float>::Ref,
                                                   Graph<float>::Ref, const ContrastivePlan&,
                                                   const ContrastiveConfig&);
template Graph<double>::Ref contrastive_node<double>(Graph<double>&, Graph<double>::Ref,
                                                     Graph<double>::Ref, const ContrastivePlan&,
                                                     const ContrastiveConfig&);
template Graph<float>::Ref joint_loss_node<float>(Graph<float>&, BatchKind, Graph<float>::Ref,
                                                  Graph<float>::Ref, double);
template Graph<double>::Ref joint_loss_node<double>(Graph<double>&, BatchKind,
                                                    Graph<double>::Ref, Graph<double>::Ref,
                                                    double);

}  // namespace wavft
