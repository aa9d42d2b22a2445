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

#include "wavft/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "wavft/common.hpp"
#include "wavft/data.hpp"

namespace wavft {

namespace {

void append_u32le(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t utterance_digest(const Utterance& u) {
  std::string buf;
  buf.reserve(u.id.size() + 8 +
              static_cast<size_t>(u.features.frames.numel()) * sizeof(float));
  buf += u.id;
  buf.push_back('\0');
  if (u.labels) {
    append_u32le(buf, static_cast<uint32_t>(u.labels->size()));
    for (int label : *u.labels) append_u32le(buf, static_cast<uint32_t>(label));
  } else {
    append_u32le(buf, 0xffffffffu);
  }
  for (int64_t i = 0; i < u.features.frames.numel(); ++i) {
    uint32_t bits;
    std::memcpy(&bits, &u.features.frames(i), sizeof bits);
    append_u32le(buf, bits);
  }
  return fnv1a64(buf);
}

// A one-utterance batch built by hand: evaluation must not consume any
// random stream, and make_batches shuffles.
Batch single_batch(const Utterance& u) {
  Batch b;
  b.kind = BatchKind::Unlabelled;
  b.ids = {u.id};
  const int64_t frames = u.features.num_frames();
  const int64_t dim = u.features.dim();
  b.features = Tensor<float>({1, frames, dim});
  std::copy(u.features.frames.data.begin(), u.features.frames.data.end(),
            b.features.data.begin());
  b.valid_len = {static_cast<int>(frames)};
  b.mask_plan = Tensor<uint8_t>({1, frames});
  return b;
}

std::string fmt_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

uint64_t eval_set_digest(const std::vector<Utterance>& eval_set) {
  uint64_t digest = 0;
  for (const Utterance& u : eval_set) digest ^= utterance_digest(u);
  return digest;
}

Tensor<float> infer_posteriors(const ParamStore& params, const ModelConfig& cfg,
                               const Utterance& utterance) {
  WAVFT_CHECK(utterance.features.dim() == cfg.input_dim, ShapeError, "utterance ",
              utterance.id, ": feature dim ", utterance.features.dim(),
              " != model input dim ", cfg.input_dim);
  const ForwardOutput out =
      run_forward(params, cfg, single_batch(utterance), ForwardMode::Infer);
  const int64_t t_out = out.trunk_valid[0];
  const int64_t c = cfg.num_classes;
  Tensor<float> post({t_out, c});
  for (int64_t t = 0; t < t_out; ++t)
    for (int64_t j = 0; j < c; ++j) post(t, j) = out.posteriors(0, t, j);
  return post;
}

EvalReport evaluate_frame_accuracy(const ParamStore& params, const ModelConfig& cfg,
                                   const std::vector<Utterance>& eval_set,
                                   uint64_t config_digest, const std::string& checkpoint_id) {
  WAVFT_CHECK(!eval_set.empty(), ConfigError, "empty eval set");
  EvalReport report;
  report.config_digest = config_digest;
  report.eval_set_digest = eval_set_digest(eval_set);
  report.checkpoint_id = checkpoint_id;
  report.per_class.assign(static_cast<size_t>(cfg.num_classes), ClassStat{});

  for (const Utterance& u : eval_set) {
    WAVFT_CHECK(u.labels.has_value(), ConfigError, "eval utterance ", u.id, " has no labels");
    const Tensor<float> post = infer_posteriors(params, cfg, u);
    WAVFT_CHECK(static_cast<int64_t>(u.labels->size()) == post.dim(0), ConfigError,
                "eval utterance ", u.id, ": ", u.labels->size(), " labels for ", post.dim(0),
                " output frames");
    for (int64_t t = 0; t < post.dim(0); ++t) {
      const int ref = (*u.labels)[static_cast<size_t>(t)];
      WAVFT_CHECK(ref >= 0 && ref < cfg.num_classes, ConfigError, "eval utterance ", u.id,
                  ": label ", ref, " outside [0, ", cfg.num_classes, ")");
      int best = 0;
      for (int j = 1; j < cfg.num_classes; ++j)
        if (post(t, j) > post(t, best)) best = j;
      ClassStat& stat = report.per_class[static_cast<size_t>(ref)];
      stat.frames += 1;
      report.num_frames += 1;
      if (best == ref) {
        stat.correct += 1;
        report.num_correct += 1;
      }
    }
  }
  return report;
}

std::string serialize_report(const EvalReport& report) {
  std::string out = "wavft-eval-report v1\n";
  out += str_cat("config ", hex64(report.config_digest), "\n");
  out += str_cat("evalset ", hex64(report.eval_set_digest), "\n");
  out += str_cat("checkpoint ", report.checkpoint_id, "\n");
  out += str_cat("classes ", report.per_class.size(), "\n");
  out += str_cat("frames ", report.num_frames, "\n");
  out += str_cat("correct ", report.num_correct, "\n");
  out += str_cat("accuracy ", fmt_g9(report.frame_accuracy()), "\n");
  for (size_t c = 0; c < report.per_class.size(); ++c)
    out += str_cat("class ", c, " ", report.per_class[c].frames, " ",
                   report.per_class[c].correct, "\n");
  return out;
}

namespace {

// One "key value" line; the value is the remainder after the first space.
std::string expect_line(std::istream& in, const std::string& key) {
  std::string line;
  WAVFT_CHECK(static_cast<bool>(std::getline(in, line)), FormatError,
              "eval report: missing '", key, "' line");
  WAVFT_CHECK(line.rfind(key + " ", 0) == 0, FormatError, "eval report: expected '", key,
              " ...', got '", line, "'");
  return line.substr(key.size() + 1);
}

int64_t parse_int(const std::string& s, const char* what) {
  size_t pos = 0;
  int64_t v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw FormatError(str_cat("eval report: bad ", what, ": '", s, "'"));
  }
  WAVFT_CHECK(pos == s.size(), FormatError, "eval report: bad ", what, ": '", s, "'");
  return v;
}

uint64_t parse_hex(const std::string& s, const char* what) {
  WAVFT_CHECK(s.size() == 16, FormatError, "eval report: bad ", what, ": '", s, "'");
  uint64_t v = 0;
  for (char ch : s) {
    int digit;
    if (ch >= '0' && ch <= '9')
      digit = ch - '0';
    else if (ch >= 'a' && ch <= 'f')
      digit = ch - 'a' + 10;
    else
      throw FormatError(str_cat("eval report: bad ", what, ": '", s, "'"));
    v = (v << 4) | static_cast<uint64_t>(digit);
  }
  return v;
}

}  // namespace

EvalReport parse_report(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  WAVFT_CHECK(static_cast<bool>(std::getline(in, line)) && line == "wavft-eval-report v1",
              FormatError, "eval report: bad header");

  EvalReport report;
  report.config_digest = parse_hex(expect_line(in, "config"), "config digest");
  report.eval_set_digest = parse_hex(expect_line(in, "evalset"), "eval set digest");
  report.checkpoint_id = expect_line(in, "checkpoint");
  const int64_t classes = parse_int(expect_line(in, "classes"), "class count");
  WAVFT_CHECK(classes >= 1, FormatError, "eval report: class count must be >= 1");
  report.num_frames = parse_int(expect_line(in, "frames"), "frame count");
  report.num_correct = parse_int(expect_line(in, "correct"), "correct count");
  const std::string acc_text = expect_line(in, "accuracy");

  report.per_class.resize(static_cast<size_t>(classes));
  int64_t frames = 0, correct = 0;
  for (int64_t c = 0; c < classes; ++c) {
    const std::string row = expect_line(in, str_cat("class ", c));
    std::istringstream fields(row);
    int64_t f = -1, k = -1;
    WAVFT_CHECK(static_cast<bool>(fields >> f >> k) && fields.eof(), FormatError,
                "eval report: bad class row '", row, "'");
    WAVFT_CHECK(f >= 0 && k >= 0 && k <= f, FormatError, "eval report: impossible counts in '",
                row, "'");
    report.per_class[static_cast<size_t>(c)] = {f, k};
    frames += f;
    correct += k;
  }
  WAVFT_CHECK(!std::getline(in, line), FormatError, "eval report: trailing content");

  WAVFT_CHECK(frames == report.num_frames, FormatError,
              "eval report: per-class frames sum to ", frames, ", header says ",
              report.num_frames);
  WAVFT_CHECK(correct == report.num_correct, FormatError,
              "eval report: per-class correct sums to ", correct, ", header says ",
              report.num_correct);
  double acc = -1.0;
  size_t acc_end = 0;
  try {
    acc = std::stod(acc_text, &acc_end);
  } catch (const std::exception&) {
    acc_end = 0;
  }
  WAVFT_CHECK(acc_end == acc_text.size() && !acc_text.empty(), FormatError,
              "eval report: bad accuracy: '", acc_text, "'");
  WAVFT_CHECK(std::abs(acc - report.frame_accuracy()) <= 1e-9, FormatError,
              "eval report: accuracy field does not match the counters");
  return report;
}

CompareSummary compare_runs(const EvalReport& a, const EvalReport& b) {
  WAVFT_CHECK(a.eval_set_digest == b.eval_set_digest, ConfigError,
              "eval set digests differ (", hex64(a.eval_set_digest), " vs ",
              hex64(b.eval_set_digest), "); reports are not comparable");
  WAVFT_CHECK(a.per_class.size() == b.per_class.size(), ConfigError,
              "reports disagree on the class count");
  WAVFT_CHECK(a.num_frames == b.num_frames, ConfigError,
              "reports disagree on the frame count");
  for (size_t c = 0; c < a.per_class.size(); ++c)
    WAVFT_CHECK(a.per_class[c].frames == b.per_class[c].frames, ConfigError,
                "reports disagree on class ", c, " frame counts");

  CompareSummary cmp;
  cmp.accuracy_a = a.frame_accuracy();
  cmp.accuracy_b = b.frame_accuracy();
  cmp.delta_abs = cmp.accuracy_b - cmp.accuracy_a;
  cmp.has_relative = cmp.accuracy_a > 0.0;
  cmp.delta_rel = cmp.has_relative ? cmp.delta_abs / cmp.accuracy_a : 0.0;
  for (size_t c = 0; c < a.per_class.size(); ++c) {
    if (a.per_class[c].frames == 0) continue;
    CompareSummary::ClassDelta d;
    d.cls = static_cast<int>(c);
    d.frames = a.per_class[c].frames;
    d.accuracy_a = a.per_class[c].accuracy();
    d.accuracy_b = b.per_class[c].accuracy();
    d.delta = d.accuracy_b - d.accuracy_a;
    cmp.per_class.push_back(d);
  }
  return cmp;
}

std::string format_compare(const CompareSummary& cmp) {
  char buf[160];
  std::string out = str_cat("accuracy ", fmt_g9(cmp.accuracy_a), " -> ",
                            fmt_g9(cmp.accuracy_b), "\n");
  std::snprintf(buf, sizeof buf, "absolute %+.6f\n", cmp.delta_abs);
  out += buf;
  if (cmp.has_relative) {
    std::snprintf(buf, sizeof buf, "relative %+.2f%%\n", 100.0 * cmp.delta_rel);
    out += buf;
  } else {
    out += "relative NA\n";
  }
  for (const CompareSummary::ClassDelta& d : cmp.per_class) {
    std::snprintf(buf, sizeof buf, "class %d (%lld frames) %+.6f\n", d.cls,
                  static_cast<long long>(d.frames), d.delta);
    out += buf;
  }
  return out;
}

}  // namespace wavft
