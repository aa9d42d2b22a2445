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

#include "wavft/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "wavft/common.hpp"

namespace wavft {
namespace {

constexpr uint32_t kCheckpointVersion = 1;

void put_u32le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u64le(std::string& out, uint64_t v) {
  put_u32le(out, static_cast<uint32_t>(v & 0xffffffffull));
  put_u32le(out, static_cast<uint32_t>(v >> 32));
}

void put_f32le(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32le(out, bits);
}

// Cursor-based reader over the whole file image.
struct Reader {
  const unsigned char* p;
  size_t size;
  size_t off = 0;
  const std::string& path;

  void need(size_t n) const {
    WAVFT_CHECK(off + n <= size, FormatError, "truncated checkpoint: ", path);
  }
  uint32_t u32() {
    need(4);
    uint32_t v = static_cast<uint32_t>(p[off]) | static_cast<uint32_t>(p[off + 1]) << 8 |
                 static_cast<uint32_t>(p[off + 2]) << 16 |
                 static_cast<uint32_t>(p[off + 3]) << 24;
    off += 4;
    return v;
  }
  uint64_t u64() {
    const uint64_t lo = u32();
    return lo | static_cast<uint64_t>(u32()) << 32;
  }
  float f32() {
    const uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p + off), n);
    off += n;
    return s;
  }
};

void put_record(std::string& out, const std::string& name, const Tensor<float>& t) {
  put_u32le(out, static_cast<uint32_t>(name.size()));
  out += name;
  put_u32le(out, static_cast<uint32_t>(t.rank()));
  for (int64_t r = 0; r < t.rank(); ++r) put_u32le(out, static_cast<uint32_t>(t.dim(r)));
  for (int64_t i = 0; i < t.numel(); ++i) put_f32le(out, t.data[static_cast<size_t>(i)]);
}

void put_scalar(std::string& out, const std::string& name, int64_t v) {
  Tensor<float> t({1});
  t(0) = static_cast<float>(v);
  WAVFT_CHECK(static_cast<int64_t>(t(0)) == v, NumericError,
              "checkpoint scalar loses precision: ", name, " = ", v);
  put_record(out, name, t);
}

}  // namespace

void write_checkpoint(const std::string& path, const TrainCheckpoint& ckpt) {
  std::string out;
  out += "WFTC";
  put_u32le(out, kCheckpointVersion);
  put_u64le(out, ckpt.config_digest);
  put_u64le(out, ckpt.model_digest);

  uint32_t count = static_cast<uint32_t>(ckpt.params.names().size()) + 5;
  if (ckpt.has_optimizer) count += 2 * static_cast<uint32_t>(ckpt.params.names().size());
  put_u32le(out, count);

  for (const std::string& name : ckpt.params.names()) {
    const Tensor<float>& t = ckpt.params.at(name);
    WAVFT_CHECK(t.all_finite(), NumericError, "non-finite parameter at write: ", name);
    put_record(out, "param/" + name, t);
  }
  if (ckpt.has_optimizer) {
    for (const std::string& name : ckpt.params.names())
      put_record(out, "adam.m/" + name, ckpt.adam_m.at(name));
    for (const std::string& name : ckpt.params.names())
      put_record(out, "adam.v/" + name, ckpt.adam_v.at(name));
  }
  put_scalar(out, "state/step", ckpt.step);
  put_scalar(out, "state/labelled_epoch", ckpt.labelled_epoch);
  put_scalar(out, "state/labelled_cursor", ckpt.labelled_cursor);
  put_scalar(out, "state/unlabelled_epoch", ckpt.unlabelled_epoch);
  put_scalar(out, "state/unlabelled_cursor", ckpt.unlabelled_cursor);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  WAVFT_CHECK(f.good(), IoError, "cannot open for write: ", path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  WAVFT_CHECK(f.good(), IoError, "short write: ", path);
}

TrainCheckpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  WAVFT_CHECK(f.good(), IoError, "cannot open checkpoint: ", path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  WAVFT_CHECK(bytes.size() >= 28, FormatError, "checkpoint too short: ", path);
  WAVFT_CHECK(std::memcmp(bytes.data(), "WFTC", 4) == 0, FormatError,
              "bad checkpoint magic: ", path);

  Reader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), 4, path};
  const uint32_t version = r.u32();
  WAVFT_CHECK(version == kCheckpointVersion, FormatError, "unsupported checkpoint version ",
              version, " in ", path);

  TrainCheckpoint ckpt;
  ckpt.config_digest = r.u64();
  ckpt.model_digest = r.u64();
  const uint32_t count = r.u32();

  auto take_scalar = [&](const Tensor<float>& t, const std::string& name) {
    WAVFT_CHECK(t.numel() == 1, FormatError, "state record ", name, " must be scalar in ",
                path);
    return static_cast<int64_t>(t(0));
  };

  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = r.u32();
    const std::string name = r.str(name_len);
    const uint32_t rank = r.u32();
    WAVFT_CHECK(rank <= 4, FormatError, "record ", name, " has rank ", rank, " in ", path);
    std::vector<int64_t> dims;
    int64_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      dims.push_back(static_cast<int64_t>(r.u32()));
      numel *= dims.back();
    }
    Tensor<float> t(dims);
    for (int64_t e = 0; e < numel; ++e) t.data[static_cast<size_t>(e)] = r.f32();

    const auto slash = name.find('/');
    WAVFT_CHECK(slash != std::string::npos, FormatError, "unsectioned record ", name, " in ",
                path);
    const std::string section = name.substr(0, slash);
    const std::string key = name.substr(slash + 1);
    if (section == "param") {
      WAVFT_CHECK(t.all_finite(), FormatError, "non-finite parameter ", key, " in ", path);
      ckpt.params.add(key, t.shape) = t;
    } else if (section == "adam.m") {
      ckpt.adam_m.add(key, t.shape) = t;
      ckpt.has_optimizer = true;
    } else if (section == "adam.v") {
      ckpt.adam_v.add(key, t.shape) = t;
    } else if (section == "state") {
      const int64_t v = take_scalar(t, name);
      if (key == "step") {
        ckpt.step = v;
      } else if (key == "labelled_epoch") {
        ckpt.labelled_epoch = v;
      } else if (key == "labelled_cursor") {
        ckpt.labelled_cursor = v;
      } else if (key == "unlabelled_epoch") {
        ckpt.unlabelled_epoch = v;
      } else if (key == "unlabelled_cursor") {
        ckpt.unlabelled_cursor = v;
      } else {
        throw FormatError(str_cat("unknown state record ", name, " in ", path));
      }
    } else {
      throw FormatError(str_cat("unknown record section ", section, " in ", path));
    }
  }
  WAVFT_CHECK(r.off == r.size, FormatError, "trailing bytes in checkpoint: ", path);
  if (ckpt.has_optimizer) {
    for (const std::string& name : ckpt.params.names()) {
      WAVFT_CHECK(ckpt.adam_m.has(name) && ckpt.adam_v.has(name), FormatError,
                  "optimizer moments missing for ", name, " in ", path);
      WAVFT_CHECK(ckpt.adam_m.at(name).same_shape(ckpt.params.at(name)) &&
                      ckpt.adam_v.at(name).same_shape(ckpt.params.at(name)),
                  FormatError, "optimizer moment shape mismatch for ", name, " in ", path);
    }
  }
  return ckpt;
}

void validate_params_shape(const ParamStore& params, const ModelConfig& cfg) {
  const ParamStore want = make_param_store(cfg);
  WAVFT_CHECK(params.names().size() == want.names().size(), ShapeError,
              "parameter count mismatch: checkpoint has ", params.names().size(),
              ", architecture defines ", want.names().size());
  for (const std::string& name : want.names()) {
    WAVFT_CHECK(params.has(name), ShapeError, "checkpoint is missing parameter ", name);
    WAVFT_CHECK(params.at(name).same_shape(want.at(name)), ShapeError,
                "parameter ", name, " has the wrong shape for this architecture");
  }
}

}  // namespace wavft
