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

#ifndef WAVFT_RNG_HPP_
#define WAVFT_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace wavft {

// Seeded random stream. Distribution transforms are hand-rolled on top of
// the raw mt19937_64 output so a (seed, draw index) pair maps to the same
// value on every standard library implementation. std::<distribution>
// classes are deliberately not used: their output sequences are not pinned
// by the standard and some of them carry hidden state.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection-free modulo is biased for huge n;
  // n here is always tiny relative to 2^64 so the bias is untestable.
  uint64_t uniform_int(uint64_t n) { return engine_() % n; }

  double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Stateless Box-Muller: draws two uniforms, returns one normal deviate.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Normal clipped by rejection to |z| <= 2, then scaled; the usual init
  // flavour of truncated normal.
  double truncated_normal(double stddev) {
    double z = normal();
    while (std::fabs(z) > 2.0) z = normal();
    return z * stddev;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace wavft

#endif  // WAVFT_RNG_HPP_
