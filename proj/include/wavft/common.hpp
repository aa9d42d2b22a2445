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

#ifndef WAVFT_COMMON_HPP_
#define WAVFT_COMMON_HPP_

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wavft {

// Error taxonomy. ConfigError maps to CLI exit code 1 (validation),
// everything else to exit code 2 (runtime).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

namespace detail {
inline void str_append(std::ostringstream&) {}
template <typename A, typename... Rest>
void str_append(std::ostringstream& os, const A& a, const Rest&... rest) {
  os << a;
  str_append(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string str_cat(const Args&... args) {
  std::ostringstream os;
  detail::str_append(os, args...);
  return os.str();
}

#define WAVFT_CHECK(cond, ex_type, ...)                     \
  do {                                                      \
    if (!(cond)) throw ex_type(::wavft::str_cat(__VA_ARGS__)); \
  } while (0)

// FNV-1a over bytes; used for config and artifact digests.
inline uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 0xcbf29ce484222325ull) {
  uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(uint64_t v);

// SplitMix64; used to derive independent RNG stream seeds from a base seed
// and a salt, and for O(1) random-access per-step decisions.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t base, std::string_view salt, uint64_t index = 0) {
  return splitmix64(base ^ fnv1a64(salt) ^ splitmix64(index * 0x9e3779b97f4a7c15ull + 1));
}

}  // namespace wavft

#endif  // WAVFT_COMMON_HPP_
