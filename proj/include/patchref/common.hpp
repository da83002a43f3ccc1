// Copyright 2026 The patchref Authors. All Rights Reserved.
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

#ifndef PATCHREF_COMMON_HPP
#define PATCHREF_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <iterator>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace patchref {

inline constexpr std::string_view kVersion = "0.1.0";

inline constexpr double kPi = std::numbers::pi;

// Error taxonomy. Everything thrown by the library derives from Error so
// callers (the CLI in particular) can map failures to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file content: wrong byte length, field count, missing key.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed but invalid values: non-finite numbers, duplicates.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Singular transforms and failed numeric inversions.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Violated preconditions on arguments (shape mismatch, bad ranges).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Balanced sampling could not draw a valid sample.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures; the message always carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar angle) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  constexpr Scalar two_pi = 2 * pi;
  Scalar wrapped = std::fmod(angle + pi, two_pi);
  if (wrapped < 0) wrapped += two_pi;
  wrapped -= pi;
  // fmod maps +pi onto -pi; the half-open interval keeps +pi.
  if (wrapped <= -pi) wrapped += two_pi;
  return wrapped;
}

/// 64-bit finalizer from splitmix64.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Per-stage seed: mix64(global ^ fnv1a(stage)). Stable across platforms.
constexpr std::uint64_t derive_seed(std::uint64_t global, std::string_view stage) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (char c : stage) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return mix64(global ^ hash);
}

constexpr std::uint64_t derive_seed(std::uint64_t global, std::uint64_t index) {
  return mix64(global ^ mix64(index + 0x632be59bd9b4e019ULL));
}

// Thin wrapper over mt19937_64. The std distributions are implementation
// defined, so draws are computed from raw engine output to keep results
// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Uniform integer in [0, n) by rejection; n must be > 0.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t draw = engine_();
    while (draw >= limit) draw = engine_();
    return draw % n;
  }

  /// Fisher-Yates over any random-access range.
  template <typename Range>
  void shuffle(Range& range) {
    const auto n = static_cast<std::uint64_t>(std::size(range));
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = index(i);
      using std::swap;
      swap(range[i - 1], range[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace patchref

#endif  // PATCHREF_COMMON_HPP
