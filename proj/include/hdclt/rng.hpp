// Copyright 2026 The hdclt Authors
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

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace hdclt {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// Pure function of (counter, key); every draw in this library is addressed
// by a counter so results never depend on scheduling.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;

  static constexpr Counter round(Counter c, Key k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  static constexpr Counter apply(Counter c, Key k) {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        k[0] += kW0;
        k[1] += kW1;
      }
      c = round(c, k);
    }
    return c;
  }
};

// SplitMix64 finalizer; used to fold (seed, stream id) pairs into keys.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Stream roles keep independent substreams for the different random inputs of
// one replication (the sample, the exchangeable-pair resample, the
// independent copy, ...).
enum class StreamRole : std::uint32_t {
  sample = 1,
  pair = 2,
  copy = 3,
  reference = 4,
  family = 5,
  direct = 6,
  auxiliary = 7,
};

// A sequential view onto the counter space (key, replication, role, *).
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t replication, StreamRole role,
               std::uint64_t task = 0) {
    const std::uint64_t k = mix64(seed ^ mix64(task + 0x632BE59BD9B4E019ull));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    rep_lo_ = static_cast<std::uint32_t>(replication);
    tag_ = static_cast<std::uint32_t>(role) |
           (static_cast<std::uint32_t>(replication >> 32) << 8);
  }

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  // Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t hi = next_u32() >> 5;  // 27 bits
    const std::uint64_t lo = next_u32() >> 6;  // 26 bits
    return (static_cast<double>((hi << 26) | lo) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  double exponential() { return -std::log(uniform()); }

  // Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 boosted by U^{1/shape}.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0);
      return g * std::pow(uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  void refill() {
    Philox4x32::Counter c{static_cast<std::uint32_t>(block_),
                          static_cast<std::uint32_t>(block_ >> 32), rep_lo_,
                          tag_};
    buf_ = Philox4x32::apply(c, key_);
    ++block_;
    pos_ = 0;
  }

  Philox4x32::Key key_{};
  std::uint32_t rep_lo_ = 0;
  std::uint32_t tag_ = 0;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buf_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hdclt
