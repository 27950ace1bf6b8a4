// Copyright 2026 The rangefuse Authors
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

// Counter-based random streams. Draw n of stream (seed, id) is a pure function
// of (seed, id, n), so streams are independent of each other and of the order
// in which they are consumed, and identical on every platform (no
// std::*_distribution, whose outputs are implementation-defined).

#ifndef RANGEFUSE_RANDOM_HPP
#define RANGEFUSE_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace rangefuse {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

enum class StreamKind : std::uint64_t {
  kOdometry = 1,
  kInterRange = 2,
  kAnchorRange = 3,
  kPerturbation = 4,
  kTest = 15,
};

inline constexpr std::uint64_t stream_id(StreamKind kind, std::uint64_t a,
                                         std::uint64_t b = 0) {
  return (static_cast<std::uint64_t>(kind) << 56) | ((a & 0xFFFFFFULL) << 32) |
         (b & 0xFFFFFFFFULL);
}

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(splitmix64(seed ^ splitmix64(stream))) {}

  std::uint64_t next_u64() { return splitmix64(key_ + (counter_++) * kGamma); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal (Box-Muller, both outputs used).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double phi = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  double normal(double sigma) { return sigma * normal(); }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rangefuse

#endif  // RANGEFUSE_RANDOM_HPP
