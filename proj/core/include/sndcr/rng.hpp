// Copyright (c) 2026 The sndcr Authors.
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

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace sndcr {

/// Seedable random stream with hand-rolled draw functions so every
/// distribution is bit-stable across builds (std:: distributions are
/// implementation-defined). Box-Muller keeps no spare, so the stream state
/// is exactly the engine state and serializes losslessly.
class RandomStream {
 public:
  explicit RandomStream(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  double gaussian() {
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
  double gaussian(double mean, double stddev) {
    return mean + stddev * gaussian();
  }

  std::vector<int> permutation(int n) {
    std::vector<int> p(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(p[static_cast<size_t>(i)],
                p[static_cast<size_t>(uniform_int(0, i))]);
    return p;
  }

  std::string serialize() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

/// Deterministically derives a child seed for a named substream.
uint64_t derive_seed(uint64_t master, std::string_view tag);

/// Sets the process-wide master seed; every component that does not receive
/// an explicit seed derives its stream from this value and a tag.
void seed_all(uint64_t seed);
uint64_t global_seed();

/// Stream seeded from the global master and a component tag.
RandomStream stream_for(std::string_view tag);

}  // namespace sndcr
