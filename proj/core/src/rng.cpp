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

#include "sndcr/rng.hpp"

#include <atomic>
#include <sstream>

namespace sndcr {

std::string RandomStream::serialize() const {
  std::ostringstream oss;
  oss << engine_;
  return oss.str();
}

void RandomStream::restore(const std::string& state) {
  std::istringstream iss(state);
  iss >> engine_;
}

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::atomic<uint64_t> g_master_seed{17};

}  // namespace

uint64_t derive_seed(uint64_t master, std::string_view tag) {
  return splitmix64(master ^ splitmix64(fnv1a(tag)));
}

void seed_all(uint64_t seed) { g_master_seed.store(seed); }

uint64_t global_seed() { return g_master_seed.load(); }

RandomStream stream_for(std::string_view tag) {
  return RandomStream(derive_seed(global_seed(), tag));
}

}  // namespace sndcr
