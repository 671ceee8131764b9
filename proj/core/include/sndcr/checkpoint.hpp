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
#include <map>
#include <string>
#include <vector>

#include "sndcr/tensor.hpp"

namespace sndcr {

/// Single-file container of named tensors, the checkpoint's on-disk format.
///
/// Layout (little-endian): magic "SNDCRCKP", u32 version, u64 entry count,
/// then per entry: u32 name length, name bytes, u8 dtype
/// (0=f32, 1=f64, 2=i64, 3=bytes), u32 rank, i64 dims[rank], raw data.
/// Payloads round-trip bit-exactly.
class TensorStore {
 public:
  enum class DType : uint8_t { kF32 = 0, kF64 = 1, kI64 = 2, kBytes = 3 };

  struct Entry {
    DType dtype;
    Shape shape;
    std::string raw;  // little-endian payload
  };

  void put(const std::string& name, const Tensor<float>& t);
  void put(const std::string& name, const Tensor<double>& t);
  void put_i64(const std::string& name, int64_t v);
  void put_bytes(const std::string& name, std::string bytes);

  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  std::vector<std::string> names() const;

  Tensor<float> get_f32(const std::string& name) const;
  Tensor<double> get_f64(const std::string& name) const;
  int64_t get_i64(const std::string& name) const;
  std::string get_bytes(const std::string& name) const;

  /// Typed fetch used by templated module loaders.
  template <typename T>
  Tensor<T> get(const std::string& name) const;

  void save(const std::string& path) const;
  static TensorStore load(const std::string& path);

  static constexpr uint32_t kVersion = 1;

 private:
  const Entry& entry(const std::string& name) const;
  std::map<std::string, Entry> entries_;
};

template <>
inline Tensor<float> TensorStore::get<float>(const std::string& name) const {
  return get_f32(name);
}
template <>
inline Tensor<double> TensorStore::get<double>(const std::string& name) const {
  return get_f64(name);
}

}  // namespace sndcr
