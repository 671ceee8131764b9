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

#include "sndcr/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace sndcr {

namespace {

constexpr char kMagic[8] = {'S', 'N', 'D', 'C', 'R', 'C', 'K', 'P'};

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("checkpoint '" + path + "': truncated file");
  return v;
}

}  // namespace

void TensorStore::put(const std::string& name, const Tensor<float>& t) {
  Entry e;
  e.dtype = DType::kF32;
  e.shape = t.shape();
  e.raw.assign(reinterpret_cast<const char*>(t.data()),
               static_cast<size_t>(t.numel()) * sizeof(float));
  entries_[name] = std::move(e);
}

void TensorStore::put(const std::string& name, const Tensor<double>& t) {
  Entry e;
  e.dtype = DType::kF64;
  e.shape = t.shape();
  e.raw.assign(reinterpret_cast<const char*>(t.data()),
               static_cast<size_t>(t.numel()) * sizeof(double));
  entries_[name] = std::move(e);
}

void TensorStore::put_i64(const std::string& name, int64_t v) {
  Entry e;
  e.dtype = DType::kI64;
  e.shape = Shape{};
  e.raw.assign(reinterpret_cast<const char*>(&v), sizeof(int64_t));
  entries_[name] = std::move(e);
}

void TensorStore::put_bytes(const std::string& name, std::string bytes) {
  Entry e;
  e.dtype = DType::kBytes;
  e.shape = Shape{static_cast<int>(bytes.size())};
  e.raw = std::move(bytes);
  entries_[name] = std::move(e);
}

std::vector<std::string> TensorStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

const TensorStore::Entry& TensorStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw IoError("checkpoint entry '" + name + "' not found");
  return it->second;
}

Tensor<float> TensorStore::get_f32(const std::string& name) const {
  const Entry& e = entry(name);
  if (e.dtype != DType::kF32)
    throw IoError("checkpoint entry '" + name + "' is not f32");
  Tensor<float> t(e.shape);
  std::memcpy(t.data(), e.raw.data(), e.raw.size());
  return t;
}

Tensor<double> TensorStore::get_f64(const std::string& name) const {
  const Entry& e = entry(name);
  if (e.dtype != DType::kF64)
    throw IoError("checkpoint entry '" + name + "' is not f64");
  Tensor<double> t(e.shape);
  std::memcpy(t.data(), e.raw.data(), e.raw.size());
  return t;
}

int64_t TensorStore::get_i64(const std::string& name) const {
  const Entry& e = entry(name);
  if (e.dtype != DType::kI64)
    throw IoError("checkpoint entry '" + name + "' is not i64");
  int64_t v;
  std::memcpy(&v, e.raw.data(), sizeof(int64_t));
  return v;
}

std::string TensorStore::get_bytes(const std::string& name) const {
  const Entry& e = entry(name);
  if (e.dtype != DType::kBytes)
    throw IoError("checkpoint entry '" + name + "' is not bytes");
  return e.raw;
}

void TensorStore::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint '" + path + "'");
  os.write(kMagic, sizeof(kMagic));
  write_pod<uint32_t>(os, kVersion);
  write_pod<uint64_t>(os, entries_.size());
  for (const auto& [name, e] : entries_) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint8_t>(os, static_cast<uint8_t>(e.dtype));
    write_pod<uint32_t>(os, static_cast<uint32_t>(e.shape.size()));
    for (int d : e.shape) write_pod<int64_t>(os, d);
    write_pod<uint64_t>(os, e.raw.size());
    os.write(e.raw.data(), static_cast<std::streamsize>(e.raw.size()));
  }
  if (!os) throw IoError("failed writing checkpoint '" + path + "'");
}

TensorStore TensorStore::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("checkpoint '" + path + "': bad magic");
  uint32_t version = read_pod<uint32_t>(is, path);
  if (version != kVersion)
    throw IoError("checkpoint '" + path + "': unsupported version " +
                  std::to_string(version));
  uint64_t count = read_pod<uint64_t>(is, path);
  TensorStore store;
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t name_len = read_pod<uint32_t>(is, path);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    Entry e;
    e.dtype = static_cast<DType>(read_pod<uint8_t>(is, path));
    uint32_t rank = read_pod<uint32_t>(is, path);
    e.shape.resize(rank);
    for (uint32_t r = 0; r < rank; ++r)
      e.shape[r] = static_cast<int>(read_pod<int64_t>(is, path));
    uint64_t bytes = read_pod<uint64_t>(is, path);
    e.raw.resize(bytes);
    is.read(e.raw.data(), static_cast<std::streamsize>(bytes));
    if (!is) throw IoError("checkpoint '" + path + "': truncated entry '" + name + "'");
    store.entries_[name] = std::move(e);
  }
  return store;
}

}  // namespace sndcr
