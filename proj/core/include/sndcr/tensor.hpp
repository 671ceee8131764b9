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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sndcr {

/// Error hierarchy shared by every module. All failures surface as one of
/// these; the CLI maps them onto exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};
class TrainingAbort : public Error {
 public:
  explicit TrainingAbort(const std::string& msg) : Error(msg) {}
};

#define SNDCR_CHECK(cond, msg)                                       \
  do {                                                               \
    if (!(cond)) {                                                   \
      std::ostringstream oss_;                                       \
      oss_ << msg;                                                   \
      throw ::sndcr::Error(oss_.str());                              \
    }                                                                \
  } while (0)

#define SNDCR_CHECK_SHAPE(cond, msg)                                 \
  do {                                                               \
    if (!(cond)) {                                                   \
      std::ostringstream oss_;                                       \
      oss_ << msg;                                                   \
      throw ::sndcr::ShapeError(oss_.str());                         \
    }                                                                \
  } while (0)

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

/// Dense row-major tensor. The last axis is contiguous; a [B, C, H, W]
/// tensor therefore stores each channel's rows back to back, which is the
/// layout the GEMM-based convolutions expect. Value semantics (deep copy);
/// the plain Shape constructor zero-fills, uninitialized() skips the fill
/// for outputs that overwrite every element.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), size_(shape_numel(shape_)) {
    data_ = alloc(size_);
    std::fill(data_.get(), data_.get() + size_, T(0));
  }
  Tensor(Shape shape, T fill)
      : shape_(std::move(shape)), size_(shape_numel(shape_)) {
    data_ = alloc(size_);
    std::fill(data_.get(), data_.get() + size_, fill);
  }
  Tensor(Shape shape, const std::vector<T>& data)
      : shape_(std::move(shape)), size_(shape_numel(shape_)) {
    SNDCR_CHECK_SHAPE(static_cast<int64_t>(data.size()) == size_,
                      "tensor data size " << data.size()
                          << " does not match shape " << shape_str(shape_));
    data_ = alloc(size_);
    std::copy(data.begin(), data.end(), data_.get());
  }

  Tensor(const Tensor& o) : shape_(o.shape_), size_(o.size_) {
    data_ = alloc(size_);
    std::copy(o.data_.get(), o.data_.get() + size_, data_.get());
  }
  Tensor(Tensor&&) noexcept = default;
  Tensor& operator=(const Tensor& o) {
    if (this != &o) {
      shape_ = o.shape_;
      if (size_ != o.size_) data_ = alloc(o.size_);
      size_ = o.size_;
      std::copy(o.data_.get(), o.data_.get() + size_, data_.get());
    }
    return *this;
  }
  Tensor& operator=(Tensor&&) noexcept = default;

  static Tensor uninitialized(Shape shape) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.size_ = shape_numel(t.shape_);
    t.data_ = alloc(t.size_);
    return t;
  }
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, T v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  const Shape& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t numel() const { return size_; }
  bool empty() const { return size_ == 0; }

  T* data() { return data_.get(); }
  const T* data() const { return data_.get(); }
  T& operator[](int64_t i) { return data_[i]; }
  const T& operator[](int64_t i) const { return data_[i]; }

  // 4-D accessors for [B, C, H, W] loops.
  T& at4(int b, int c, int h, int w) {
    return data_[((static_cast<int64_t>(b) * shape_[1] + c) * shape_[2] + h) *
                     shape_[3] +
                 w];
  }
  const T& at4(int b, int c, int h, int w) const {
    return data_[((static_cast<int64_t>(b) * shape_[1] + c) * shape_[2] + h) *
                     shape_[3] +
                 w];
  }
  T& at2(int r, int c) {
    return data_[static_cast<int64_t>(r) * shape_[1] + c];
  }
  const T& at2(int r, int c) const {
    return data_[static_cast<int64_t>(r) * shape_[1] + c];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  Tensor reshaped(Shape s) const {
    SNDCR_CHECK_SHAPE(shape_numel(s) == numel(),
                      "reshape " << shape_str(shape_) << " -> " << shape_str(s)
                                 << " changes element count");
    Tensor out = *this;
    out.shape_ = std::move(s);
    return out;
  }

  bool all_finite() const {
    for (int64_t i = 0; i < size_; ++i)
      if (!std::isfinite(static_cast<double>(data_[i]))) return false;
    return true;
  }

  T item() const {
    SNDCR_CHECK(numel() == 1, "item() on tensor with " << numel() << " elements");
    return data_[0];
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out = Tensor<U>::uninitialized(shape_);
    for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  void fill(T v) { std::fill(data_.get(), data_.get() + size_, v); }

 private:
  static std::unique_ptr<T[]> alloc(int64_t n) {
    return std::unique_ptr<T[]>(new T[static_cast<size_t>(std::max<int64_t>(n, 0))]);
  }

  Shape shape_;
  int64_t size_ = 0;
  std::unique_ptr<T[]> data_;
};

}  // namespace sndcr
