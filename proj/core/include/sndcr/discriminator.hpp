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

#include <string>
#include <vector>

#include "sndcr/nn.hpp"

namespace sndcr {

/// 70x70 PatchGAN: C64-C128-C256-C512-C1 with kernel 4, the first three
/// convs stride 2, the last two stride 1, InstanceNorm + LeakyReLU(0.2) on
/// the middle layers, raw logits out. A 256x256 input yields a 30x30 logit
/// grid; each logit scores one 70x70 receptive-field patch.
template <typename T>
class PatchDiscriminator {
 public:
  explicit PatchDiscriminator(int base_channels, RandomStream& rng,
                              bool use_norm = true, int in_channels = 3)
      : use_norm_(use_norm) {
    const int c = base_channels;
    convs_.emplace_back("D.conv0", in_channels, c, 4, ConvOpts{2, 1}, rng);
    convs_.emplace_back("D.conv1", c, 2 * c, 4, ConvOpts{2, 1}, rng);
    convs_.emplace_back("D.conv2", 2 * c, 4 * c, 4, ConvOpts{2, 1}, rng);
    convs_.emplace_back("D.conv3", 4 * c, 8 * c, 4, ConvOpts{1, 1}, rng);
    convs_.emplace_back("D.conv4", 8 * c, 1, 4, ConvOpts{1, 1}, rng);
    if (use_norm_) {
      norms_.emplace_back("D.norm1", 2 * c);
      norms_.emplace_back("D.norm2", 4 * c);
      norms_.emplace_back("D.norm3", 8 * c);
    }
  }

  /// Returns patch logits [B, 1, h, w]. Input must be square and >= 64.
  Var<T> forward(const Var<T>& x) {
    SNDCR_CHECK_SHAPE(x.value().rank() == 4 &&
                          x.value().dim(2) == x.value().dim(3) &&
                          x.value().dim(2) >= 64,
                      "discriminator expects square input >= 64, got "
                          << shape_str(x.value().shape()));
    Var<T> h = leaky_relu(convs_[0].forward(x), T(0.2));
    for (size_t i = 1; i + 1 < convs_.size(); ++i) {
      Var<T> c = convs_[i].forward(h);
      if (use_norm_) c = norms_[i - 1].forward(c);
      h = leaky_relu(c, T(0.2));
    }
    return convs_.back().forward(h);
  }

  void collect(ParamRefs<T>& out) {
    for (auto& c : convs_) c.collect(out);
    for (auto& n : norms_) n.collect(out);
  }

 private:
  bool use_norm_;
  std::vector<Conv2dLayer<T>> convs_;
  std::vector<InstanceNorm2d<T>> norms_;
};

/// History buffer of generated images replayed to the discriminator. Each
/// query either returns the fresh image (pushing it while the pool fills,
/// or keeping it with probability 1/2 afterwards) or swaps it against a
/// uniformly random pooled image.
template <typename T>
class ImageBuffer {
 public:
  ImageBuffer(int capacity, RandomStream rng)
      : capacity_(capacity), rng_(std::move(rng)) {}

  Tensor<T> query(const Tensor<T>& fresh) {
    SNDCR_CHECK_SHAPE(fresh.rank() == 4 && fresh.dim(0) >= 1,
                      "buffer query expects a non-empty [B, C, H, W] batch");
    if (capacity_ == 0) return fresh;
    const int b = fresh.dim(0);
    Tensor<T> out(fresh.shape());
    for (int i = 0; i < b; ++i) {
      Tensor<T> img = slice_image(fresh, i);
      if (static_cast<int>(pool_.size()) < capacity_) {
        pool_.push_back(img);
        write_image(out, i, img);
      } else if (rng_.bernoulli(0.5)) {
        int j = rng_.uniform_int(0, capacity_ - 1);
        write_image(out, i, pool_[static_cast<size_t>(j)]);
        pool_[static_cast<size_t>(j)] = img;
        ++swaps_;
      } else {
        write_image(out, i, img);
      }
      ++post_fill_queries_;
      if (static_cast<int>(pool_.size()) < capacity_) post_fill_queries_ = 0;
    }
    return out;
  }

  int size() const { return static_cast<int>(pool_.size()); }
  int capacity() const { return capacity_; }
  int64_t swaps() const { return swaps_; }
  int64_t post_fill_queries() const { return post_fill_queries_; }

  const std::vector<Tensor<T>>& pool() const { return pool_; }
  RandomStream& rng() { return rng_; }
  void restore_pool(std::vector<Tensor<T>> pool) { pool_ = std::move(pool); }

 private:
  static Tensor<T> slice_image(const Tensor<T>& batch, int i) {
    const int c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
    const int64_t n = static_cast<int64_t>(c) * h * w;
    Tensor<T> img(Shape{1, c, h, w});
    const T* src = batch.data() + i * n;
    std::copy(src, src + n, img.data());
    return img;
  }
  static void write_image(Tensor<T>& batch, int i, const Tensor<T>& img) {
    const int64_t n = img.numel();
    std::copy(img.data(), img.data() + n, batch.data() + i * n);
  }

  int capacity_;
  RandomStream rng_;
  std::vector<Tensor<T>> pool_;
  int64_t swaps_ = 0;
  int64_t post_fill_queries_ = 0;
};

}  // namespace sndcr
