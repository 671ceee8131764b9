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

#include <array>
#include <map>
#include <string>
#include <vector>

#include "sndcr/checkpoint.hpp"
#include "sndcr/nn.hpp"

namespace sndcr {

enum class WeightsSource { kSeededRandom, kPretrainedFile };

template <typename T>
struct VggTaps {
  std::map<int, Var<T>> taps;  // keys {1, 3, 5, 9, 13}
  WeightsSource source = WeightsSource::kSeededRandom;
};

/// Frozen VGG-16-topology feature extractor: 13 conv3x3+ReLU layers with
/// 2x2 max pooling after convs 2, 4, 7, 10 and 13; taps are the post-ReLU
/// outputs of convs 1, 3, 5, 9 and 13. Weights come either from a file
/// (tensor names vgg.conv{i}.weight / vgg.conv{i}.bias, i in 1..13) or from
/// a seeded He-normal draw so the whole suite runs without downloads.
/// Parameters never receive gradients; inputs do.
template <typename T>
class VggExtractor {
 public:
  static constexpr std::array<int, 13> kChannels = {
      64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512};
  static constexpr std::array<int, 5> kPoolAfter = {2, 4, 7, 10, 13};
  static constexpr std::array<int, 5> kTapLayers = {1, 3, 5, 9, 13};

  /// Seeded-random extractor.
  explicit VggExtractor(uint64_t seed) : source_(WeightsSource::kSeededRandom) {
    RandomStream rng(derive_seed(seed, "vgg"));
    int cin = 3;
    for (int i = 0; i < 13; ++i) {
      const int cout = kChannels[static_cast<size_t>(i)];
      Tensor<T> w(Shape{cout, cin, 3, 3});
      init_he_normal(w, cin * 9, rng);
      weights_.push_back(Var<T>(std::move(w), false));
      biases_.push_back(Var<T>(Tensor<T>(Shape{cout}), false));
      cin = cout;
    }
  }

  /// Extractor with weights loaded from a TensorStore file.
  explicit VggExtractor(const std::string& weights_path)
      : source_(WeightsSource::kPretrainedFile) {
    TensorStore store = TensorStore::load(weights_path);
    int cin = 3;
    for (int i = 0; i < 13; ++i) {
      const int cout = kChannels[static_cast<size_t>(i)];
      const std::string base = "vgg.conv" + std::to_string(i + 1);
      Tensor<T> w = store.template get<T>(base + ".weight");
      Tensor<T> b = store.template get<T>(base + ".bias");
      const Shape expect_w{cout, cin, 3, 3};
      const Shape expect_b{cout};
      SNDCR_CHECK_SHAPE(w.shape() == expect_w,
                        weights_path << ": " << base << ".weight has shape "
                                     << shape_str(w.shape()) << ", expected "
                                     << shape_str(expect_w));
      SNDCR_CHECK_SHAPE(b.shape() == expect_b,
                        weights_path << ": " << base << ".bias has shape "
                                     << shape_str(b.shape()));
      weights_.push_back(Var<T>(std::move(w), false));
      biases_.push_back(Var<T>(std::move(b), false));
      cin = cout;
    }
  }

  WeightsSource source() const { return source_; }

  std::string id() const {
    return source_ == WeightsSource::kSeededRandom ? "vgg16-seeded-random"
                                                   : "vgg16-file";
  }

  /// Runs the stack and returns the five taps. Gradients flow to x only.
  VggTaps<T> extract(const Var<T>& x) const {
    SNDCR_CHECK_SHAPE(x.value().rank() == 4 && x.value().dim(1) == 3,
                      "vgg extract: [B, 3, H, W] input expected, got "
                          << shape_str(x.value().shape()));
    SNDCR_CHECK_SHAPE(x.value().dim(2) % 16 == 0 && x.value().dim(3) % 16 == 0,
                      "vgg extract: spatial dims must be divisible by 16, got "
                          << shape_str(x.value().shape()));
    VggTaps<T> out;
    out.source = source_;
    Var<T> h = source_ == WeightsSource::kPretrainedFile ? renormalize(x) : x;
    int pool_idx = 0;
    for (int i = 0; i < 13; ++i) {
      h = relu(conv2d(h, weights_[static_cast<size_t>(i)],
                      biases_[static_cast<size_t>(i)], ConvOpts{1, 1}));
      const int layer = i + 1;
      for (int t : kTapLayers)
        if (t == layer) out.taps.emplace(layer, h);
      if (pool_idx < 5 && kPoolAfter[static_cast<size_t>(pool_idx)] == layer) {
        h = maxpool2x2(h);
        ++pool_idx;
      }
    }
    return out;
  }

  /// Stable hash of all parameters; the extractor must stay frozen.
  uint64_t param_hash() const {
    uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const Tensor<T>& t) {
      const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
      const size_t n = static_cast<size_t>(t.numel()) * sizeof(T);
      for (size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
      }
    };
    for (const auto& w : weights_) mix(w.value());
    for (const auto& b : biases_) mix(b.value());
    return h;
  }

 private:
  /// Maps [-1, 1] inputs to the ImageNet statistics pretrained weights were
  /// trained with.
  Var<T> renormalize(const Var<T>& x) const {
    static const std::array<double, 3> mean = {0.485, 0.456, 0.406};
    static const std::array<double, 3> stddev = {0.229, 0.224, 0.225};
    const int B = x.value().dim(0), C = 3, H = x.value().dim(2),
              W = x.value().dim(3);
    Tensor<T> out = Tensor<T>::uninitialized(x.value().shape());
    std::array<T, 3> a, b;
    for (int c = 0; c < 3; ++c) {
      a[static_cast<size_t>(c)] = static_cast<T>(0.5 / stddev[static_cast<size_t>(c)]);
      b[static_cast<size_t>(c)] = static_cast<T>(
          (0.5 - mean[static_cast<size_t>(c)]) / stddev[static_cast<size_t>(c)]);
    }
    const int64_t hw = static_cast<int64_t>(H) * W;
    for (int bi = 0; bi < B; ++bi)
      for (int c = 0; c < C; ++c) {
        const T* xp = &x.value().at4(bi, c, 0, 0);
        T* op = &out.at4(bi, c, 0, 0);
        for (int64_t i = 0; i < hw; ++i)
          op[i] = xp[i] * a[static_cast<size_t>(c)] + b[static_cast<size_t>(c)];
      }
    auto xn = x.node();
    return Var<T>::make_op(std::move(out), {x}, [xn, a, B, C, hw](Node<T>& self) {
      if (!xn->requires_grad) return;
      xn->ensure_grad();
      for (int bi = 0; bi < B; ++bi)
        for (int c = 0; c < C; ++c) {
          const int64_t base = (static_cast<int64_t>(bi) * C + c) * hw;
          for (int64_t i = 0; i < hw; ++i)
            xn->grad[base + i] += self.grad[base + i] * a[static_cast<size_t>(c)];
        }
    });
  }

  WeightsSource source_;
  std::vector<Var<T>> weights_;
  std::vector<Var<T>> biases_;
};

}  // namespace sndcr
