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

#include "sndcr/blocks.hpp"

namespace sndcr {

/// The five tapped features of one generator forward: (0) the RGB input,
/// (1)/(2) the two downsampling conv outputs (after norm + activation),
/// (3) the first residual block output, (4) the fifth residual block output
/// (the last block when fewer than five are configured).
template <typename T>
struct GeneratorTaps {
  std::vector<Var<T>> taps;
};

struct GeneratorConfig {
  int in_channels = 3;
  int base_channels = 64;
  int n_resblocks = 9;
  int input_size = 256;  // crop size; fixes the FCA basis dims
  int fca_groups = 16;
  int fca_reduction = 16;
  int power_iterations = 1;
};

/// Encoder-decoder translation network: 7x7 stem, two stride-2 downsampling
/// convs, spectral-normalized residual blocks in the low-resolution space,
/// one FCA gate, two stride-2 transposed convs and a tanh RGB head.
/// InstanceNorm + ReLU follow every conv except the output.
template <typename T>
class ResnetGenerator {
 public:
  ResnetGenerator(const GeneratorConfig& cfg, RandomStream& rng)
      : cfg_(cfg),
        stem_("G.stem", cfg.in_channels, cfg.base_channels, 7,
              ConvOpts{1, 3, PadMode::kReflect}, rng),
        stem_norm_("G.stem_norm", cfg.base_channels),
        down1_("G.down1", cfg.base_channels, 2 * cfg.base_channels, 3,
               ConvOpts{2, 1, PadMode::kReflect}, rng),
        down1_norm_("G.down1_norm", 2 * cfg.base_channels),
        down2_("G.down2", 2 * cfg.base_channels, 4 * cfg.base_channels, 3,
               ConvOpts{2, 1, PadMode::kReflect}, rng),
        down2_norm_("G.down2_norm", 4 * cfg.base_channels),
        // Kernel 4 divides the stride evenly, so every output pixel gets the
        // same number of kernel contributions (no checkerboard).
        up1_("G.up1", 4 * cfg.base_channels, 2 * cfg.base_channels, 4, 2, 1, 0,
             rng),
        up1_norm_("G.up1_norm", 2 * cfg.base_channels),
        up2_("G.up2", 2 * cfg.base_channels, cfg.base_channels, 4, 2, 1, 0, rng),
        up2_norm_("G.up2_norm", cfg.base_channels),
        head_("G.head", cfg.base_channels, cfg.in_channels, 7,
              ConvOpts{1, 3, PadMode::kReflect}, rng) {
    SNDCR_CHECK(cfg.input_size >= 16 && cfg.input_size % 4 == 0,
                "generator input size must be >= 16 and divisible by 4, got "
                    << cfg.input_size);
    const int bottleneck = cfg.input_size / 4;
    for (int i = 0; i < cfg.n_resblocks; ++i) {
      res_.emplace_back("G.res" + std::to_string(i + 1), 4 * cfg.base_channels,
                        rng);
      res_.back().conv1.n_power_iterations = cfg.power_iterations;
      res_.back().conv2.n_power_iterations = cfg.power_iterations;
    }
    FcaConfig fca_cfg;
    fca_cfg.channel_groups = cfg.fca_groups;
    fca_cfg.reduction_ratio = cfg.fca_reduction;
    fca_ = FcaLayer<T>("G.fca", 4 * cfg.base_channels, bottleneck, bottleneck,
                       fca_cfg, rng);
  }

  const GeneratorConfig& config() const { return cfg_; }

  /// Residual block indices (1-based) whose outputs are tapped.
  int tap_block_a() const { return 1; }
  int tap_block_b() const { return std::min(5, cfg_.n_resblocks); }

  struct ForwardResult {
    Var<T> output;
    GeneratorTaps<T> taps;
    Var<T> bottleneck;  // feature entering the FCA gate
  };

  ForwardResult forward(const Var<T>& x, bool training, bool want_taps) {
    check_input(x);
    ForwardResult r;
    if (want_taps) r.taps.taps.push_back(x);  // tap 0: RGB pixels

    Var<T> h = relu(stem_norm_.forward(stem_.forward(x)));
    h = relu(down1_norm_.forward(down1_.forward(h)));
    if (want_taps) r.taps.taps.push_back(h);  // tap 1
    h = relu(down2_norm_.forward(down2_.forward(h)));
    if (want_taps) r.taps.taps.push_back(h);  // tap 2

    for (int i = 0; i < cfg_.n_resblocks; ++i) {
      h = res_[static_cast<size_t>(i)].forward(h, training);
      if (want_taps && (i + 1 == tap_block_a() || i + 1 == tap_block_b()))
        r.taps.taps.push_back(h);
    }
    r.bottleneck = h;
    h = fca_.forward(h);

    h = relu(up1_norm_.forward(up1_.forward(h)));
    h = relu(up2_norm_.forward(up2_.forward(h)));
    r.output = tanh_op(head_.forward(h));
    return r;
  }

  Var<T> generate(const Var<T>& x, bool training = false) {
    return forward(x, training, /*want_taps=*/false).output;
  }

  /// Encoder-only pass returning the five taps (shares the encoder weights
  /// with the full forward; used to tap features of generated images).
  GeneratorTaps<T> encode_taps(const Var<T>& x, bool training) {
    check_input(x);
    GeneratorTaps<T> taps;
    taps.taps.push_back(x);
    Var<T> h = relu(stem_norm_.forward(stem_.forward(x)));
    h = relu(down1_norm_.forward(down1_.forward(h)));
    taps.taps.push_back(h);
    h = relu(down2_norm_.forward(down2_.forward(h)));
    taps.taps.push_back(h);
    for (int i = 1; i <= tap_block_b(); ++i) {
      h = res_[static_cast<size_t>(i - 1)].forward(h, training);
      if (i == tap_block_a() || i == tap_block_b()) taps.taps.push_back(h);
    }
    return taps;
  }

  void collect(ParamRefs<T>& out) {
    stem_.collect(out);
    stem_norm_.collect(out);
    down1_.collect(out);
    down1_norm_.collect(out);
    down2_.collect(out);
    down2_norm_.collect(out);
    for (auto& r : res_) r.collect(out);
    fca_.collect(out);
    up1_.collect(out);
    up1_norm_.collect(out);
    up2_.collect(out);
    up2_norm_.collect(out);
    head_.collect(out);
  }

  std::vector<SnConv2d<T>*> sn_convs() {
    std::vector<SnConv2d<T>*> out;
    for (auto& r : res_) {
      out.push_back(&r.conv1);
      out.push_back(&r.conv2);
    }
    return out;
  }

 private:
  void check_input(const Var<T>& x) const {
    SNDCR_CHECK_SHAPE(x.value().rank() == 4 &&
                          x.value().dim(1) == cfg_.in_channels,
                      "generator expects [B, " << cfg_.in_channels
                          << ", H, W], got " << shape_str(x.value().shape()));
    const int h = x.value().dim(2), w = x.value().dim(3);
    SNDCR_CHECK_SHAPE(h % 4 == 0 && w % 4 == 0 && h >= 16 && w >= 16,
                      "generator input dims must be >= 16 and divisible by 4, "
                      "got " << h << "x" << w);
  }

  GeneratorConfig cfg_;
  Conv2dLayer<T> stem_;
  InstanceNorm2d<T> stem_norm_;
  Conv2dLayer<T> down1_;
  InstanceNorm2d<T> down1_norm_;
  Conv2dLayer<T> down2_;
  InstanceNorm2d<T> down2_norm_;
  std::vector<SnResBlock<T>> res_;
  FcaLayer<T> fca_;
  ConvTranspose2dLayer<T> up1_;
  InstanceNorm2d<T> up1_norm_;
  ConvTranspose2dLayer<T> up2_;
  InstanceNorm2d<T> up2_norm_;
  Conv2dLayer<T> head_;
};

}  // namespace sndcr
