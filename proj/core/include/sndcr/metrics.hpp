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

#include <memory>
#include <string>
#include <vector>

#include "sndcr/rng.hpp"
#include "sndcr/tensor.hpp"

namespace sndcr {

/// Frechet distance between Gaussians fitted to two feature sets [N, D]
/// and [M, D] (covariances use 1/(N-1)); the matrix square root goes
/// through a symmetric eigendecomposition with negative eigenvalues
/// clamped to zero.
double fid(const Tensor<double>& feats_a, const Tensor<double>& feats_b);

/// Average over random unit projections of the exact 1-D Wasserstein-1
/// distance between the projected samples. Works for unequal sample counts.
double sliced_w1(const Tensor<double>& a, const Tensor<double>& b,
                 int n_projections, RandomStream& rng);

/// Exact W1 between two 1-D empirical distributions given as sorted samples.
double wasserstein1_sorted(const std::vector<double>& a,
                           const std::vector<double>& b);

struct SwdOptions {
  int n_projections = 128;
  int pyramid_level = 1;
  int patches_per_image = 128;
  uint64_t seed = 0;
};

/// Sliced Wasserstein distance between two image sets: 7x7 channel-
/// concatenated descriptors sampled from one Laplacian pyramid level.
/// Patch positions are drawn from the same substream for both sets, so
/// identical sets score exactly zero.
double swd(const std::vector<Tensor<float>>& imgs_a,
           const std::vector<Tensor<float>>& imgs_b, const SwdOptions& opts);

/// Mean local SSIM over 11x11 Gaussian windows (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 2 for [-1, 1] images; averaged over windows,
/// channels and batch. Shapes must match and spatial dims be >= 11.
double ssim(const Tensor<float>& a, const Tensor<float>& b);

/// One Laplacian pyramid level (level 0 is full resolution).
Tensor<float> laplacian_level(const Tensor<float>& img, int level);

/// Feature source for FID: the frozen extractor's deepest tap, globally
/// average-pooled to one vector per image. Weights are seeded-random by
/// default or loaded from a file, so absolute values are only comparable
/// within one extractor.
class FidExtractor {
 public:
  explicit FidExtractor(uint64_t seed);
  explicit FidExtractor(const std::string& weights_path);
  ~FidExtractor();
  FidExtractor(FidExtractor&&) noexcept;

  /// [N, 512] features; every image must be [1, 3, H, W] with dims
  /// divisible by 16.
  Tensor<double> features(const std::vector<Tensor<float>>& images) const;
  std::string id() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sndcr
