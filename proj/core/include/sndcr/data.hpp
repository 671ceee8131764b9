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
#include <utility>
#include <vector>

#include "sndcr/image_io.hpp"
#include "sndcr/rng.hpp"

namespace sndcr {

enum class SyntheticKind { kCircles, kSquares };

/// Parameters of the zero-download synthetic shape domains: anti-aliased
/// striped circles versus checkerboard squares on dark backgrounds, with
/// randomized geometry and bright hues.
struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::kCircles;
  int n = 100;
  int size = 64;
  uint64_t seed = 0;
};

/// Renders image `index` of the spec; bit-identical across calls.
ImageU8 render_synthetic(const SyntheticSpec& spec, int index);

/// Writes all n images of the spec as 8-bit PNGs (img_00000.png, ...).
void make_synthetic(const SyntheticSpec& spec, const std::string& dir);

/// One image source: a folder of 8-bit files or a synthetic spec.
class ImageSource {
 public:
  static ImageSource folder(const std::string& dir);
  static ImageSource synthetic(const SyntheticSpec& spec);

  int count() const;
  /// Native-size image in [-1, 1], [1, 3, H, W].
  Tensor<float> load(int index) const;
  std::string name(int index) const;

 private:
  bool is_folder_ = false;
  std::vector<std::string> files_;
  SyntheticSpec spec_;
};

/// Unpaired two-domain pipeline: x walks the shuffled source domain
/// sequentially (the smaller domain reshuffles and wraps), y is drawn
/// independently and uniformly from the target domain. Every image is
/// bilinearly resized to load_size, randomly cropped to crop_size and
/// optionally h-flipped with probability 1/2, yielding [-1, 1] batches.
class UnpairedDataset {
 public:
  UnpairedDataset(ImageSource domain_x, ImageSource domain_y, int load_size,
                  int crop_size, bool flip, uint64_t seed);

  int epoch_length() const;
  int size_x() const { return x_.count(); }
  int size_y() const { return y_.count(); }

  /// One (x, y) pair, each [1, 3, crop, crop].
  std::pair<Tensor<float>, Tensor<float>> next_pair();
  /// Batched variant stacking `batch` independent pairs.
  std::pair<Tensor<float>, Tensor<float>> next_batch(int batch);

  /// Single augmented image by domain index (used to draw the extra real
  /// positives/negatives); consumes the crop/flip streams.
  Tensor<float> sample_from_x(int index);
  Tensor<float> sample_from_y(int index);

  /// Index of the last drawn (x, y) pair, for independence diagnostics.
  std::pair<int, int> last_indices() const { return {last_x_, last_y_}; }

  std::string serialize_state() const;
  void restore_state(const std::string& state);

 private:
  Tensor<float> augment(Tensor<float> img, RandomStream& crop_rng,
                        RandomStream& flip_rng);
  void reshuffle_x();

  ImageSource x_, y_;
  int load_size_, crop_size_;
  bool flip_;
  RandomStream order_rng_, crop_rng_, flip_rng_, ypick_rng_;
  std::vector<int> x_order_;
  int x_pos_ = 0;
  int last_x_ = -1, last_y_ = -1;
};

}  // namespace sndcr
