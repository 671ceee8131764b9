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

#include "sndcr/tensor.hpp"

namespace sndcr {

/// 8-bit RGB image in HWC layout; the interchange type between files,
/// the rasterizer and the [-1, 1] tensors used everywhere else.
struct ImageU8 {
  int height = 0, width = 0;
  std::vector<uint8_t> rgb;  // height * width * 3

  uint8_t& at(int y, int x, int c) {
    return rgb[(static_cast<size_t>(y) * width + x) * 3 + static_cast<size_t>(c)];
  }
  uint8_t at(int y, int x, int c) const {
    return rgb[(static_cast<size_t>(y) * width + x) * 3 + static_cast<size_t>(c)];
  }
};

/// v/127.5 - 1 per channel, CHW.
Tensor<float> to_tensor(const ImageU8& img);
/// (v + 1) * 127.5, rounded and clamped. Expects [1, 3, H, W].
ImageU8 from_tensor(const Tensor<float>& t);

ImageU8 load_image_u8(const std::string& path);  // throws IoError
void save_image_u8(const ImageU8& img, const std::string& path);

ImageU8 resize_bilinear(const ImageU8& img, int out_h, int out_w);

/// Sorted list of readable image files (png/jpg/jpeg/bmp) in a directory.
std::vector<std::string> list_image_files(const std::string& dir);

/// Horizontal grid of equal-size images, for training sample sheets.
ImageU8 hstack_grid(const std::vector<ImageU8>& rows_of_images, int per_row);

}  // namespace sndcr
