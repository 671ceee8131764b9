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

#include "sndcr/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace sndcr {

namespace fs = std::filesystem;

Tensor<float> to_tensor(const ImageU8& img) {
  Tensor<float> t(Shape{1, 3, img.height, img.width});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        t.at4(0, c, y, x) = static_cast<float>(img.at(y, x, c)) / 127.5f - 1.0f;
  return t;
}

ImageU8 from_tensor(const Tensor<float>& t) {
  SNDCR_CHECK_SHAPE(t.rank() == 4 && t.dim(0) == 1 && t.dim(1) == 3,
                    "from_tensor: [1, 3, H, W] expected, got "
                        << shape_str(t.shape()));
  ImageU8 img;
  img.height = t.dim(2);
  img.width = t.dim(3);
  img.rgb.resize(static_cast<size_t>(img.height) * img.width * 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        float v = (t.at4(0, c, y, x) + 1.0f) * 127.5f;
        img.at(y, x, c) =
            static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
  return img;
}

namespace {

cv::Mat to_mat_bgr(const ImageU8& img) {
  cv::Mat rgb(img.height, img.width, CV_8UC3,
              const_cast<uint8_t*>(img.rgb.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

ImageU8 from_mat_bgr(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  ImageU8 img;
  img.height = rgb.rows;
  img.width = rgb.cols;
  img.rgb.assign(rgb.data, rgb.data + static_cast<size_t>(rgb.total()) * 3);
  return img;
}

}  // namespace

ImageU8 load_image_u8(const std::string& path) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image '" + path + "'");
  return from_mat_bgr(bgr);
}

void save_image_u8(const ImageU8& img, const std::string& path) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  if (!cv::imwrite(path, to_mat_bgr(img)))
    throw IoError("cannot write image '" + path + "'");
}

ImageU8 resize_bilinear(const ImageU8& img, int out_h, int out_w) {
  if (img.height == out_h && img.width == out_w) return img;
  cv::Mat src(img.height, img.width, CV_8UC3,
              const_cast<uint8_t*>(img.rgb.data()));
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(out_w, out_h), 0, 0, cv::INTER_LINEAR);
  ImageU8 out;
  out.height = out_h;
  out.width = out_w;
  out.rgb.assign(dst.data, dst.data + static_cast<size_t>(dst.total()) * 3);
  return out;
}

std::vector<std::string> list_image_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: '" + dir + "'");
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp")
      files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

ImageU8 hstack_grid(const std::vector<ImageU8>& images, int per_row) {
  SNDCR_CHECK(!images.empty() && per_row >= 1, "hstack_grid: empty input");
  const int h = images[0].height, w = images[0].width;
  const int rows = (static_cast<int>(images.size()) + per_row - 1) / per_row;
  ImageU8 out;
  out.height = rows * h;
  out.width = per_row * w;
  out.rgb.assign(static_cast<size_t>(out.height) * out.width * 3, 0);
  for (size_t i = 0; i < images.size(); ++i) {
    SNDCR_CHECK(images[i].height == h && images[i].width == w,
                "hstack_grid: images must share one size");
    const int r = static_cast<int>(i) / per_row, c = static_cast<int>(i) % per_row;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < 3; ++ch)
          out.at(r * h + y, c * w + x, ch) = images[i].at(y, x, ch);
  }
  return out;
}

}  // namespace sndcr
