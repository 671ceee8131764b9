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

#include "sndcr/data.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

namespace sndcr {

namespace fs = std::filesystem;

namespace {

struct Rgb {
  double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  double c = v * s;
  double hp = h * 6.0;
  double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) {
    r = c; g = x;
  } else if (hp < 2) {
    r = x; g = c;
  } else if (hp < 3) {
    g = c; b = x;
  } else if (hp < 4) {
    g = x; b = c;
  } else if (hp < 5) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  return {r + (v - c), g + (v - c), b + (v - c)};
}

// Backgrounds stay dark (mean channel < ~0.25) and foreground hues bright
// (mean channel > ~0.5) so a fixed luminance threshold separates them.
Rgb random_background(RandomStream& rng) {
  return hsv_to_rgb(rng.uniform(), rng.uniform(0.1, 0.4), rng.uniform(0.08, 0.22));
}

Rgb random_bright(RandomStream& rng) {
  return hsv_to_rgb(rng.uniform(), rng.uniform(0.30, 0.55), rng.uniform(0.85, 1.0));
}

uint8_t quantize(double v) {
  long q = std::lround(v * 255.0);
  return static_cast<uint8_t>(std::clamp(q, 0L, 255L));
}

}  // namespace

ImageU8 render_synthetic(const SyntheticSpec& spec, int index) {
  SNDCR_CHECK(spec.size >= 16, "synthetic images must be at least 16x16");
  RandomStream rng(derive_seed(spec.seed, (spec.kind == SyntheticKind::kCircles
                                               ? "circle"
                                               : "square") +
                                              std::to_string(index)));
  const int s = spec.size;
  const Rgb bg = random_background(rng);
  const Rgb c1 = random_bright(rng);
  const Rgb c2 = random_bright(rng);

  // Geometry draws (fixed order keeps renders reproducible).
  double cx = 0, cy = 0, radius = 0;
  int sq_x0 = 0, sq_y0 = 0, sq_side = 0;
  if (spec.kind == SyntheticKind::kCircles) {
    cx = rng.uniform(0.35, 0.65) * s;
    cy = rng.uniform(0.35, 0.65) * s;
    radius = rng.uniform(0.22, 0.38) * s;
    double fit = std::min({cx, cy, s - 1 - cx, s - 1 - cy}) - 2.0;
    radius = std::min(radius, fit);
  } else {
    sq_side = static_cast<int>(rng.uniform(0.45, 0.70) * s);
    sq_x0 = rng.uniform_int(1, s - sq_side - 2);
    sq_y0 = rng.uniform_int(1, s - sq_side - 2);
  }
  const int band = std::max(2, s / 16);
  const int cell = std::max(2, s / 8);

  ImageU8 img;
  img.height = s;
  img.width = s;
  img.rgb.resize(static_cast<size_t>(s) * s * 3);

  const int ss = 3;  // supersampling grid per pixel
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      double coverage = 0;
      for (int sy = 0; sy < ss; ++sy)
        for (int sx = 0; sx < ss; ++sx) {
          double px = x + (sx + 0.5) / ss;
          double py = y + (sy + 0.5) / ss;
          bool inside;
          if (spec.kind == SyntheticKind::kCircles) {
            double dx = px - cx, dy = py - cy;
            inside = dx * dx + dy * dy <= radius * radius;
          } else {
            inside = px >= sq_x0 && px < sq_x0 + sq_side && py >= sq_y0 &&
                     py < sq_y0 + sq_side;
          }
          if (inside) coverage += 1.0;
        }
      coverage /= ss * ss;
      Rgb fg;
      if (spec.kind == SyntheticKind::kCircles) {
        fg = ((y / band) % 2 == 0) ? c1 : c2;  // horizontal stripes
      } else {
        fg = (((x / cell) + (y / cell)) % 2 == 0) ? c1 : c2;  // checkerboard
      }
      img.at(y, x, 0) = quantize(coverage * fg.r + (1 - coverage) * bg.r);
      img.at(y, x, 1) = quantize(coverage * fg.g + (1 - coverage) * bg.g);
      img.at(y, x, 2) = quantize(coverage * fg.b + (1 - coverage) * bg.b);
    }
  return img;
}

void make_synthetic(const SyntheticSpec& spec, const std::string& dir) {
  SNDCR_CHECK(spec.n >= 1, "make_synthetic: n must be >= 1");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir))
    throw IoError("cannot create directory '" + dir + "'");
  for (int i = 0; i < spec.n; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%05d.png", i);
    save_image_u8(render_synthetic(spec, i), (fs::path(dir) / name).string());
  }
}

// ---------------------------------------------------------------------------
// ImageSource
// ---------------------------------------------------------------------------

ImageSource ImageSource::folder(const std::string& dir) {
  ImageSource src;
  src.is_folder_ = true;
  std::vector<std::string> files = list_image_files(dir);
  for (const std::string& f : files) {
    try {
      (void)load_image_u8(f);
      src.files_.push_back(f);
    } catch (const IoError&) {
      std::fprintf(stderr, "warning: skipping unreadable image '%s'\n",
                   f.c_str());
    }
  }
  if (src.files_.empty())
    throw Error("no readable images in '" + dir + "'");
  return src;
}

ImageSource ImageSource::synthetic(const SyntheticSpec& spec) {
  ImageSource src;
  src.is_folder_ = false;
  src.spec_ = spec;
  return src;
}

int ImageSource::count() const {
  return is_folder_ ? static_cast<int>(files_.size()) : spec_.n;
}

Tensor<float> ImageSource::load(int index) const {
  SNDCR_CHECK(index >= 0 && index < count(), "image index out of range");
  if (is_folder_)
    return to_tensor(load_image_u8(files_[static_cast<size_t>(index)]));
  return to_tensor(render_synthetic(spec_, index));
}

std::string ImageSource::name(int index) const {
  if (is_folder_)
    return fs::path(files_[static_cast<size_t>(index)]).filename().string();
  char name[32];
  std::snprintf(name, sizeof(name), "img_%05d.png", index);
  return name;
}

// ---------------------------------------------------------------------------
// UnpairedDataset
// ---------------------------------------------------------------------------

UnpairedDataset::UnpairedDataset(ImageSource domain_x, ImageSource domain_y,
                                 int load_size, int crop_size, bool flip,
                                 uint64_t seed)
    : x_(std::move(domain_x)),
      y_(std::move(domain_y)),
      load_size_(load_size),
      crop_size_(crop_size),
      flip_(flip),
      order_rng_(derive_seed(seed, "data.order")),
      crop_rng_(derive_seed(seed, "data.crop")),
      flip_rng_(derive_seed(seed, "data.flip")),
      ypick_rng_(derive_seed(seed, "data.ypick")) {
  SNDCR_CHECK(crop_size_ <= load_size_, "crop_size must be <= load_size");
  SNDCR_CHECK(x_.count() >= 1 && y_.count() >= 1,
              "both domains must be non-empty");
  reshuffle_x();
}

int UnpairedDataset::epoch_length() const {
  return std::max(x_.count(), y_.count());
}

void UnpairedDataset::reshuffle_x() {
  x_order_ = order_rng_.permutation(x_.count());
  x_pos_ = 0;
}

Tensor<float> UnpairedDataset::augment(Tensor<float> img,
                                       RandomStream& crop_rng,
                                       RandomStream& flip_rng) {
  ImageU8 u8 = from_tensor(img);
  if (u8.height != load_size_ || u8.width != load_size_)
    u8 = resize_bilinear(u8, load_size_, load_size_);
  const int margin = load_size_ - crop_size_;
  const int oy = margin > 0 ? crop_rng.uniform_int(0, margin) : 0;
  const int ox = margin > 0 ? crop_rng.uniform_int(0, margin) : 0;
  const bool do_flip = flip_ && flip_rng.bernoulli(0.5);
  Tensor<float> out(Shape{1, 3, crop_size_, crop_size_});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < crop_size_; ++y)
      for (int x = 0; x < crop_size_; ++x) {
        int sx = do_flip ? (crop_size_ - 1 - x) : x;
        out.at4(0, c, y, x) =
            static_cast<float>(u8.at(oy + y, ox + sx, c)) / 127.5f - 1.0f;
      }
  return out;
}

std::pair<Tensor<float>, Tensor<float>> UnpairedDataset::next_pair() {
  if (x_pos_ >= x_.count()) reshuffle_x();
  last_x_ = x_order_[static_cast<size_t>(x_pos_++)];
  last_y_ = ypick_rng_.uniform_int(0, y_.count() - 1);
  Tensor<float> x = augment(x_.load(last_x_), crop_rng_, flip_rng_);
  Tensor<float> y = augment(y_.load(last_y_), crop_rng_, flip_rng_);
  return {std::move(x), std::move(y)};
}

Tensor<float> UnpairedDataset::sample_from_x(int index) {
  return augment(x_.load(index), crop_rng_, flip_rng_);
}

Tensor<float> UnpairedDataset::sample_from_y(int index) {
  return augment(y_.load(index), crop_rng_, flip_rng_);
}

std::pair<Tensor<float>, Tensor<float>> UnpairedDataset::next_batch(int batch) {
  SNDCR_CHECK(batch >= 1, "batch size must be >= 1");
  Tensor<float> xs(Shape{batch, 3, crop_size_, crop_size_});
  Tensor<float> ys(Shape{batch, 3, crop_size_, crop_size_});
  const int64_t n = static_cast<int64_t>(3) * crop_size_ * crop_size_;
  for (int b = 0; b < batch; ++b) {
    auto [x, y] = next_pair();
    std::copy(x.data(), x.data() + n, xs.data() + b * n);
    std::copy(y.data(), y.data() + n, ys.data() + b * n);
  }
  return {std::move(xs), std::move(ys)};
}

std::string UnpairedDataset::serialize_state() const {
  std::ostringstream oss;
  oss << order_rng_.serialize() << "\n"
      << crop_rng_.serialize() << "\n"
      << flip_rng_.serialize() << "\n"
      << ypick_rng_.serialize() << "\n"
      << x_pos_;
  for (int i : x_order_) oss << " " << i;
  return oss.str();
}

void UnpairedDataset::restore_state(const std::string& state) {
  std::istringstream iss(state);
  std::string line;
  std::getline(iss, line);
  order_rng_.restore(line);
  std::getline(iss, line);
  crop_rng_.restore(line);
  std::getline(iss, line);
  flip_rng_.restore(line);
  std::getline(iss, line);
  ypick_rng_.restore(line);
  iss >> x_pos_;
  x_order_.assign(static_cast<size_t>(x_.count()), 0);
  for (int& i : x_order_) iss >> i;
}

}  // namespace sndcr
