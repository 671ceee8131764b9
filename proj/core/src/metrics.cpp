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

#include "sndcr/metrics.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "sndcr/features.hpp"

namespace sndcr {

namespace {

Eigen::MatrixXd to_eigen(const Tensor<double>& t) {
  Eigen::MatrixXd m(t.dim(0), t.dim(1));
  for (int i = 0; i < t.dim(0); ++i)
    for (int j = 0; j < t.dim(1); ++j) m(i, j) = t.at2(i, j);
  return m;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double fid(const Tensor<double>& feats_a, const Tensor<double>& feats_b) {
  SNDCR_CHECK_SHAPE(feats_a.rank() == 2 && feats_b.rank() == 2,
                    "fid: [N, D] feature matrices expected");
  SNDCR_CHECK_SHAPE(feats_a.dim(1) == feats_b.dim(1),
                    "fid: feature dims differ, " << feats_a.dim(1) << " vs "
                                                 << feats_b.dim(1));
  const int n = feats_a.dim(0), m = feats_b.dim(0), d = feats_a.dim(1);
  SNDCR_CHECK(n >= 2 && m >= 2, "fid: need at least 2 samples per set");

  Eigen::MatrixXd a = to_eigen(feats_a), b = to_eigen(feats_b);
  Eigen::VectorXd mu_a = a.colwise().mean(), mu_b = b.colwise().mean();
  Eigen::MatrixXd ca = a.rowwise() - mu_a.transpose();
  Eigen::MatrixXd cb = b.rowwise() - mu_b.transpose();
  Eigen::MatrixXd cov_a = ca.transpose() * ca / (n - 1);
  Eigen::MatrixXd cov_b = cb.transpose() * cb / (m - 1);

  // tr((Sa Sb)^{1/2}) = tr((Sa^{1/2} Sb Sa^{1/2})^{1/2}), symmetric form.
  Eigen::MatrixXd sa_half = psd_sqrt(cov_a);
  Eigen::MatrixXd inner = sa_half * cov_b * sa_half;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner);
  double tr_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  double mean_term = (mu_a - mu_b).squaredNorm();
  double value = mean_term + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
  (void)d;
  return value;
}

double wasserstein1_sorted(const std::vector<double>& a,
                           const std::vector<double>& b) {
  SNDCR_CHECK(!a.empty() && !b.empty(), "wasserstein1: empty sample set");
  const size_t n = a.size(), m = b.size();
  if (n == m) {
    double s = 0;
    for (size_t i = 0; i < n; ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(n);
  }
  // Integrate |F_a^{-1}(q) - F_b^{-1}(q)| over q in (0, 1): piecewise
  // constant between the merged quantile breakpoints i/n and j/m.
  double w = 0, pos = 0;
  size_t i = 0, j = 0;
  while (i < n && j < m) {
    double next_a = static_cast<double>(i + 1) / static_cast<double>(n);
    double next_b = static_cast<double>(j + 1) / static_cast<double>(m);
    double q = std::min(next_a, next_b);
    w += (q - pos) * std::abs(a[i] - b[j]);
    pos = q;
    if (next_a <= q) ++i;
    if (next_b <= q) ++j;
  }
  return w;
}

double sliced_w1(const Tensor<double>& a, const Tensor<double>& b,
                 int n_projections, RandomStream& rng) {
  SNDCR_CHECK_SHAPE(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1),
                    "sliced_w1: [N, D] matrices with equal D expected");
  SNDCR_CHECK(a.dim(0) >= 1 && b.dim(0) >= 1 && n_projections >= 1,
              "sliced_w1: empty inputs");
  const int d = a.dim(1);
  double total = 0;
  std::vector<double> pa(static_cast<size_t>(a.dim(0)));
  std::vector<double> pb(static_cast<size_t>(b.dim(0)));
  for (int p = 0; p < n_projections; ++p) {
    std::vector<double> dir(static_cast<size_t>(d));
    double norm = 0;
    for (int k = 0; k < d; ++k) {
      dir[static_cast<size_t>(k)] = rng.gaussian();
      norm += dir[static_cast<size_t>(k)] * dir[static_cast<size_t>(k)];
    }
    norm = std::sqrt(norm);
    if (norm == 0) {
      dir[0] = 1.0;
      norm = 1.0;
    }
    for (int k = 0; k < d; ++k) dir[static_cast<size_t>(k)] /= norm;
    for (int i = 0; i < a.dim(0); ++i) {
      double s = 0;
      for (int k = 0; k < d; ++k) s += a.at2(i, k) * dir[static_cast<size_t>(k)];
      pa[static_cast<size_t>(i)] = s;
    }
    for (int i = 0; i < b.dim(0); ++i) {
      double s = 0;
      for (int k = 0; k < d; ++k) s += b.at2(i, k) * dir[static_cast<size_t>(k)];
      pb[static_cast<size_t>(i)] = s;
    }
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    total += wasserstein1_sorted(pa, pb);
  }
  return total / n_projections;
}

// ---------------------------------------------------------------------------
// Laplacian pyramid descriptors
// ---------------------------------------------------------------------------

namespace {

// Separable [1 4 6 4 1]/16 blur with reflect-101 borders.
Tensor<float> gauss5(const Tensor<float>& img) {
  static const float k[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
  const int c = img.dim(1), h = img.dim(2), w = img.dim(3);
  auto refl = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * n - 2 - i;
    return i;
  };
  Tensor<float> tmp(img.shape()), out(img.shape());
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float s = 0;
        for (int t = -2; t <= 2; ++t)
          s += k[t + 2] * img.at4(0, ci, y, refl(x + t, w));
        tmp.at4(0, ci, y, x) = s;
      }
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float s = 0;
        for (int t = -2; t <= 2; ++t)
          s += k[t + 2] * tmp.at4(0, ci, refl(y + t, h), x);
        out.at4(0, ci, y, x) = s;
      }
  return out;
}

Tensor<float> down2(const Tensor<float>& img) {
  const int c = img.dim(1), h = img.dim(2) / 2, w = img.dim(3) / 2;
  Tensor<float> out(Shape{1, c, h, w});
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at4(0, ci, y, x) = img.at4(0, ci, 2 * y, 2 * x);
  return out;
}

Tensor<float> up2(const Tensor<float>& img) {
  const int c = img.dim(1), h = img.dim(2) * 2, w = img.dim(3) * 2;
  Tensor<float> zeros(Shape{1, c, h, w});
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < img.dim(2); ++y)
      for (int x = 0; x < img.dim(3); ++x)
        zeros.at4(0, ci, 2 * y, 2 * x) = img.at4(0, ci, y, x);
  Tensor<float> blurred = gauss5(zeros);
  for (int64_t i = 0; i < blurred.numel(); ++i) blurred[i] *= 4.0f;
  return blurred;
}

}  // namespace

Tensor<float> laplacian_level(const Tensor<float>& img, int level) {
  SNDCR_CHECK_SHAPE(img.rank() == 4 && img.dim(0) == 1,
                    "laplacian_level: [1, C, H, W] expected");
  Tensor<float> g = img;
  for (int l = 0; l < level; ++l) {
    SNDCR_CHECK_SHAPE(g.dim(2) % 2 == 0 && g.dim(3) % 2 == 0,
                      "laplacian_level: image too small for level " << level);
    g = down2(gauss5(g));
  }
  SNDCR_CHECK_SHAPE(g.dim(2) % 2 == 0 && g.dim(3) % 2 == 0 && g.dim(2) >= 14,
                    "laplacian_level: level " << level
                        << " leaves too little resolution");
  Tensor<float> next = down2(gauss5(g));
  Tensor<float> up = up2(next);
  Tensor<float> lap(g.shape());
  for (int64_t i = 0; i < g.numel(); ++i) lap[i] = g[i] - up[i];
  return lap;
}

namespace {

void sample_descriptors(const std::vector<Tensor<float>>& imgs, int level,
                        int per_image, RandomStream rng, Tensor<double>* out) {
  const int patch = 7, half = 3;
  std::vector<std::vector<double>> rows;
  for (const Tensor<float>& img : imgs) {
    Tensor<float> lap = laplacian_level(img, level);
    const int c = lap.dim(1), h = lap.dim(2), w = lap.dim(3);
    SNDCR_CHECK(h >= patch && w >= patch,
                "swd: pyramid level leaves less than a 7x7 window");
    for (int p = 0; p < per_image; ++p) {
      int cy = rng.uniform_int(half, h - half - 1);
      int cx = rng.uniform_int(half, w - half - 1);
      std::vector<double> desc;
      desc.reserve(static_cast<size_t>(c) * patch * patch);
      for (int ci = 0; ci < c; ++ci)
        for (int dy = -half; dy <= half; ++dy)
          for (int dx = -half; dx <= half; ++dx)
            desc.push_back(lap.at4(0, ci, cy + dy, cx + dx));
      rows.push_back(std::move(desc));
    }
  }
  const int n = static_cast<int>(rows.size());
  const int d = static_cast<int>(rows[0].size());
  *out = Tensor<double>(Shape{n, d});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      out->at2(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
}

}  // namespace

double swd(const std::vector<Tensor<float>>& imgs_a,
           const std::vector<Tensor<float>>& imgs_b, const SwdOptions& opts) {
  SNDCR_CHECK(imgs_a.size() >= 1 && imgs_b.size() >= 1,
              "swd: empty image set");
  SNDCR_CHECK(static_cast<int64_t>(imgs_a.size()) * opts.patches_per_image >= 2 &&
                  static_cast<int64_t>(imgs_b.size()) * opts.patches_per_image >= 2,
              "swd: need at least 2 descriptors per set");
  Tensor<double> da, db;
  // Both sets share the position stream so identical inputs give zero.
  sample_descriptors(imgs_a, opts.pyramid_level, opts.patches_per_image,
                     RandomStream(derive_seed(opts.seed, "swd.pos")), &da);
  sample_descriptors(imgs_b, opts.pyramid_level, opts.patches_per_image,
                     RandomStream(derive_seed(opts.seed, "swd.pos")), &db);
  RandomStream proj_rng(derive_seed(opts.seed, "swd.proj"));
  return sliced_w1(da, db, opts.n_projections, proj_rng);
}

// ---------------------------------------------------------------------------
// SSIM
// ---------------------------------------------------------------------------

double ssim(const Tensor<float>& a, const Tensor<float>& b) {
  SNDCR_CHECK_SHAPE(a.rank() == 4 && a.shape() == b.shape(),
                    "ssim: equal-shape [B, C, H, W] inputs expected");
  const int bs = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
  SNDCR_CHECK_SHAPE(h >= 11 && w >= 11, "ssim: spatial dims must be >= 11");

  // 11x11 Gaussian window, sigma 1.5, normalized.
  double win[11][11];
  double wsum = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      double dy = i - 5, dx = j - 5;
      win[i][j] = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
      wsum += win[i][j];
    }
  for (auto& row : win)
    for (double& v : row) v /= wsum;

  const double L = 2.0;  // dynamic range of [-1, 1]
  const double c1 = (0.01 * L) * (0.01 * L);
  const double c2 = (0.03 * L) * (0.03 * L);

  double total = 0;
  int64_t count = 0;
  for (int bi = 0; bi < bs; ++bi)
    for (int ci = 0; ci < c; ++ci)
      for (int y = 0; y + 11 <= h; ++y)
        for (int x = 0; x + 11 <= w; ++x) {
          double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
          for (int i = 0; i < 11; ++i)
            for (int j = 0; j < 11; ++j) {
              double va = a.at4(bi, ci, y + i, x + j);
              double vb = b.at4(bi, ci, y + i, x + j);
              double wt = win[i][j];
              mu_a += wt * va;
              mu_b += wt * vb;
              aa += wt * va * va;
              bb += wt * vb * vb;
              ab += wt * va * vb;
            }
          double var_a = aa - mu_a * mu_a;
          double var_b = bb - mu_b * mu_b;
          double cov = ab - mu_a * mu_b;
          double v = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                     ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
          total += v;
          ++count;
        }
  return total / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// FID feature extractor
// ---------------------------------------------------------------------------

struct FidExtractor::Impl {
  explicit Impl(uint64_t seed) : vgg(seed), tag("vgg16-seeded-random") {}
  explicit Impl(const std::string& path)
      : vgg(path), tag("vgg16-file:" + path) {}
  VggExtractor<float> vgg;
  std::string tag;
};

FidExtractor::FidExtractor(uint64_t seed) : impl_(new Impl(seed)) {}
FidExtractor::FidExtractor(const std::string& weights_path)
    : impl_(new Impl(weights_path)) {}
FidExtractor::~FidExtractor() = default;
FidExtractor::FidExtractor(FidExtractor&&) noexcept = default;

std::string FidExtractor::id() const { return impl_->tag; }

Tensor<double> FidExtractor::features(
    const std::vector<Tensor<float>>& images) const {
  SNDCR_CHECK(!images.empty(), "fid features: empty image set");
  const int n = static_cast<int>(images.size());
  Tensor<double> out(Shape{n, 512});
  for (int i = 0; i < n; ++i) {
    VggTaps<float> taps = impl_->vgg.extract(Var<float>(images[static_cast<size_t>(i)]));
    const Tensor<float>& deep = taps.taps.at(13).value();
    const int64_t hw = static_cast<int64_t>(deep.dim(2)) * deep.dim(3);
    for (int ci = 0; ci < 512; ++ci) {
      const float* p = &deep.at4(0, ci, 0, 0);
      double s = 0;
      for (int64_t k = 0; k < hw; ++k) s += p[k];
      out.at2(i, ci) = s / static_cast<double>(hw);
    }
    // Unit-normalize each feature vector: the random-weight stack's
    // magnitudes vary wildly with the seed, and FID's eigendecomposition
    // noise scales with the squared feature magnitude.
    double norm = 0;
    for (int ci = 0; ci < 512; ++ci) norm += out.at2(i, ci) * out.at2(i, ci);
    norm = std::sqrt(std::max(norm, 1e-30));
    for (int ci = 0; ci < 512; ++ci) out.at2(i, ci) /= norm;
  }
  return out;
}

}  // namespace sndcr
