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

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sndcr/nn.hpp"

namespace sndcr {

// ---------------------------------------------------------------------------
// Spectral normalization
// ---------------------------------------------------------------------------

template <typename T>
struct SpectralNormState {
  Tensor<T> u;  // unit vector, length = rows of the flattened weight
  int n_power_iterations = 1;
};

namespace detail {

// One power-iteration round on a [rows, cols] matrix held in `w`:
// v = normalize(W^T u), u' = normalize(W v). Returns sigma = u'^T W v.
template <typename T>
T power_iterate(const T* w, int rows, int cols, std::vector<T>& u,
                std::vector<T>& v) {
  using EVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  v.resize(static_cast<size_t>(cols));
  // w row-major [rows, cols] viewed col-major is W^T.
  ECMap<T> w_tr(w, cols, rows);
  Eigen::Map<EVec> vm(v.data(), cols);
  Eigen::Map<EVec> um(u.data(), rows);
  vm.noalias() = w_tr * um;
  T vn = vm.norm();
  if (vn > T(0)) vm /= vn;
  EVec wu = w_tr.transpose() * vm;
  T sigma_pre = wu.norm();  // = u'^T W v once u' is the normalized W v
  um = sigma_pre > T(0) ? EVec(wu / sigma_pre) : wu;
  return sigma_pre;
}

}  // namespace detail

/// Power-iteration spectral normalization of a [rows, cols] matrix.
/// Returns W / sigma_hat and the state carrying the updated u.
template <typename T>
std::pair<Tensor<T>, SpectralNormState<T>> spectral_normalize(
    const Tensor<T>& w, SpectralNormState<T> state) {
  SNDCR_CHECK_SHAPE(w.rank() == 2, "spectral_normalize: rank-2 matrix expected");
  SNDCR_CHECK(w.all_finite(), "spectral_normalize: non-finite weight");
  const int rows = w.dim(0), cols = w.dim(1);
  bool zero = true;
  for (int64_t i = 0; i < w.numel() && zero; ++i) zero = (w[i] == T(0));
  SNDCR_CHECK(!zero, "spectral_normalize: zero matrix has undefined sigma");
  SNDCR_CHECK(state.u.numel() == rows,
              "spectral_normalize: u has length " << state.u.numel()
                                                  << ", expected " << rows);
  std::vector<T> u(state.u.data(), state.u.data() + rows);
  std::vector<T> v;
  T sigma = 0;
  for (int it = 0; it < std::max(1, state.n_power_iterations); ++it)
    sigma = detail::power_iterate(w.data(), rows, cols, u, v);
  Tensor<T> what(w.shape());
  for (int64_t i = 0; i < w.numel(); ++i) what[i] = w[i] / sigma;
  SpectralNormState<T> next;
  next.u = Tensor<T>(Shape{rows}, std::move(u));
  next.n_power_iterations = state.n_power_iterations;
  return {std::move(what), std::move(next)};
}

/// Convolution whose weight is divided by the power-iteration estimate of
/// its largest singular value. In training mode each forward advances the
/// persisted u by n_power_iterations rounds (no gradient through the
/// update); in eval mode u is left untouched and v is recomputed inside the
/// graph so the normalized weight is a smooth function of the raw weight.
template <typename T>
struct SnConv2d {
  Parameter<T> weight;  // [Cout, Cin, k, k]
  Parameter<T> bias;    // [Cout]
  Tensor<T> u;          // persisted power-iteration vector, length Cout
  int n_power_iterations = 1;
  ConvOpts opts;
  // Optional per-step cache of the normalized-weight subgraph: the trainer
  // enables it and clears it once per optimization step, so the several
  // forwards of one step share one sigma estimate and one graph.
  bool cache_enabled = false;
  Var<T> cached_weight;
  bool cached_training = false;

  SnConv2d() = default;
  SnConv2d(const std::string& name, int cin, int cout, int k, ConvOpts o,
           RandomStream& rng)
      : opts(o) {
    // Semi-orthogonal rows: the spectrum starts flat, so the single
    // power-iteration estimate is exact from the first step.
    Tensor<T> w(Shape{cout, cin, k, k});
    init_orthogonal_rows(w, cout, rng);
    weight = {name + ".weight", Var<T>(std::move(w), true)};
    bias = {name + ".bias", Var<T>(Tensor<T>(Shape{cout}), true)};
    Tensor<T> u0(Shape{cout});
    for (int i = 0; i < cout; ++i) u0[i] = static_cast<T>(rng.gaussian());
    T n = 0;
    for (int i = 0; i < cout; ++i) n += u0[i] * u0[i];
    n = std::sqrt(n);
    for (int i = 0; i < cout; ++i) u0[i] /= n;
    u = std::move(u0);
  }

  int rows() const { return weight.var.value().dim(0); }
  int cols() const {
    return static_cast<int>(weight.var.value().numel() / rows());
  }

  Var<T> normalized_weight(bool training) {
    const int r = rows(), c = cols();
    Var<T> w_mat = reshape(weight.var, Shape{r, c});
    Var<T> sigma;
    if (training) {
      std::vector<T> uv(u.data(), u.data() + r), vv;
      for (int it = 0; it < n_power_iterations; ++it)
        detail::power_iterate(weight.var.value().data(), r, c, uv, vv);
      u = Tensor<T>(Shape{r}, uv);
      Var<T> u_const(u);
      Var<T> v_const(Tensor<T>(Shape{c}, std::move(vv)));
      sigma = dot(u_const, matvec(w_mat, v_const));
    } else {
      Var<T> u_const(u);
      Var<T> wt_u = matvec(transpose2d(w_mat), u_const);
      Var<T> v = reshape(l2_normalize_rows(reshape(wt_u, Shape{1, c})), Shape{c});
      sigma = dot(u_const, matvec(w_mat, v));
    }
    return reshape(div_by_scalar(w_mat, sigma), weight.var.value().shape());
  }

  Var<T> forward(const Var<T>& x, bool training) {
    if (!cache_enabled) return conv2d(x, normalized_weight(training), bias.var, opts);
    warm_cache(training);
    return conv2d(x, cached_weight, bias.var, opts);
  }
  /// Pre-builds the cached subgraph; call before concurrent forwards.
  void warm_cache(bool training) {
    if (!cached_weight.defined() || cached_training != training) {
      cached_weight = normalized_weight(training);
      cached_training = training;
    }
  }
  void clear_weight_cache() { cached_weight = Var<T>(); }
  void collect(ParamRefs<T>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

/// Residual block: x + IN(SNConv(ReLU(IN(SNConv(x))))), stride 1, kernel 3,
/// reflection padding, spatial dims preserved.
template <typename T>
struct SnResBlock {
  SnConv2d<T> conv1, conv2;
  InstanceNorm2d<T> norm1, norm2;

  SnResBlock() = default;
  SnResBlock(const std::string& name, int channels, RandomStream& rng)
      : conv1(name + ".conv1", channels, channels, 3,
              ConvOpts{1, 1, PadMode::kReflect}, rng),
        conv2(name + ".conv2", channels, channels, 3,
              ConvOpts{1, 1, PadMode::kReflect}, rng),
        norm1(name + ".norm1", channels),
        norm2(name + ".norm2", channels) {}

  Var<T> forward(const Var<T>& x, bool training) {
    Var<T> h = relu(norm1.forward(conv1.forward(x, training)));
    h = norm2.forward(conv2.forward(h, training));
    return add(x, h);
  }
  void collect(ParamRefs<T>& out) {
    conv1.collect(out);
    norm1.collect(out);
    conv2.collect(out);
    norm2.collect(out);
  }
};

// ---------------------------------------------------------------------------
// Frequency channel attention
// ---------------------------------------------------------------------------

struct FcaConfig {
  int channel_groups = 16;
  int reduction_ratio = 16;
  std::vector<std::pair<int, int>> dct_frequencies;  // (u, v) per group
};

/// First `count` (u, v) index pairs of an H x W grid in JPEG zigzag order,
/// i.e. the lowest-frequency 2-D DCT bases first.
inline std::vector<std::pair<int, int>> zigzag_frequencies(int h, int w,
                                                           int count) {
  SNDCR_CHECK(count <= h * w, "zigzag_frequencies: grid " << h << "x" << w
                                  << " has fewer than " << count << " entries");
  std::vector<std::pair<int, int>> out;
  for (int d = 0; d < h + w - 1 && static_cast<int>(out.size()) < count; ++d) {
    if (d % 2 == 0) {
      for (int u = std::min(d, h - 1); u >= 0 && d - u < w; --u) {
        out.emplace_back(u, d - u);
        if (static_cast<int>(out.size()) == count) break;
      }
    } else {
      for (int v = std::min(d, w - 1); v >= 0 && d - v < h; --v) {
        out.emplace_back(d - v, v);
        if (static_cast<int>(out.size()) == count) break;
      }
    }
  }
  return out;
}

/// 2-D DCT basis value cos(pi (2h+1) u / 2H) * cos(pi (2w+1) v / 2W).
/// Unnormalized, so the (0, 0) basis is the all-ones plane and the pooled
/// value for it equals H*W times the spatial average.
template <typename T>
Tensor<T> make_dct_bases(int channels, int h, int w,
                         const std::vector<std::pair<int, int>>& freqs) {
  const int groups = static_cast<int>(freqs.size());
  SNDCR_CHECK(groups > 0 && channels % groups == 0,
              "make_dct_bases: " << channels << " channels not divisible into "
                                 << groups << " groups");
  for (auto [u, v] : freqs)
    SNDCR_CHECK(u >= 0 && u < h && v >= 0 && v < w,
                "make_dct_bases: frequency (" << u << ", " << v
                    << ") outside [0, " << h << ") x [0, " << w << ")");
  const int per_group = channels / groups;
  Tensor<T> bases(Shape{channels, h, w});
  const double pi = 3.14159265358979323846;
  for (int g = 0; g < groups; ++g) {
    auto [u, v] = freqs[static_cast<size_t>(g)];
    for (int c = g * per_group; c < (g + 1) * per_group; ++c)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          bases[(static_cast<int64_t>(c) * h + i) * w + j] = static_cast<T>(
              std::cos(pi * (2 * i + 1) * u / (2.0 * h)) *
              std::cos(pi * (2 * j + 1) * v / (2.0 * w)));
  }
  return bases;
}

/// Frequency channel attention: channels are pooled against fixed 2-D DCT
/// bases (one frequency per channel group), squeezed through a two-layer
/// bottleneck MLP and mapped to per-channel sigmoid gates.
template <typename T>
struct FcaLayer {
  FcaConfig cfg;
  int channels = 0, height = 0, width = 0;
  Tensor<T> bases;  // [C, H, W]
  Linear<T> fc1, fc2;

  FcaLayer() = default;
  FcaLayer(const std::string& name, int c, int h, int w, FcaConfig config,
           RandomStream& rng)
      : cfg(std::move(config)), channels(c), height(h), width(w) {
    if (cfg.dct_frequencies.empty())
      cfg.dct_frequencies = zigzag_frequencies(h, w, cfg.channel_groups);
    SNDCR_CHECK(static_cast<int>(cfg.dct_frequencies.size()) ==
                    cfg.channel_groups,
                "FcaLayer: one frequency per channel group expected");
    bases = make_dct_bases<T>(c, h, w, cfg.dct_frequencies);
    const int hidden = std::max(1, c / cfg.reduction_ratio);
    fc1 = Linear<T>(name + ".fc1", c, hidden, rng);
    fc2 = Linear<T>(name + ".fc2", hidden, c, rng);
  }

  Var<T> forward(const Var<T>& x) const {
    SNDCR_CHECK_SHAPE(x.value().dim(2) == height && x.value().dim(3) == width,
                      "FcaLayer built for " << height << "x" << width
                          << ", got input " << shape_str(x.shape()));
    Var<T> z = basis_pool(x, bases);            // [B, C]
    Var<T> a = relu(fc1.forward(z));            // [B, C/r]
    Var<T> s = sigmoid(fc2.forward(a));         // [B, C]
    return channel_scale(x, s);
  }
  void collect(ParamRefs<T>& out) {
    fc1.collect(out);
    fc2.collect(out);
  }
};

}  // namespace sndcr
