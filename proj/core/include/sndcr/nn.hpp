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

#include <Eigen/QR>

#include <string>
#include <utility>
#include <vector>

#include "sndcr/conv.hpp"
#include "sndcr/ops.hpp"
#include "sndcr/rng.hpp"

namespace sndcr {

template <typename T>
struct Parameter {
  std::string name;
  Var<T> var;
};

template <typename T>
using ParamRefs = std::vector<Parameter<T>*>;

template <typename T>
void set_requires_grad(const ParamRefs<T>& params, bool v) {
  for (auto* p : params) p->var.set_requires_grad(v);
}

template <typename T>
void zero_grads(const ParamRefs<T>& params) {
  for (auto* p : params) p->var.zero_grad();
}

// ---------------------------------------------------------------------------
// Initializers
// ---------------------------------------------------------------------------

template <typename T>
void init_normal(Tensor<T>& t, RandomStream& rng, double stddev) {
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<T>(rng.gaussian(0.0, stddev));
}

/// Fills a tensor viewed as [rows, numel/rows] with a scaled semi-orthogonal
/// matrix (rows orthonormal times gain). Requires rows <= cols.
template <typename T>
void init_orthogonal_rows(Tensor<T>& t, int rows, RandomStream& rng,
                          double gain = 1.0) {
  const int64_t cols64 = t.numel() / rows;
  SNDCR_CHECK(rows * cols64 == t.numel() && rows <= cols64,
              "init_orthogonal_rows: cannot make " << rows << " orthonormal rows"
                  << " of length " << cols64);
  const int cols = static_cast<int>(cols64);
  Eigen::MatrixXd g(cols, rows);
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < cols; ++i) g(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(cols, rows);
  Eigen::MatrixXd r = qr.matrixQR().topRows(rows).template triangularView<Eigen::Upper>();
  for (int j = 0; j < rows; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;  // deterministic sign convention
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      t[static_cast<int64_t>(i) * cols + j] = static_cast<T>(gain * q(j, i));
}

template <typename T>
void init_he_normal(Tensor<T>& t, int fan_in, RandomStream& rng) {
  init_normal(t, rng, std::sqrt(2.0 / fan_in));
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

template <typename T>
struct Linear {
  Parameter<T> weight;  // [in, out]
  Parameter<T> bias;    // [out]

  Linear() = default;
  Linear(const std::string& name, int in, int out, RandomStream& rng,
         double init_std = 0.02) {
    Tensor<T> w(Shape{in, out});
    init_normal(w, rng, init_std);
    weight = {name + ".weight", Var<T>(std::move(w), true)};
    bias = {name + ".bias", Var<T>(Tensor<T>(Shape{out}), true)};
  }

  Var<T> forward(const Var<T>& x) const {
    return add_rowvec(matmul(x, weight.var), bias.var);
  }
  void collect(ParamRefs<T>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

template <typename T>
struct Conv2dLayer {
  Parameter<T> weight;  // [Cout, Cin, k, k]
  Parameter<T> bias;    // [Cout]
  ConvOpts opts;

  Conv2dLayer() = default;
  Conv2dLayer(const std::string& name, int cin, int cout, int k, ConvOpts o,
              RandomStream& rng, double init_std = 0.02)
      : opts(o) {
    Tensor<T> w(Shape{cout, cin, k, k});
    init_normal(w, rng, init_std);
    weight = {name + ".weight", Var<T>(std::move(w), true)};
    bias = {name + ".bias", Var<T>(Tensor<T>(Shape{cout}), true)};
  }

  Var<T> forward(const Var<T>& x) const {
    return conv2d(x, weight.var, bias.var, opts);
  }
  void collect(ParamRefs<T>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

template <typename T>
struct ConvTranspose2dLayer {
  Parameter<T> weight;  // [Cin, Cout, k, k]
  Parameter<T> bias;    // [Cout]
  int stride = 2, pad = 1, out_pad = 1;

  ConvTranspose2dLayer() = default;
  ConvTranspose2dLayer(const std::string& name, int cin, int cout, int k,
                       int stride_, int pad_, int out_pad_, RandomStream& rng,
                       double init_std = 0.02)
      : stride(stride_), pad(pad_), out_pad(out_pad_) {
    Tensor<T> w(Shape{cin, cout, k, k});
    init_normal(w, rng, init_std);
    weight = {name + ".weight", Var<T>(std::move(w), true)};
    bias = {name + ".bias", Var<T>(Tensor<T>(Shape{cout}), true)};
  }

  Var<T> forward(const Var<T>& x) const {
    return conv_transpose2d(x, weight.var, bias.var, stride, pad, out_pad);
  }
  void collect(ParamRefs<T>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

template <typename T>
struct InstanceNorm2d {
  Parameter<T> gamma;  // [C]
  Parameter<T> beta;   // [C]
  T eps = T(1e-5);

  InstanceNorm2d() = default;
  InstanceNorm2d(const std::string& name, int c) {
    gamma = {name + ".gamma", Var<T>(Tensor<T>::full(Shape{c}, T(1)), true)};
    beta = {name + ".beta", Var<T>(Tensor<T>(Shape{c}), true)};
  }

  Var<T> forward(const Var<T>& x) const {
    return instance_norm(x, gamma.var, beta.var, eps);
  }
  void collect(ParamRefs<T>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

}  // namespace sndcr
