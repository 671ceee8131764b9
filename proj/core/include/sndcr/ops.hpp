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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sndcr/autodiff.hpp"
#include "sndcr/tensor.hpp"

namespace sndcr {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
template <typename T>
using EMap = Eigen::Map<EMat<T>>;
template <typename T>
using ECMap = Eigen::Map<const EMat<T>>;

// A row-major [R, C] tensor viewed as a col-major Eigen matrix is its
// transpose; every GEMM below works on these transposed views so no data
// is ever copied.
template <typename T>
ECMap<T> as_tr(const Tensor<T>& t, int rows, int cols) {
  return ECMap<T>(t.data(), cols, rows);
}
template <typename T>
EMap<T> as_tr_mut(Tensor<T>& t, int rows, int cols) {
  return EMap<T>(t.data(), cols, rows);
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  SNDCR_CHECK_SHAPE(a.value().same_shape(b.value()),
                    "add: shape mismatch " << shape_str(a.shape()) << " vs "
                                           << shape_str(b.shape()));
  Tensor<T> out = Tensor<T>::uninitialized(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  auto an = a.node(), bn = b.node();
  return Var<T>::make_op(std::move(out), {a, b}, [an, bn](Node<T>& self) {
    if (an->requires_grad) an->add_grad(self.grad);
    if (bn->requires_grad) bn->add_grad(self.grad);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  SNDCR_CHECK_SHAPE(a.value().same_shape(b.value()),
                    "sub: shape mismatch " << shape_str(a.shape()) << " vs "
                                           << shape_str(b.shape()));
  Tensor<T> out = Tensor<T>::uninitialized(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] - b.value()[i];
  auto an = a.node(), bn = b.node();
  return Var<T>::make_op(std::move(out), {a, b}, [an, bn](Node<T>& self) {
    if (an->requires_grad) an->add_grad(self.grad);
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int64_t i = 0; i < self.grad.numel(); ++i)
        bn->grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  SNDCR_CHECK_SHAPE(a.value().same_shape(b.value()),
                    "mul: shape mismatch " << shape_str(a.shape()) << " vs "
                                           << shape_str(b.shape()));
  Tensor<T> out = Tensor<T>::uninitialized(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  auto an = a.node(), bn = b.node();
  return Var<T>::make_op(std::move(out), {a, b}, [an, bn](Node<T>& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (int64_t i = 0; i < self.grad.numel(); ++i)
        an->grad[i] += self.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int64_t i = 0; i < self.grad.numel(); ++i)
        bn->grad[i] += self.grad[i] * an->value[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T c) {
  Tensor<T> out = Tensor<T>::uninitialized(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * c;
  auto an = a.node();
  return Var<T>::make_op(std::move(out), {a}, [an, c](Node<T>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int64_t i = 0; i < self.grad.numel(); ++i)
      an->grad[i] += self.grad[i] * c;
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T c) {
  Tensor<T> out = Tensor<T>::uninitialized(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + c;
  auto an = a.node();
  return Var<T>::make_op(std::move(out), {a}, [an](Node<T>& self) {
    if (an->requires_grad) an->add_grad(self.grad);
  });
}

template <typename T>
Var<T> square(const Var<T>& a) {
  return mul(a, a);
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <typename T>
Var<T> relu(const Var<T>& a) {
  Tensor<T> out = Tensor<T>::uninitialized(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i)
    out[i] = a.value()[i] > T(0) ? a.value()[i] : T(0);
  auto an = a.node();
  return Var<T>::make_op(std::move(out), {a}, [an](Node<T>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    const T* v = an->value.data();
    const T* g = self.grad.data();
    T* dst = an->grad.data();
    const int64_t n = self.grad.numel();
    for (int64_t i = 0; i < n; ++i)
      dst[i] += g[i] * static_cast<T>(v[i] > T(0));
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
  Tensor<T> out = Tensor<T>::uninitialized(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i)
    out[i] = a.value()[i] > T(0) ? a.value()[i] : slope * a.value()[i];
  auto an = a.node();
  return Var<T>::make_op(std::move(out), {a}, [an, slope](Node<T>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    const T* v = an->value.data();
    const T* g = self.grad.data();
    T* dst = an->grad.data();
    const int64_t n = self.grad.numel();
    for (int64_t i = 0; i < n; ++i)
      dst[i] += g[i] * (slope + (T(1) - slope) * static_cast<T>(v[i] > T(0)));
  });
}

template <typename T>
Var<T> tanh_op(const Var<T>& a) {
  Tensor<T> out = Tensor<T>::uninitialized(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i)
    out[i] = std::tanh(a.value()[i]);
  auto an = a.node();
  return Var<T>::make_op(std::move(out), {a}, [an](Node<T>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int64_t i = 0; i < self.grad.numel(); ++i)
      an->grad[i] += self.grad[i] * (T(1) - self.value[i] * self.value[i]);
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> out = Tensor<T>::uninitialized(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) {
    T x = a.value()[i];
    out[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                       : std::exp(x) / (T(1) + std::exp(x));
  }
  auto an = a.node();
  return Var<T>::make_op(std::move(out), {a}, [an](Node<T>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int64_t i = 0; i < self.grad.numel(); ++i)
      an->grad[i] += self.grad[i] * self.value[i] * (T(1) - self.value[i]);
  });
}

// softplus(x) = log(1 + e^x), evaluated without overflow.
template <typename T>
Var<T> softplus(const Var<T>& a) {
  Tensor<T> out = Tensor<T>::uninitialized(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) {
    T x = a.value()[i];
    out[i] = x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  }
  auto an = a.node();
  return Var<T>::make_op(std::move(out), {a}, [an](Node<T>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int64_t i = 0; i < self.grad.numel(); ++i) {
      T x = an->value[i];
      T sig = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                        : std::exp(x) / (T(1) + std::exp(x));
      an->grad[i] += self.grad[i] * sig;
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions and norms
// ---------------------------------------------------------------------------

template <typename T>
Var<T> sum_all(const Var<T>& a) {
  T s = 0;
  for (int64_t i = 0; i < a.value().numel(); ++i) s += a.value()[i];
  auto an = a.node();
  return Var<T>::make_op(Tensor<T>::scalar(s), {a}, [an](Node<T>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    T g = self.grad[0];
    for (int64_t i = 0; i < an->grad.numel(); ++i) an->grad[i] += g;
  });
}

template <typename T>
Var<T> mean_all(const Var<T>& a) {
  return scale(sum_all(a), T(1) / static_cast<T>(a.value().numel()));
}

/// Sum of absolute elementwise differences (the L1 distance used by the
/// semantic loss; a sum over all elements, not a mean).
template <typename T>
Var<T> l1_distance(const Var<T>& a, const Var<T>& b) {
  SNDCR_CHECK_SHAPE(a.value().same_shape(b.value()),
                    "l1_distance: shape mismatch " << shape_str(a.shape())
                                                   << " vs "
                                                   << shape_str(b.shape()));
  T s = 0;
  for (int64_t i = 0; i < a.value().numel(); ++i)
    s += std::abs(a.value()[i] - b.value()[i]);
  auto an = a.node(), bn = b.node();
  return Var<T>::make_op(Tensor<T>::scalar(s), {a, b}, [an, bn](Node<T>& self) {
    T g = self.grad[0];
    for (int64_t i = 0; i < an->value.numel(); ++i) {
      T d = an->value[i] - bn->value[i];
      T sgn = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
      if (an->requires_grad) {
        an->ensure_grad();
        an->grad[i] += g * sgn;
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        bn->grad[i] -= g * sgn;
      }
    }
  });
}

/// Frobenius distance sqrt(sum((a-b)^2)). Gradient is defined as 0 at the
/// exact tie a == b.
template <typename T>
Var<T> frobenius_distance(const Var<T>& a, const Var<T>& b) {
  SNDCR_CHECK_SHAPE(a.value().same_shape(b.value()),
                    "frobenius_distance: shape mismatch "
                        << shape_str(a.shape()) << " vs "
                        << shape_str(b.shape()));
  T s = 0;
  for (int64_t i = 0; i < a.value().numel(); ++i) {
    T d = a.value()[i] - b.value()[i];
    s += d * d;
  }
  T dist = std::sqrt(s);
  auto an = a.node(), bn = b.node();
  return Var<T>::make_op(Tensor<T>::scalar(dist), {a, b},
                         [an, bn](Node<T>& self) {
    T d = self.value[0];
    if (d == T(0)) return;
    T g = self.grad[0] / d;
    for (int64_t i = 0; i < an->value.numel(); ++i) {
      T diff = an->value[i] - bn->value[i];
      if (an->requires_grad) {
        an->ensure_grad();
        an->grad[i] += g * diff;
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        bn->grad[i] -= g * diff;
      }
    }
  });
}

template <typename T>
Var<T> divide(const Var<T>& a, const Var<T>& b) {
  SNDCR_CHECK(a.value().numel() == 1 && b.value().numel() == 1,
              "divide: scalar operands expected");
  T bv = b.value()[0];
  auto an = a.node(), bn = b.node();
  return Var<T>::make_op(Tensor<T>::scalar(a.value()[0] / bv), {a, b},
                         [an, bn](Node<T>& self) {
    T g = self.grad[0];
    T av = an->value[0], bv2 = bn->value[0];
    if (an->requires_grad) {
      an->ensure_grad();
      an->grad[0] += g / bv2;
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      bn->grad[0] -= g * av / (bv2 * bv2);
    }
  });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

/// [M, K] x [K, N] -> [M, N]
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  SNDCR_CHECK_SHAPE(a.value().rank() == 2 && b.value().rank() == 2 &&
                        a.value().dim(1) == b.value().dim(0),
                    "matmul: incompatible shapes " << shape_str(a.shape())
                                                   << " x "
                                                   << shape_str(b.shape()));
  const int m = a.value().dim(0), k = a.value().dim(1), n = b.value().dim(1);
  Tensor<T> out = Tensor<T>::uninitialized(Shape{m, n});
  // out^T = b^T * a^T on the transposed views.
  as_tr_mut(out, m, n).noalias() = as_tr(b.value(), k, n) * as_tr(a.value(), m, k);
  auto an = a.node(), bn = b.node();
  return Var<T>::make_op(std::move(out), {a, b},
                         [an, bn, m, k, n](Node<T>& self) {
    auto gT = as_tr(self.grad, m, n);  // = grad^T
    if (an->requires_grad) {
      an->ensure_grad();
      // dA = G * B^T  =>  dA^T = B * G^T
      as_tr_mut(an->grad, m, k).noalias() +=
          as_tr(bn->value, k, n).transpose() * gT;
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      // dB = A^T * G  =>  dB^T = G^T * A
      as_tr_mut(bn->grad, k, n).noalias() +=
          gT * as_tr(an->value, m, k).transpose();
    }
  });
}

template <typename T>
Var<T> transpose2d(const Var<T>& a) {
  SNDCR_CHECK_SHAPE(a.value().rank() == 2, "transpose2d: rank-2 input expected");
  const int m = a.value().dim(0), n = a.value().dim(1);
  Tensor<T> out = Tensor<T>::uninitialized(Shape{n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at2(j, i) = a.value().at2(i, j);
  auto an = a.node();
  return Var<T>::make_op(std::move(out), {a}, [an, m, n](Node<T>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) an->grad.at2(i, j) += self.grad.at2(j, i);
  });
}

/// Dot product of two equal-length rank-1 tensors.
template <typename T>
Var<T> dot(const Var<T>& a, const Var<T>& b) {
  SNDCR_CHECK_SHAPE(a.value().rank() == 1 && a.value().same_shape(b.value()),
                    "dot: equal-length vectors expected");
  T s = 0;
  for (int64_t i = 0; i < a.value().numel(); ++i) s += a.value()[i] * b.value()[i];
  auto an = a.node(), bn = b.node();
  return Var<T>::make_op(Tensor<T>::scalar(s), {a, b}, [an, bn](Node<T>& self) {
    T g = self.grad[0];
    for (int64_t i = 0; i < an->value.numel(); ++i) {
      if (an->requires_grad) {
        an->ensure_grad();
        an->grad[i] += g * bn->value[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        bn->grad[i] += g * an->value[i];
      }
    }
  });
}

/// [R, C] x [C] -> [R]
template <typename T>
Var<T> matvec(const Var<T>& m, const Var<T>& v) {
  SNDCR_CHECK_SHAPE(m.value().rank() == 2 && v.value().rank() == 1 &&
                        m.value().dim(1) == v.value().dim(0),
                    "matvec: incompatible shapes " << shape_str(m.shape())
                                                   << " x "
                                                   << shape_str(v.shape()));
  const int r = m.value().dim(0), c = m.value().dim(1);
  using EVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  Tensor<T> out = Tensor<T>::uninitialized(Shape{r});
  Eigen::Map<EVec>(out.data(), r).noalias() =
      as_tr(m.value(), r, c).transpose() * Eigen::Map<const EVec>(v.value().data(), c);
  auto mn = m.node(), vn = v.node();
  return Var<T>::make_op(std::move(out), {m, v}, [mn, vn, r, c](Node<T>& self) {
    Eigen::Map<const EVec> g(self.grad.data(), r);
    if (mn->requires_grad) {
      mn->ensure_grad();
      // dM = g v^T => dM^T (the col-major view) += v g^T
      as_tr_mut(mn->grad, r, c).noalias() +=
          Eigen::Map<const EVec>(vn->value.data(), c) * g.transpose();
    }
    if (vn->requires_grad) {
      vn->ensure_grad();
      Eigen::Map<EVec>(vn->grad.data(), c).noalias() +=
          as_tr(mn->value, r, c) * g;
    }
  });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape s) {
  Tensor<T> out = a.value().reshaped(s);
  auto an = a.node();
  return Var<T>::make_op(std::move(out), {a}, [an](Node<T>& self) {
    if (an->requires_grad) an->add_grad(self.grad.reshaped(an->value.shape()));
  });
}

template <typename T>
Var<T> concat_vec(const std::vector<Var<T>>& parts) {
  SNDCR_CHECK(!parts.empty(), "concat_vec: empty input");
  int64_t total = 0;
  for (const auto& p : parts) {
    SNDCR_CHECK_SHAPE(p.value().rank() == 1, "concat_vec: rank-1 parts expected");
    total += p.value().numel();
  }
  Tensor<T> out = Tensor<T>::uninitialized(Shape{static_cast<int>(total)});
  int64_t off = 0;
  for (const auto& p : parts)
    for (int64_t i = 0; i < p.value().numel(); ++i) out[off++] = p.value()[i];
  std::vector<std::shared_ptr<Node<T>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return Var<T>::make_op(std::move(out), parts, [nodes](Node<T>& self) {
    int64_t off2 = 0;
    for (auto& n : nodes) {
      if (n->requires_grad) {
        n->ensure_grad();
        for (int64_t i = 0; i < n->value.numel(); ++i)
          n->grad[i] += self.grad[off2 + i];
      }
      off2 += n->value.numel();
    }
  });
}

/// Numerically stable log(sum(exp(x))) over a rank-1 tensor.
template <typename T>
Var<T> logsumexp(const Var<T>& a) {
  SNDCR_CHECK_SHAPE(a.value().rank() == 1 && a.value().numel() >= 1,
                    "logsumexp: non-empty vector expected");
  T m = a.value()[0];
  for (int64_t i = 1; i < a.value().numel(); ++i) m = std::max(m, a.value()[i]);
  T s = 0;
  for (int64_t i = 0; i < a.value().numel(); ++i)
    s += std::exp(a.value()[i] - m);
  T lse = m + std::log(s);
  auto an = a.node();
  return Var<T>::make_op(Tensor<T>::scalar(lse), {a}, [an](Node<T>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    T g = self.grad[0];
    T lse2 = self.value[0];
    for (int64_t i = 0; i < an->value.numel(); ++i)
      an->grad[i] += g * std::exp(an->value[i] - lse2);
  });
}

/// Gather rows of a [R, C] matrix. Backward scatter-adds into the source.
template <typename T>
Var<T> gather_rows(const Var<T>& a, std::vector<int> idx) {
  SNDCR_CHECK_SHAPE(a.value().rank() == 2, "gather_rows: rank-2 input expected");
  const int r = a.value().dim(0), c = a.value().dim(1);
  for (int i : idx)
    SNDCR_CHECK(i >= 0 && i < r, "gather_rows: index " << i << " out of range");
  Tensor<T> out = Tensor<T>::uninitialized(Shape{static_cast<int>(idx.size()), c});
  for (size_t s = 0; s < idx.size(); ++s)
    for (int j = 0; j < c; ++j) out.at2(static_cast<int>(s), j) = a.value().at2(idx[s], j);
  auto an = a.node();
  return Var<T>::make_op(std::move(out), {a},
                         [an, idx = std::move(idx), c](Node<T>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t s = 0; s < idx.size(); ++s)
      for (int j = 0; j < c; ++j)
        an->grad.at2(idx[s], j) += self.grad.at2(static_cast<int>(s), j);
  });
}

/// Rows of sample b of a [B, C, H, W] tensor as a [H*W, C] matrix.
template <typename T>
Var<T> spatial_rows(const Var<T>& x, int b) {
  SNDCR_CHECK_SHAPE(x.value().rank() == 4, "spatial_rows: rank-4 input expected");
  const int C = x.value().dim(1), H = x.value().dim(2), W = x.value().dim(3);
  const int HW = H * W;
  Tensor<T> out = Tensor<T>::uninitialized(Shape{HW, C});
  for (int c = 0; c < C; ++c)
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w) out.at2(h * W + w, c) = x.value().at4(b, c, h, w);
  auto xn = x.node();
  return Var<T>::make_op(std::move(out), {x}, [xn, b, C, H, W](Node<T>& self) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int c = 0; c < C; ++c)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
          xn->grad.at4(b, c, h, w) += self.grad.at2(h * W + w, c);
  });
}

/// Row-wise L2 normalization of a [R, C] matrix.
template <typename T>
Var<T> l2_normalize_rows(const Var<T>& a, T eps = T(1e-12)) {
  SNDCR_CHECK_SHAPE(a.value().rank() == 2, "l2_normalize_rows: rank-2 expected");
  const int r = a.value().dim(0), c = a.value().dim(1);
  Tensor<T> out = Tensor<T>::uninitialized(Shape{r, c});
  std::vector<T> norms(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) {
    T s = 0;
    for (int j = 0; j < c; ++j) s += a.value().at2(i, j) * a.value().at2(i, j);
    T n = std::max(std::sqrt(s), eps);
    norms[static_cast<size_t>(i)] = n;
    for (int j = 0; j < c; ++j) out.at2(i, j) = a.value().at2(i, j) / n;
  }
  auto an = a.node();
  return Var<T>::make_op(std::move(out), {a},
                         [an, norms = std::move(norms), r, c](Node<T>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int i = 0; i < r; ++i) {
      T n = norms[static_cast<size_t>(i)];
      T ydotg = 0;
      for (int j = 0; j < c; ++j) ydotg += self.value.at2(i, j) * self.grad.at2(i, j);
      for (int j = 0; j < c; ++j)
        an->grad.at2(i, j) +=
            (self.grad.at2(i, j) - self.value.at2(i, j) * ydotg) / n;
    }
  });
}

/// Per-channel scaling: y[b,c,h,w] = x[b,c,h,w] * s[b,c].
template <typename T>
Var<T> channel_scale(const Var<T>& x, const Var<T>& s) {
  SNDCR_CHECK_SHAPE(x.value().rank() == 4 && s.value().rank() == 2 &&
                        s.value().dim(0) == x.value().dim(0) &&
                        s.value().dim(1) == x.value().dim(1),
                    "channel_scale: x " << shape_str(x.shape()) << " s "
                                        << shape_str(s.shape()));
  const int B = x.value().dim(0), C = x.value().dim(1), H = x.value().dim(2),
            W = x.value().dim(3);
  const int64_t hw = static_cast<int64_t>(H) * W;
  Tensor<T> out = Tensor<T>::uninitialized(x.shape());
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      T sc = s.value().at2(b, c);
      const T* xp = &x.value().at4(b, c, 0, 0);
      T* op = &out.at4(b, c, 0, 0);
      for (int64_t i = 0; i < hw; ++i) op[i] = xp[i] * sc;
    }
  auto xn = x.node(), sn = s.node();
  return Var<T>::make_op(std::move(out), {x, s},
                         [xn, sn, B, C, hw](Node<T>& self) {
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c) {
        const int64_t base = (static_cast<int64_t>(b) * C + c) * hw;
        T sc = sn->value.at2(b, c);
        if (xn->requires_grad) {
          xn->ensure_grad();
          for (int64_t i = 0; i < hw; ++i)
            xn->grad[base + i] += self.grad[base + i] * sc;
        }
        if (sn->requires_grad) {
          sn->ensure_grad();
          T acc = 0;
          for (int64_t i = 0; i < hw; ++i)
            acc += self.grad[base + i] * xn->value[base + i];
          sn->grad.at2(b, c) += acc;
        }
      }
  });
}

/// Broadcast add of a [C] vector over the rows of an [R, C] matrix.
template <typename T>
Var<T> add_rowvec(const Var<T>& a, const Var<T>& v) {
  SNDCR_CHECK_SHAPE(a.value().rank() == 2 && v.value().rank() == 1 &&
                        a.value().dim(1) == v.value().dim(0),
                    "add_rowvec: a " << shape_str(a.shape()) << " v "
                                     << shape_str(v.shape()));
  const int r = a.value().dim(0), c = a.value().dim(1);
  Tensor<T> out = Tensor<T>::uninitialized(a.shape());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at2(i, j) = a.value().at2(i, j) + v.value()[j];
  auto an = a.node(), vn = v.node();
  return Var<T>::make_op(std::move(out), {a, v}, [an, vn, r, c](Node<T>& self) {
    if (an->requires_grad) an->add_grad(self.grad);
    if (vn->requires_grad) {
      vn->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) vn->grad[j] += self.grad.at2(i, j);
    }
  });
}

/// Elementwise division of a tensor by a scalar Var (used for W / sigma in
/// spectral normalization, where sigma carries gradient).
template <typename T>
Var<T> div_by_scalar(const Var<T>& x, const Var<T>& s) {
  SNDCR_CHECK(s.value().numel() == 1, "div_by_scalar: scalar divisor expected");
  T sv = s.value()[0];
  Tensor<T> out = Tensor<T>::uninitialized(x.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = x.value()[i] / sv;
  auto xn = x.node(), sn = s.node();
  return Var<T>::make_op(std::move(out), {x, s}, [xn, sn](Node<T>& self) {
    T sv2 = sn->value[0];
    if (xn->requires_grad) {
      xn->ensure_grad();
      for (int64_t i = 0; i < self.grad.numel(); ++i)
        xn->grad[i] += self.grad[i] / sv2;
    }
    if (sn->requires_grad) {
      sn->ensure_grad();
      T acc = 0;
      for (int64_t i = 0; i < self.grad.numel(); ++i)
        acc += self.grad[i] * xn->value[i];
      sn->grad[0] -= acc / (sv2 * sv2);
    }
  });
}

/// Projection of every channel onto a fixed per-channel spatial basis:
/// y[b,c] = sum_{h,w} x[b,c,h,w] * basis[c,h,w].
template <typename T>
Var<T> basis_pool(const Var<T>& x, const Tensor<T>& basis) {
  SNDCR_CHECK_SHAPE(x.value().rank() == 4 && basis.rank() == 3 &&
                        basis.dim(0) == x.value().dim(1) &&
                        basis.dim(1) == x.value().dim(2) &&
                        basis.dim(2) == x.value().dim(3),
                    "basis_pool: x " << shape_str(x.shape()) << " basis "
                                     << shape_str(basis.shape()));
  const int B = x.value().dim(0), C = x.value().dim(1);
  const int64_t hw = static_cast<int64_t>(x.value().dim(2)) * x.value().dim(3);
  Tensor<T> out = Tensor<T>::uninitialized(Shape{B, C});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const T* xp = &x.value().at4(b, c, 0, 0);
      const T* bp = basis.data() + static_cast<int64_t>(c) * hw;
      T s = 0;
      for (int64_t i = 0; i < hw; ++i) s += xp[i] * bp[i];
      out.at2(b, c) = s;
    }
  auto xn = x.node();
  return Var<T>::make_op(std::move(out), {x}, [xn, basis, B, C, hw](Node<T>& self) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c) {
        const int64_t base = (static_cast<int64_t>(b) * C + c) * hw;
        const T* bp = basis.data() + static_cast<int64_t>(c) * hw;
        T g = self.grad.at2(b, c);
        for (int64_t i = 0; i < hw; ++i) xn->grad[base + i] += g * bp[i];
      }
  });
}

}  // namespace sndcr
