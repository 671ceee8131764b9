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

#include <vector>

#include "sndcr/ops.hpp"

namespace sndcr {

enum class PadMode { kZero, kReflect };

struct ConvOpts {
  int stride = 1;
  int pad = 0;
  PadMode pad_mode = PadMode::kZero;
};

namespace detail {

// Reusable per-thread scratch for the im2col/col2im buffers; convolutions
// at image scale would otherwise fault in tens of MB per call.
template <typename T, int kSlot>
std::vector<T>& scratch(size_t n) {
  thread_local std::vector<T> buf;
  if (buf.size() < n) buf.resize(n);
  return buf;
}

// Reflect-101 index mapping (no edge duplication): -1 -> 1, H -> H-2.
inline int reflect_index(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

// col is [Cin*kh*kw, Ho*Wo] row-major.
// Fills col rows for output rows [oh0, oh1); col is laid out for that block
// only, i.e. [C*kh*kw, (oh1-oh0)*Wo].
template <typename T>
void im2col_block(const T* x, int C, int H, int W, int kh, int kw, int stride,
                  int pad, PadMode mode, int Ho, int Wo, int oh0, int oh1,
                  T* col) {
  const int64_t plane = static_cast<int64_t>(H) * W;
  const int64_t out_plane = static_cast<int64_t>(oh1 - oh0) * Wo;
#pragma omp parallel for schedule(static) if (C > 8)
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        T* row = col + ((static_cast<int64_t>(c) * kh + ki) * kw + kj) * out_plane -
                 static_cast<int64_t>(oh0) * Wo;
        const T* src = x + c * plane;
        for (int oh = oh0; oh < oh1; ++oh) {
          int ih = oh * stride - pad + ki;
          bool oob_h = ih < 0 || ih >= H;
          if (mode == PadMode::kReflect) {
            ih = reflect_index(ih, H);
            oob_h = false;
          }
          T* dst = row + static_cast<int64_t>(oh) * Wo;
          if (oob_h) {
            for (int ow = 0; ow < Wo; ++ow) dst[ow] = T(0);
            continue;
          }
          const T* src_row = src + static_cast<int64_t>(ih) * W;
          if (stride == 1) {
            // Contiguous middle segment; only the borders need index math.
            const int lo = std::min(std::max(pad - kj, 0), Wo);
            const int hi = std::max(std::min(W + pad - kj, Wo), lo);
            for (int ow = 0; ow < lo; ++ow)
              dst[ow] = mode == PadMode::kReflect
                            ? src_row[reflect_index(ow - pad + kj, W)]
                            : T(0);
            std::copy(src_row + (lo - pad + kj), src_row + (hi - pad + kj),
                      dst + lo);
            for (int ow = hi; ow < Wo; ++ow)
              dst[ow] = mode == PadMode::kReflect
                            ? src_row[reflect_index(ow - pad + kj, W)]
                            : T(0);
            continue;
          }
          for (int ow = 0; ow < Wo; ++ow) {
            int iw = ow * stride - pad + kj;
            if (mode == PadMode::kReflect) {
              dst[ow] = src_row[reflect_index(iw, W)];
            } else {
              dst[ow] = (iw < 0 || iw >= W) ? T(0) : src_row[iw];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void im2col(const T* x, int C, int H, int W, int kh, int kw, int stride,
            int pad, PadMode mode, int Ho, int Wo, T* col) {
  im2col_block(x, C, H, W, kh, kw, stride, pad, mode, Ho, Wo, 0, Ho, col);
}

// Scatter-add of a column-block gradient back into the input gradient; the
// exact adjoint of im2col_block (reflected positions accumulate at their
// source pixel).
template <typename T>
void col2im_add_block(const T* col, int C, int H, int W, int kh, int kw,
                      int stride, int pad, PadMode mode, int Ho, int Wo,
                      int oh0, int oh1, T* gx) {
  const int64_t plane = static_cast<int64_t>(H) * W;
  const int64_t out_plane = static_cast<int64_t>(oh1 - oh0) * Wo;
  // Parallel over channels only: every (kh, kw) offset scatters into the
  // same channel plane.
#pragma omp parallel for schedule(static) if (C > 8)
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const T* row =
            col + ((static_cast<int64_t>(c) * kh + ki) * kw + kj) * out_plane -
            static_cast<int64_t>(oh0) * Wo;
        T* dst = gx + c * plane;
        for (int oh = oh0; oh < oh1; ++oh) {
          int ih = oh * stride - pad + ki;
          if (mode == PadMode::kReflect) {
            ih = reflect_index(ih, H);
          } else if (ih < 0 || ih >= H) {
            continue;
          }
          const T* src_row = row + static_cast<int64_t>(oh) * Wo;
          T* dst_row = dst + static_cast<int64_t>(ih) * W;
          if (stride == 1) {
            const int lo = std::min(std::max(pad - kj, 0), Wo);
            const int hi = std::max(std::min(W + pad - kj, Wo), lo);
            if (mode == PadMode::kReflect) {
              for (int ow = 0; ow < lo; ++ow)
                dst_row[reflect_index(ow - pad + kj, W)] += src_row[ow];
              for (int ow = hi; ow < Wo; ++ow)
                dst_row[reflect_index(ow - pad + kj, W)] += src_row[ow];
            }
            T* mid = dst_row + (lo - pad + kj);
            for (int ow = lo; ow < hi; ++ow) mid[ow - lo] += src_row[ow];
            continue;
          }
          for (int ow = 0; ow < Wo; ++ow) {
            int iw = ow * stride - pad + kj;
            if (mode == PadMode::kReflect) {
              dst_row[reflect_index(iw, W)] += src_row[ow];
            } else if (iw >= 0 && iw < W) {
              dst_row[iw] += src_row[ow];
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

/// 2-D convolution. x: [B, Cin, H, W], w: [Cout, Cin, kh, kw], b: [Cout]
/// (pass an undefined Var to skip the bias).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b,
              const ConvOpts& opts) {
  SNDCR_CHECK_SHAPE(x.value().rank() == 4 && w.value().rank() == 4,
                    "conv2d: rank-4 input and weight expected");
  const int B = x.value().dim(0), Cin = x.value().dim(1), H = x.value().dim(2),
            W = x.value().dim(3);
  const int Cout = w.value().dim(0), kh = w.value().dim(2), kw = w.value().dim(3);
  SNDCR_CHECK_SHAPE(w.value().dim(1) == Cin,
                    "conv2d: weight expects " << w.value().dim(1)
                                              << " input channels, got " << Cin);
  if (opts.pad_mode == PadMode::kReflect)
    SNDCR_CHECK_SHAPE(opts.pad < H && opts.pad < W,
                      "conv2d: reflect pad " << opts.pad
                                             << " too large for input " << H
                                             << "x" << W);
  const int Ho = (H + 2 * opts.pad - kh) / opts.stride + 1;
  const int Wo = (W + 2 * opts.pad - kw) / opts.stride + 1;
  SNDCR_CHECK_SHAPE(Ho >= 1 && Wo >= 1, "conv2d: input " << H << "x" << W
                                            << " collapses to " << Ho << "x"
                                            << Wo);
  const int ckk = Cin * kh * kw;
  const int64_t out_plane = static_cast<int64_t>(Ho) * Wo;
  const int64_t in_plane = static_cast<int64_t>(H) * W;

  // Output rows are processed in blocks sized so the column slab stays
  // cache-resident; without this, wide-kernel convs with few output
  // channels stream tens of MB through memory per call. When the weight
  // trains and the full column matrix is modest it is kept alive for the
  // backward weight GEMM; otherwise backward rebuilds it block by block.
  const int64_t col_total = static_cast<int64_t>(ckk) * out_plane;
  const int block_rows =
      std::clamp(static_cast<int>((1 << 19) / (static_cast<int64_t>(ckk) * Wo)),
                 1, Ho);
  const bool keep_col = w.requires_grad() && col_total * B <= (int64_t(2) << 20);
  auto kept = keep_col
                  ? std::make_shared<std::vector<T>>(static_cast<size_t>(B) * col_total)
                  : nullptr;

  Tensor<T> out = Tensor<T>::uninitialized(Shape{B, Cout, Ho, Wo});
  for (int bi = 0; bi < B; ++bi) {
    const T* xp = x.value().data() + bi * Cin * in_plane;
    for (int oh0 = 0; oh0 < Ho; oh0 += block_rows) {
      const int oh1 = std::min(oh0 + block_rows, Ho);
      const int64_t rows = static_cast<int64_t>(oh1 - oh0) * Wo;
      T* colp = keep_col ? kept->data() + bi * col_total +
                               static_cast<int64_t>(ckk) * oh0 * Wo
                         : detail::scratch<T, 0>(static_cast<size_t>(ckk) * rows).data();
      detail::im2col_block(xp, Cin, H, W, kh, kw, opts.stride, opts.pad,
                           opts.pad_mode, Ho, Wo, oh0, oh1, colp);
      // out^T = col^T * w^T on the transposed (col-major) views. The kept
      // layout stores blocks back to back, so block strides match.
      ECMap<T> col_tr(colp, rows, ckk);
      ECMap<T> w_tr(w.value().data(), ckk, Cout);
      Eigen::Map<EMat<T>, 0, Eigen::Stride<Eigen::Dynamic, 1>> out_blk(
          out.data() + bi * Cout * out_plane + static_cast<int64_t>(oh0) * Wo,
          rows, Cout, Eigen::Stride<Eigen::Dynamic, 1>(out_plane, 1));
      out_blk.noalias() = col_tr * w_tr;
    }
  }
  if (b.defined()) {
    SNDCR_CHECK_SHAPE(b.value().rank() == 1 && b.value().dim(0) == Cout,
                      "conv2d: bias shape " << shape_str(b.value().shape()));
    for (int bi = 0; bi < B; ++bi)
      for (int co = 0; co < Cout; ++co) {
        T bv = b.value()[co];
        T* p = &out.at4(bi, co, 0, 0);
        for (int64_t i = 0; i < out_plane; ++i) p[i] += bv;
      }
  }

  auto xn = x.node(), wn = w.node();
  auto bn = b.defined() ? b.node() : nullptr;
  ConvOpts o = opts;
  auto backward = [xn, wn, bn, kept, o, B, Cin, H, W, Cout, kh, kw, Ho, Wo,
                   ckk, out_plane, in_plane, block_rows, col_total](Node<T>& self) {
    if (xn->requires_grad) xn->ensure_grad();
    if (wn->requires_grad) wn->ensure_grad();
    for (int bi = 0; bi < B; ++bi) {
      const T* xp = xn->value.data() + bi * Cin * in_plane;
      for (int oh0 = 0; oh0 < Ho; oh0 += block_rows) {
        const int oh1 = std::min(oh0 + block_rows, Ho);
        const int64_t rows = static_cast<int64_t>(oh1 - oh0) * Wo;
        Eigen::Map<const EMat<T>, 0, Eigen::Stride<Eigen::Dynamic, 1>> gout_blk(
            self.grad.data() + bi * Cout * out_plane +
                static_cast<int64_t>(oh0) * Wo,
            rows, Cout, Eigen::Stride<Eigen::Dynamic, 1>(out_plane, 1));
        if (wn->requires_grad) {
          const T* colp;
          if (kept) {
            colp = kept->data() + bi * col_total +
                   static_cast<int64_t>(ckk) * oh0 * Wo;
          } else {
            T* tmp = detail::scratch<T, 0>(static_cast<size_t>(ckk) * rows).data();
            detail::im2col_block(xp, Cin, H, W, kh, kw, o.stride, o.pad,
                                 o.pad_mode, Ho, Wo, oh0, oh1, tmp);
            colp = tmp;
          }
          ECMap<T> col_tr(colp, rows, ckk);
          EMap<T> gw_tr(wn->grad.data(), ckk, Cout);
          gw_tr.noalias() += col_tr.transpose() * gout_blk;
        }
        if (xn->requires_grad) {
          ECMap<T> w_tr(wn->value.data(), ckk, Cout);
          std::vector<T>& gcol =
              detail::scratch<T, 1>(static_cast<size_t>(ckk) * rows);
          EMap<T> gcol_tr(gcol.data(), rows, ckk);
          gcol_tr.noalias() = gout_blk * w_tr.transpose();
          detail::col2im_add_block(gcol.data(), Cin, H, W, kh, kw, o.stride,
                                   o.pad, o.pad_mode, Ho, Wo, oh0, oh1,
                                   xn->grad.data() + bi * Cin * in_plane);
        }
      }
    }
    if (bn && bn->requires_grad) {
      bn->ensure_grad();
      for (int bi = 0; bi < B; ++bi)
        for (int co = 0; co < Cout; ++co) {
          const T* p = &self.grad.at4(bi, co, 0, 0);
          T acc = 0;
          for (int64_t i = 0; i < out_plane; ++i) acc += p[i];
          bn->grad[co] += acc;
        }
    }
  };
  std::vector<Var<T>> parents = b.defined() ? std::vector<Var<T>>{x, w, b}
                                            : std::vector<Var<T>>{x, w};
  return Var<T>::make_op(std::move(out), std::move(parents), std::move(backward));
}

/// Transposed 2-D convolution. x: [B, Cin, H, W], w: [Cin, Cout, kh, kw].
/// Output spatial size: (H-1)*stride - 2*pad + kh + out_pad.
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& b,
                        int stride, int pad, int out_pad) {
  SNDCR_CHECK_SHAPE(x.value().rank() == 4 && w.value().rank() == 4,
                    "conv_transpose2d: rank-4 input and weight expected");
  const int B = x.value().dim(0), Cin = x.value().dim(1), H = x.value().dim(2),
            W = x.value().dim(3);
  SNDCR_CHECK_SHAPE(w.value().dim(0) == Cin,
                    "conv_transpose2d: weight expects " << w.value().dim(0)
                                                        << " input channels, got "
                                                        << Cin);
  const int Cout = w.value().dim(1), kh = w.value().dim(2), kw = w.value().dim(3);
  const int Ho = (H - 1) * stride - 2 * pad + kh + out_pad;
  const int Wo = (W - 1) * stride - 2 * pad + kw + out_pad;
  SNDCR_CHECK_SHAPE(Ho >= 1 && Wo >= 1, "conv_transpose2d: degenerate output");
  const int ckk = Cout * kh * kw;
  const int64_t in_plane = static_cast<int64_t>(H) * W;
  const int64_t out_plane = static_cast<int64_t>(Ho) * Wo;
  const int64_t in_hw = in_plane;

  Tensor<T> out(Shape{B, Cout, Ho, Wo});
  std::vector<T>& col = detail::scratch<T, 0>(static_cast<size_t>(ckk) * in_hw);
  for (int bi = 0; bi < B; ++bi) {
    // col = w_mat^T * x_mat, both [Cin, *] row-major slices.
    ECMap<T> x_tr(x.value().data() + bi * Cin * in_plane,
                  static_cast<Eigen::Index>(in_hw), Cin);
    ECMap<T> w_tr(w.value().data(), ckk, Cin);
    EMap<T> col_tr(col.data(), static_cast<Eigen::Index>(in_hw), ckk);
    col_tr.noalias() = x_tr * w_tr.transpose();
    // Scatter col into the output plane.
    T* yp = out.data() + bi * Cout * out_plane;
#pragma omp parallel for schedule(static) if (Cout > 8)
    for (int co = 0; co < Cout; ++co)
      for (int ki = 0; ki < kh; ++ki)
        for (int kj = 0; kj < kw; ++kj) {
          const T* row =
              col.data() + ((static_cast<int64_t>(co) * kh + ki) * kw + kj) * in_hw;
          for (int ih = 0; ih < H; ++ih) {
            int oh = ih * stride - pad + ki;
            if (oh < 0 || oh >= Ho) continue;
            T* dst = yp + (static_cast<int64_t>(co) * Ho + oh) * Wo;
            const T* src = row + static_cast<int64_t>(ih) * W;
            for (int iw = 0; iw < W; ++iw) {
              int ow = iw * stride - pad + kj;
              if (ow >= 0 && ow < Wo) dst[ow] += src[iw];
            }
          }
        }
  }
  if (b.defined()) {
    SNDCR_CHECK_SHAPE(b.value().rank() == 1 && b.value().dim(0) == Cout,
                      "conv_transpose2d: bias shape "
                          << shape_str(b.value().shape()));
    for (int bi = 0; bi < B; ++bi)
      for (int co = 0; co < Cout; ++co) {
        T bv = b.value()[co];
        T* p = &out.at4(bi, co, 0, 0);
        for (int64_t i = 0; i < out_plane; ++i) p[i] += bv;
      }
  }

  auto xn = x.node(), wn = w.node();
  auto bn = b.defined() ? b.node() : nullptr;
  auto backward = [xn, wn, bn, stride, pad, B, Cin, H, W, Cout, kh, kw, Ho, Wo,
                   ckk, in_plane, out_plane, in_hw](Node<T>& self) {
    std::vector<T>& gcol = detail::scratch<T, 1>(static_cast<size_t>(ckk) * in_hw);
    if (xn->requires_grad) xn->ensure_grad();
    if (wn->requires_grad) wn->ensure_grad();
    for (int bi = 0; bi < B; ++bi) {
      // Gather grad_col from the output gradient (adjoint of the scatter).
      const T* gyp = self.grad.data() + bi * Cout * out_plane;
#pragma omp parallel for schedule(static) if (Cout > 8)
      for (int co = 0; co < Cout; ++co)
        for (int ki = 0; ki < kh; ++ki)
          for (int kj = 0; kj < kw; ++kj) {
            T* row = gcol.data() +
                     ((static_cast<int64_t>(co) * kh + ki) * kw + kj) * in_hw;
            for (int ih = 0; ih < H; ++ih) {
              int oh = ih * stride - pad + ki;
              const T* src =
                  (oh >= 0 && oh < Ho)
                      ? gyp + (static_cast<int64_t>(co) * Ho + oh) * Wo
                      : nullptr;
              T* dst = row + static_cast<int64_t>(ih) * W;
              for (int iw = 0; iw < W; ++iw) {
                int ow = iw * stride - pad + kj;
                dst[iw] = (src && ow >= 0 && ow < Wo) ? src[ow] : T(0);
              }
            }
          }
      ECMap<T> gcol_tr(gcol.data(), static_cast<Eigen::Index>(in_hw), ckk);
      if (xn->requires_grad) {
        // grad_x = w_mat * grad_col
        EMap<T> gx_tr(xn->grad.data() + bi * Cin * in_plane,
                      static_cast<Eigen::Index>(in_hw), Cin);
        ECMap<T> w_tr(wn->value.data(), ckk, Cin);
        gx_tr.noalias() += gcol_tr * w_tr;
      }
      if (wn->requires_grad) {
        // grad_w = x_mat * grad_col^T
        ECMap<T> x_tr(xn->value.data() + bi * Cin * in_plane,
                      static_cast<Eigen::Index>(in_hw), Cin);
        EMap<T> gw_tr(wn->grad.data(), ckk, Cin);
        gw_tr.noalias() += gcol_tr.transpose() * x_tr;
      }
    }
    if (bn && bn->requires_grad) {
      bn->ensure_grad();
      for (int bi = 0; bi < B; ++bi)
        for (int co = 0; co < Cout; ++co) {
          const T* p = &self.grad.at4(bi, co, 0, 0);
          T acc = 0;
          for (int64_t i = 0; i < out_plane; ++i) acc += p[i];
          bn->grad[co] += acc;
        }
    }
  };
  std::vector<Var<T>> parents = b.defined() ? std::vector<Var<T>>{x, w, b}
                                            : std::vector<Var<T>>{x, w};
  return Var<T>::make_op(std::move(out), std::move(parents), std::move(backward));
}

/// 2x2 max pooling with stride 2 (spatial dims must be even).
template <typename T>
Var<T> maxpool2x2(const Var<T>& x) {
  SNDCR_CHECK_SHAPE(x.value().rank() == 4 && x.value().dim(2) % 2 == 0 &&
                        x.value().dim(3) % 2 == 0,
                    "maxpool2x2: even spatial dims expected, got "
                        << shape_str(x.shape()));
  const int B = x.value().dim(0), C = x.value().dim(1), H = x.value().dim(2),
            W = x.value().dim(3);
  const int Ho = H / 2, Wo = W / 2;
  Tensor<T> out = Tensor<T>::uninitialized(Shape{B, C, Ho, Wo});
  std::vector<int64_t> argmax(static_cast<size_t>(out.numel()));
  int64_t oi = 0;
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          int64_t best = -1;
          T bv = T(0);
          for (int dh = 0; dh < 2; ++dh)
            for (int dw = 0; dw < 2; ++dw) {
              int64_t idx = ((static_cast<int64_t>(b) * C + c) * H +
                             (2 * oh + dh)) * W + (2 * ow + dw);
              T v = x.value()[idx];
              if (best < 0 || v > bv) {
                best = idx;
                bv = v;
              }
            }
          out[oi] = bv;
          argmax[static_cast<size_t>(oi)] = best;
          ++oi;
        }
  auto xn = x.node();
  return Var<T>::make_op(std::move(out), {x},
                         [xn, argmax = std::move(argmax)](Node<T>& self) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int64_t i = 0; i < self.grad.numel(); ++i)
      xn->grad[argmax[static_cast<size_t>(i)]] += self.grad[i];
  });
}

/// Instance normalization over the spatial dims of every (sample, channel)
/// plane, with optional affine parameters gamma/beta of shape [C]. Variance
/// is the biased (1/HW) estimate.
template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                     T eps = T(1e-5)) {
  SNDCR_CHECK_SHAPE(x.value().rank() == 4, "instance_norm: rank-4 input expected");
  const int B = x.value().dim(0), C = x.value().dim(1), H = x.value().dim(2),
            W = x.value().dim(3);
  const int64_t hw = static_cast<int64_t>(H) * W;
  SNDCR_CHECK_SHAPE(hw >= 2, "instance_norm: needs H*W >= 2");
  const bool affine = gamma.defined();
  if (affine) {
    SNDCR_CHECK_SHAPE(gamma.value().rank() == 1 && gamma.value().dim(0) == C &&
                          beta.value().rank() == 1 && beta.value().dim(0) == C,
                      "instance_norm: affine params must be [C]");
  }
  Tensor<T> out = Tensor<T>::uninitialized(x.shape());
  std::vector<T> means(static_cast<size_t>(B) * C),
      invstds(static_cast<size_t>(B) * C);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const T* xp = &x.value().at4(b, c, 0, 0);
      T mu = 0;
      for (int64_t i = 0; i < hw; ++i) mu += xp[i];
      mu /= static_cast<T>(hw);
      T var = 0;
      for (int64_t i = 0; i < hw; ++i) {
        T d = xp[i] - mu;
        var += d * d;
      }
      var /= static_cast<T>(hw);
      T inv = T(1) / std::sqrt(var + eps);
      means[static_cast<size_t>(b) * C + c] = mu;
      invstds[static_cast<size_t>(b) * C + c] = inv;
      T g = affine ? gamma.value()[c] : T(1);
      T be = affine ? beta.value()[c] : T(0);
      T* op = &out.at4(b, c, 0, 0);
      for (int64_t i = 0; i < hw; ++i) op[i] = (xp[i] - mu) * inv * g + be;
    }
  auto xn = x.node();
  auto gn = affine ? gamma.node() : nullptr;
  auto bn = affine ? beta.node() : nullptr;
  auto backward = [xn, gn, bn, means = std::move(means),
                   invstds = std::move(invstds), B, C, hw](Node<T>& self) {
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c) {
        const int64_t base = (static_cast<int64_t>(b) * C + c) * hw;
        const T mu = means[static_cast<size_t>(b) * C + c];
        const T inv = invstds[static_cast<size_t>(b) * C + c];
        const T g = gn ? gn->value[c] : T(1);
        T sum_gy = 0, sum_gy_xhat = 0;
        for (int64_t i = 0; i < hw; ++i) {
          T xhat = (xn->value[base + i] - mu) * inv;
          T gy = self.grad[base + i];
          sum_gy += gy;
          sum_gy_xhat += gy * xhat;
        }
        if (gn && gn->requires_grad) {
          gn->ensure_grad();
          gn->grad[c] += sum_gy_xhat;
        }
        if (bn && bn->requires_grad) {
          bn->ensure_grad();
          bn->grad[c] += sum_gy;
        }
        if (xn->requires_grad) {
          xn->ensure_grad();
          const T mean_gy = sum_gy / static_cast<T>(hw);
          const T mean_gy_xhat = sum_gy_xhat / static_cast<T>(hw);
          for (int64_t i = 0; i < hw; ++i) {
            T xhat = (xn->value[base + i] - mu) * inv;
            xn->grad[base + i] +=
                g * inv * (self.grad[base + i] - mean_gy - xhat * mean_gy_xhat);
          }
        }
      }
  };
  std::vector<Var<T>> parents =
      affine ? std::vector<Var<T>>{x, gamma, beta} : std::vector<Var<T>>{x};
  return Var<T>::make_op(std::move(out), std::move(parents), std::move(backward));
}

}  // namespace sndcr
