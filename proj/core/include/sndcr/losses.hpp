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

#include <array>
#include <sstream>
#include <string>
#include <vector>

#include "sndcr/config.hpp"
#include "sndcr/features.hpp"
#include "sndcr/qs_attn.hpp"

namespace sndcr {

enum class GanSide { kGenerator, kDiscriminator };

/// Per-iteration loss values, logged as one key=value line.
template <typename T>
struct LossReport {
  T adv_g = 0, adv_d = 0;
  T patch_x = 0, patch_y = 0;
  T semantic = 0, style = 0, dual = 0;
  T total = 0;
};

// ---------------------------------------------------------------------------
// Adversarial loss
// ---------------------------------------------------------------------------

/// GAN objective over patch logits, averaged over all logits.
///
/// logistic mode: the discriminator minimizes
///   -(E log sigma(d_real) + E log(1 - sigma(d_fake)));
/// the generator by default minimizes the saturating E log(1 - sigma(d_fake)),
/// or -E log sigma(d_fake) when `nonsaturating` is set.
/// least_squares mode: D minimizes (E (d_real-1)^2 + E d_fake^2) / 2 and
/// G minimizes E (d_fake-1)^2.
template <typename T>
Var<T> adversarial_loss(const Var<T>& d_real, const Var<T>& d_fake,
                        GanMode mode, GanSide side,
                        bool nonsaturating = false) {
  SNDCR_CHECK(d_fake.value().all_finite() &&
                  (side == GanSide::kGenerator || d_real.value().all_finite()),
              "adversarial_loss: non-finite logits");
  if (mode == GanMode::kLogistic) {
    if (side == GanSide::kDiscriminator) {
      // -log sigma(x) = softplus(-x); -log(1 - sigma(x)) = softplus(x)
      Var<T> real_term = mean_all(softplus(scale(d_real, T(-1))));
      Var<T> fake_term = mean_all(softplus(d_fake));
      return add(real_term, fake_term);
    }
    if (nonsaturating) return mean_all(softplus(scale(d_fake, T(-1))));
    // E log(1 - sigma(d_fake)) = -E softplus(d_fake)
    return scale(mean_all(softplus(d_fake)), T(-1));
  }
  if (mode == GanMode::kLeastSquares) {
    if (side == GanSide::kDiscriminator) {
      Var<T> real_term = mean_all(square(add_scalar(d_real, T(-1))));
      Var<T> fake_term = mean_all(square(d_fake));
      return scale(add(real_term, fake_term), T(0.5));
    }
    return mean_all(square(add_scalar(d_fake, T(-1))));
  }
  throw ConfigError("adversarial_loss: unknown gan mode");
}

// ---------------------------------------------------------------------------
// Patch-wise contrastive loss
// ---------------------------------------------------------------------------

/// InfoNCE term for one query against its positive and N-1 negatives, all
/// unit vectors:  -log( e^{q.k+/tau} / (e^{q.k+/tau} + sum e^{q.k-/tau}) ).
/// Evaluated through logsumexp, so extreme tau values stay stable.
template <typename T>
Var<T> patch_nce(const Var<T>& q, const Var<T>& k_pos, const Var<T>& k_negs,
                 T tau) {
  SNDCR_CHECK(tau > T(0), "patch_nce: tau must be positive");
  Var<T> pos_logit = scale(dot(q, k_pos), T(1) / tau);
  if (!k_negs.defined() || k_negs.value().numel() == 0) {
    // No negatives: the ratio is exactly 1 and the loss 0 (kept in the
    // graph so gradients remain defined).
    return sub(pos_logit, pos_logit);
  }
  SNDCR_CHECK_SHAPE(k_negs.value().rank() == 2 &&
                        k_negs.value().dim(1) == q.value().dim(0),
                    "patch_nce: negatives must be [N-1, D]");
  Var<T> neg_logits = scale(matvec(k_negs, q), T(1) / tau);
  Var<T> all_logits =
      concat_vec<T>({reshape(pos_logit, Shape{1}), neg_logits});
  return sub(logsumexp(all_logits), pos_logit);
}

/// Sum over rows of logsumexp(row) - diagonal, the InfoNCE sum for a bank
/// whose negatives are the other selected patches.
template <typename T>
Var<T> nce_diag_sum(const Var<T>& logits) {
  SNDCR_CHECK_SHAPE(logits.value().rank() == 2 &&
                        logits.value().dim(0) == logits.value().dim(1),
                    "nce_diag_sum: square logits expected, got "
                        << shape_str(logits.shape()));
  const int s = logits.value().dim(0);
  T total = 0;
  for (int i = 0; i < s; ++i) {
    T mx = logits.value().at2(i, 0);
    for (int j = 1; j < s; ++j) mx = std::max(mx, logits.value().at2(i, j));
    T z = 0;
    for (int j = 0; j < s; ++j) z += std::exp(logits.value().at2(i, j) - mx);
    total += mx + std::log(z) - logits.value().at2(i, i);
  }
  auto ln = logits.node();
  return Var<T>::make_op(Tensor<T>::scalar(total), {logits},
                         [ln, s](Node<T>& self) {
    if (!ln->requires_grad) return;
    ln->ensure_grad();
    const T g = self.grad[0];
    for (int i = 0; i < s; ++i) {
      T mx = ln->value.at2(i, 0);
      for (int j = 1; j < s; ++j) mx = std::max(mx, ln->value.at2(i, j));
      T z = 0;
      for (int j = 0; j < s; ++j) z += std::exp(ln->value.at2(i, j) - mx);
      for (int j = 0; j < s; ++j) {
        T p = std::exp(ln->value.at2(i, j) - mx) / z;
        ln->grad.at2(i, j) += g * (p - (i == j ? T(1) : T(0)));
      }
    }
  });
}

/// Multi-layer patch loss: the mean InfoNCE term over every selected patch
/// of every bank. Queries come from the generated image, positives from the
/// input at the same spatial index, negatives are the bank's other patches.
template <typename T>
Var<T> patch_loss(const std::vector<PatchBank<T>>& banks, T tau) {
  SNDCR_CHECK(!banks.empty(), "patch_loss: no banks");
  Var<T> total;
  int64_t count = 0;
  for (const auto& bank : banks) {
    SNDCR_CHECK(bank.queries.defined() && bank.queries.value().dim(0) >= 1,
                "patch_loss: empty bank for layer " << bank.layer_id);
    Var<T> logits =
        scale(matmul(bank.queries, transpose2d(bank.positives)), T(1) / tau);
    Var<T> bank_sum = nce_diag_sum(logits);
    total = total.defined() ? add(total, bank_sum) : bank_sum;
    count += bank.queries.value().dim(0);
  }
  return scale(total, T(1) / static_cast<T>(count));
}

// ---------------------------------------------------------------------------
// Dual contrastive regularization
// ---------------------------------------------------------------------------

inline constexpr std::array<double, 5> kSemanticLayerWeights = {
    1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0};
inline constexpr double kSemanticDenomGuard = 1e-7;

/// Weighted sum over the five taps of L1(gx, P) / (L1(gx, N) + 1e-7); L1 is
/// a plain element sum. Pulls the generated image toward the target-domain
/// positive and away from the source-domain negative in semantic space.
template <typename T>
Var<T> semantic_loss(const VggTaps<T>& taps_gx, const VggTaps<T>& taps_p,
                     const VggTaps<T>& taps_n) {
  SNDCR_CHECK_SHAPE(taps_gx.taps.size() == 5 && taps_p.taps.size() == 5 &&
                        taps_n.taps.size() == 5,
                    "semantic_loss: five taps per input expected");
  Var<T> total;
  size_t li = 0;
  for (const auto& [layer, gx] : taps_gx.taps) {
    const Var<T>& p = taps_p.taps.at(layer);
    const Var<T>& n = taps_n.taps.at(layer);
    Var<T> num = l1_distance(gx, p);
    Var<T> den = add_scalar(l1_distance(gx, n), T(kSemanticDenomGuard));
    Var<T> ratio = scale(divide(num, den), T(kSemanticLayerWeights[li++]));
    total = total.defined() ? add(total, ratio) : ratio;
  }
  return total;
}

/// Channel-correlation (Gram) matrices of a [B, C, H, W] feature map,
/// normalized by C*H*W: out[b] = F_b F_b^T / (C*H*W) with F_b = [C, H*W].
template <typename T>
Var<T> gram(const Var<T>& f) {
  SNDCR_CHECK_SHAPE(f.value().rank() == 4, "gram: [B, C, H, W] input expected");
  const int B = f.value().dim(0), C = f.value().dim(1);
  const int64_t hw = static_cast<int64_t>(f.value().dim(2)) * f.value().dim(3);
  const T norm = T(1) / (static_cast<T>(C) * static_cast<T>(hw));
  Tensor<T> out = Tensor<T>::uninitialized(Shape{B, C, C});
  for (int b = 0; b < B; ++b) {
    ECMap<T> f_tr(f.value().data() + b * C * hw, static_cast<Eigen::Index>(hw), C);
    EMap<T> m(out.data() + static_cast<int64_t>(b) * C * C, C, C);
    m.noalias() = (f_tr.transpose() * f_tr) * norm;  // symmetric, order moot
  }
  auto fn = f.node();
  return Var<T>::make_op(std::move(out), {f}, [fn, B, C, hw, norm](Node<T>& self) {
    if (!fn->requires_grad) return;
    fn->ensure_grad();
    for (int b = 0; b < B; ++b) {
      ECMap<T> f_tr(fn->value.data() + b * C * hw, static_cast<Eigen::Index>(hw), C);
      EMap<T> gf_tr(fn->grad.data() + b * C * hw, static_cast<Eigen::Index>(hw), C);
      ECMap<T> gm(self.grad.data() + static_cast<int64_t>(b) * C * C, C, C);
      // dF = (dM + dM^T) F / (C*H*W); with col-major views of row-major
      // data, gm here is dM^T, so gm + gm^T covers both orders.
      gf_tr.noalias() += f_tr * ((gm + gm.transpose()) * norm);
    }
  });
}

/// Sum over the five taps of the Frobenius distance between Gram matrices.
template <typename T>
Var<T> gram_distance(const VggTaps<T>& a, const VggTaps<T>& b) {
  SNDCR_CHECK_SHAPE(a.taps.size() == b.taps.size(),
                    "gram_distance: mismatched layer sets");
  Var<T> total;
  for (const auto& [layer, fa] : a.taps) {
    auto it = b.taps.find(layer);
    SNDCR_CHECK_SHAPE(it != b.taps.end(),
                      "gram_distance: layer " << layer << " missing");
    Var<T> d = frobenius_distance(gram(fa), gram(it->second));
    total = total.defined() ? add(total, d) : d;
  }
  return total;
}

/// Style triplet: max(d(M(gx), M(P)) - d(M(gx), M(N)) + alpha, 0), where d
/// sums Frobenius distances of Gram matrices over the taps.
template <typename T>
Var<T> style_loss(const VggTaps<T>& taps_gx, const VggTaps<T>& taps_p,
                  const VggTaps<T>& taps_n, T alpha) {
  SNDCR_CHECK(alpha > T(0), "style_loss: alpha must be positive");
  Var<T> d_p = gram_distance(taps_gx, taps_p);
  Var<T> d_n = gram_distance(taps_gx, taps_n);
  return relu(add_scalar(sub(d_p, d_n), alpha));
}

/// lambda1 * semantic + lambda2 * style.
template <typename T>
Var<T> dual_loss(const Var<T>& semantic, const Var<T>& style, T lambda1,
                 T lambda2) {
  SNDCR_CHECK(lambda1 >= T(0) && lambda2 >= T(0),
              "dual_loss: negative weights");
  return add(scale(semantic, lambda1), scale(style, lambda2));
}

/// Generator-side total: adv_g + patch_x + patch_y + dual. Throws
/// TrainingAbort naming the first non-finite component.
template <typename T>
T total_loss(LossReport<T>& report) {
  const std::array<std::pair<const char*, T>, 7> components = {{
      {"adv_g", report.adv_g},
      {"adv_d", report.adv_d},
      {"patch_x", report.patch_x},
      {"patch_y", report.patch_y},
      {"semantic", report.semantic},
      {"style", report.style},
      {"dual", report.dual},
  }};
  for (const auto& [name, v] : components)
    if (!std::isfinite(static_cast<double>(v)))
      throw TrainingAbort(std::string("non-finite loss component: ") + name);
  report.total = report.adv_g + report.patch_x + report.patch_y + report.dual;
  return report.total;
}

template <typename T>
std::string format_loss_report(const LossReport<T>& r) {
  std::ostringstream oss;
  oss.precision(9);
  oss << "adv_g=" << r.adv_g << " adv_d=" << r.adv_d << " patch_x=" << r.patch_x
      << " patch_y=" << r.patch_y << " semantic=" << r.semantic
      << " style=" << r.style << " dual=" << r.dual << " total=" << r.total;
  return oss.str();
}

}  // namespace sndcr
