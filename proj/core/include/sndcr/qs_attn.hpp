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

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "sndcr/config.hpp"
#include "sndcr/nn.hpp"

namespace sndcr {

/// Row entropies of the self-attention map A = softmax(F F^T / sqrt(C)).
/// Low entropy marks spatial positions whose attention is concentrated,
/// i.e. the most informative anchor candidates. Processing is blocked over
/// rows so large feature maps never materialize the full HW x HW map.
template <typename T>
Tensor<T> attention_entropy(const Tensor<T>& f) {
  SNDCR_CHECK_SHAPE(f.rank() == 2, "attention_entropy: [HW, C] input expected");
  const int hw = f.dim(0), c = f.dim(1);
  SNDCR_CHECK(hw >= 2, "attention_entropy: needs at least 2 positions");
  SNDCR_CHECK(f.all_finite(), "attention_entropy: non-finite features");
  bool all_zero = true;
  for (int64_t i = 0; i < f.numel() && all_zero; ++i) all_zero = (f[i] == T(0));
  SNDCR_CHECK(!all_zero, "attention_entropy: all-zero feature rows");

  const T inv_temp = T(1) / std::sqrt(static_cast<T>(c));
  Tensor<T> entropy = Tensor<T>::uninitialized(Shape{hw});
  // Blocks sized so the HW x block logits slab stays cache-resident for
  // the softmax passes right after its GEMM produces it.
  const int block = std::clamp((1 << 18) / std::max(hw, 1), 1, hw);
  const int n_blocks = (hw + block - 1) / block;
  ECMap<T> f_tr(f.data(), c, hw);  // = F^T (col-major view of row-major F)
  using EArr = Eigen::Array<T, Eigen::Dynamic, 1>;
#pragma omp parallel if (n_blocks > 1)
  {
    EMat<T> logits;
    EArr e;
#pragma omp for schedule(dynamic, 4)
    for (int bidx = 0; bidx < n_blocks; ++bidx) {
      const int r0 = bidx * block;
      const int rows = std::min(block, hw - r0);
      // logits(j, i) = F_j . F_{r0+i} / sqrt(C); column i is contiguous.
      logits.noalias() = (f_tr.transpose() * f_tr.middleCols(r0, rows)) * inv_temp;
      for (int i = 0; i < rows; ++i) {
        auto col = logits.col(i).array();
        const T mx = col.maxCoeff();
        e = (col - mx).exp();
        const T z = e.sum();
        // sum e * (logit - mx) = e . logit - mx * z
        const T acc = (e * col).sum() - mx * z;
        entropy[r0 + i] = std::log(z) - acc / z;
      }
    }
  }
  return entropy;
}

/// Indices of the `count` lowest-entropy positions, ascending entropy with
/// index order breaking ties (deterministic).
template <typename T>
std::vector<int> lowest_entropy_indices(const Tensor<T>& entropy, int count) {
  const int hw = entropy.dim(0);
  SNDCR_CHECK(count >= 1 && count <= hw,
              "anchor selection: requested " << count << " of " << hw
                                             << " positions");
  std::vector<int> idx(static_cast<size_t>(hw));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return entropy[a] < entropy[b];
  });
  idx.resize(static_cast<size_t>(count));
  return idx;
}

/// Two-layer MLP projection head to the shared embedding space; the
/// projected vectors are L2-normalized.
template <typename T>
struct ProjectionHead {
  Linear<T> fc1, fc2;

  ProjectionHead() = default;
  ProjectionHead(const std::string& name, int in_dim, int embed_dim,
                 RandomStream& rng)
      : fc1(name + ".fc1", in_dim, embed_dim, rng),
        fc2(name + ".fc2", embed_dim, embed_dim, rng) {}

  Var<T> project(const Var<T>& rows) const {
    return l2_normalize_rows(fc2.forward(relu(fc1.forward(rows))));
  }
  void collect(ParamRefs<T>& out) {
    fc1.collect(out);
    fc2.collect(out);
  }
};

/// Anchors selected for one tapped layer: unit-norm query embeddings from
/// the generated image, positives from the input image at the same spatial
/// indices. The other selected positives of the same bank serve as the
/// negatives.
template <typename T>
struct PatchBank {
  int layer_id = 0;
  std::vector<int> indices;
  Var<T> queries;    // [S, D]
  Var<T> positives;  // [S, D]
};

/// Row-wise concatenation of [Si, C] matrices.
template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  SNDCR_CHECK(!parts.empty(), "concat_rows: empty input");
  const int c = parts[0].value().dim(1);
  int rows = 0;
  for (const auto& p : parts) {
    SNDCR_CHECK_SHAPE(p.value().rank() == 2 && p.value().dim(1) == c,
                      "concat_rows: column mismatch");
    rows += p.value().dim(0);
  }
  Tensor<T> out(Shape{rows, c});
  int64_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().numel(),
              out.data() + off);
    off += p.value().numel();
  }
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

/// Ranks positions by attention entropy (on the generated image's features
/// by default), gathers the same indices from both feature maps and
/// projects them through the shared head.
template <typename T>
PatchBank<T> select_anchors(const Var<T>& feat_x, const Var<T>& feat_gx,
                            int count, const ProjectionHead<T>& head,
                            int layer_id,
                            EntropySource source = EntropySource::kGenerated) {
  SNDCR_CHECK_SHAPE(feat_x.value().same_shape(feat_gx.value()),
                    "select_anchors: feature shapes differ, "
                        << shape_str(feat_x.shape()) << " vs "
                        << shape_str(feat_gx.shape()));
  SNDCR_CHECK_SHAPE(feat_x.value().rank() == 4,
                    "select_anchors: [B, C, H, W] features expected");
  const int b = feat_x.value().dim(0);
  const int hw = feat_x.value().dim(2) * feat_x.value().dim(3);
  SNDCR_CHECK(count <= hw, "select_anchors: " << count
                               << " anchors requested from " << hw
                               << " positions");
  PatchBank<T> bank;
  bank.layer_id = layer_id;
  std::vector<Var<T>> q_parts, p_parts;
  for (int bi = 0; bi < b; ++bi) {
    Var<T> rows_gx = spatial_rows(feat_gx, bi);
    Var<T> rows_x = spatial_rows(feat_x, bi);
    const Tensor<T>& ranking_rows = source == EntropySource::kGenerated
                                        ? rows_gx.value()
                                        : rows_x.value();
    Tensor<T> entropy = attention_entropy(ranking_rows);
    std::vector<int> idx = lowest_entropy_indices(entropy, count);
    for (int i : idx) bank.indices.push_back(bi * hw + i);
    q_parts.push_back(head.project(gather_rows(rows_gx, idx)));
    p_parts.push_back(head.project(gather_rows(rows_x, idx)));
  }
  bank.queries = q_parts.size() == 1 ? q_parts[0] : concat_rows(q_parts);
  bank.positives = p_parts.size() == 1 ? p_parts[0] : concat_rows(p_parts);
  return bank;
}

/// Per-layer projection heads, created lazily on the first forward (the
/// tapped feature dims are only known then).
template <typename T>
class PatchProjector {
 public:
  PatchProjector(int embed_dim, uint64_t init_seed)
      : embed_dim_(embed_dim), init_seed_(init_seed) {}

  ProjectionHead<T>& head_for(int layer_id, int feature_dim) {
    auto it = heads_.find(layer_id);
    if (it == heads_.end()) {
      RandomStream rng(derive_seed(init_seed_, "head" + std::to_string(layer_id)));
      it = heads_
               .emplace(layer_id,
                        ProjectionHead<T>("H." + std::to_string(layer_id),
                                          feature_dim, embed_dim_, rng))
               .first;
    }
    SNDCR_CHECK_SHAPE(it->second.fc1.weight.var.value().dim(0) == feature_dim,
                      "projection head " << layer_id << " built for dim "
                          << it->second.fc1.weight.var.value().dim(0)
                          << ", got " << feature_dim);
    return it->second;
  }

  bool has(int layer_id) const { return heads_.count(layer_id) > 0; }
  int embed_dim() const { return embed_dim_; }

  void collect(ParamRefs<T>& out) {
    for (auto& [id, head] : heads_) head.collect(out);
  }
  std::map<int, ProjectionHead<T>>& heads() { return heads_; }

 private:
  int embed_dim_;
  uint64_t init_seed_;
  std::map<int, ProjectionHead<T>> heads_;
};

}  // namespace sndcr
