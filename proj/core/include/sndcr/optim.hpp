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
#include <map>
#include <string>

#include "sndcr/checkpoint.hpp"
#include "sndcr/nn.hpp"

namespace sndcr {

/// Adam with bias correction. Moment state is keyed by parameter name so
/// lazily created parameters (the projection heads) join seamlessly and
/// checkpoints restore by name.
template <typename T>
class Adam {
 public:
  Adam(double beta1, double beta2, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const ParamRefs<T>& params, double lr) {
    for (auto* p : params) {
      if (!p->var.has_grad()) continue;
      State& s = state_for(*p);
      const Tensor<T>& g = p->var.grad();
      Tensor<T>& w = p->var.mutable_value();
      s.t += 1;
      const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
      const T bc1 = static_cast<T>(1.0 - std::pow(beta1_, static_cast<double>(s.t)));
      const T bc2 = static_cast<T>(1.0 - std::pow(beta2_, static_cast<double>(s.t)));
      const T step_lr = static_cast<T>(lr), eps = static_cast<T>(eps_);
      const int64_t n = g.numel();
      T* mp = s.m.data();
      T* vp = s.v.data();
      T* wp = w.data();
      const T* gp = g.data();
#pragma omp parallel for schedule(static) if (n > 65536)
      for (int64_t i = 0; i < n; ++i) {
        const T gi = gp[i];
        mp[i] = b1 * mp[i] + (T(1) - b1) * gi;
        vp[i] = b2 * vp[i] + (T(1) - b2) * gi * gi;
        const T mhat = mp[i] / bc1;
        const T vhat = vp[i] / bc2;
        wp[i] -= step_lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  void save(TensorStore& store, const std::string& prefix) const {
    for (const auto& [name, s] : states_) {
      store.put(prefix + name + ".m", s.m);
      store.put(prefix + name + ".v", s.v);
      store.put_i64(prefix + name + ".t", s.t);
    }
  }

  void load(const TensorStore& store, const std::string& prefix,
            const ParamRefs<T>& params) {
    states_.clear();
    for (auto* p : params) {
      const std::string base = prefix + p->name;
      if (!store.has(base + ".t")) continue;
      State s;
      s.m = store.template get<T>(base + ".m");
      s.v = store.template get<T>(base + ".v");
      s.t = store.get_i64(base + ".t");
      states_.emplace(p->name, std::move(s));
    }
  }

  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }

 private:
  struct State {
    Tensor<T> m, v;
    int64_t t = 0;
  };

  State& state_for(const Parameter<T>& p) {
    auto it = states_.find(p.name);
    if (it == states_.end()) {
      State s;
      s.m = Tensor<T>(p.var.value().shape());
      s.v = Tensor<T>(p.var.value().shape());
      it = states_.emplace(p.name, std::move(s)).first;
    }
    return it->second;
  }

  double beta1_, beta2_, eps_;
  std::map<std::string, State> states_;
};

}  // namespace sndcr
