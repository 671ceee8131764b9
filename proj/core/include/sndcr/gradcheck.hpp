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

#include <functional>
#include <vector>

#include "sndcr/autodiff.hpp"

namespace sndcr {

/// Central-finite-difference gradient check. `f` must rebuild the scalar
/// graph from the current values of `inputs` on every call; the analytic
/// gradients from one backward() pass are compared element by element
/// against (f(x+h) - f(x-h)) / 2h.
///
/// Returns the maximum relative error max |fd - an| / max(|fd|, |an|, floor).
inline double gradcheck(const std::function<Var<double>()>& f,
                        std::vector<Var<double>> inputs, double h = 1e-5,
                        double floor = 1e-6) {
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  Var<double> out = f();
  out.backward();

  double max_rel = 0.0;
  for (auto& in : inputs) {
    Tensor<double>& x = in.mutable_value();
    for (int64_t i = 0; i < x.numel(); ++i) {
      const double orig = x[i];
      x[i] = orig + h;
      double fp = f().value().item();
      x[i] = orig - h;
      double fm = f().value().item();
      x[i] = orig;
      double fd = (fp - fm) / (2.0 * h);
      double an = in.has_grad() ? in.grad()[i] : 0.0;
      double rel = std::abs(fd - an) /
                   std::max({std::abs(fd), std::abs(an), floor});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace sndcr
