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

#include "sndcr/selfcheck.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>

#include "sndcr/blocks.hpp"
#include "sndcr/discriminator.hpp"
#include "sndcr/generator.hpp"
#include "sndcr/gradcheck.hpp"
#include "sndcr/losses.hpp"
#include "sndcr/metrics.hpp"
#include "sndcr/qs_attn.hpp"
#include "sndcr/trainer.hpp"

namespace sndcr {

namespace {

Tensor<double> random_tensor(Shape shape, RandomStream& rng, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.gaussian(0.0, scale);
  return t;
}

double svd_sigma_max(const Tensor<double>& w) {
  Eigen::MatrixXd m(w.dim(0), w.dim(1));
  for (int i = 0; i < w.dim(0); ++i)
    for (int j = 0; j < w.dim(1); ++j) m(i, j) = w.at2(i, j);
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

using CheckFn = std::function<bool(std::string&)>;

struct Check {
  std::string name;
  bool in_quick;
  CheckFn fn;
};

}  // namespace

std::vector<SelfCheckResult> run_selfcheck(const SelfCheckOptions& opts,
                                           std::ostream& out) {
  const std::string& corrupt = opts.corrupt;
  std::vector<Check> checks;

  checks.push_back({"gram_oracle", true, [&corrupt](std::string& detail) {
    RandomStream rng(101);
    for (int trial = 0; trial < 10; ++trial) {
      Var<double> f(random_tensor({1, 3, 2, 2}, rng));
      Var<double> m = gram(f);
      const int c = 3, h = 2, w = 2;
      for (int i = 0; i < c; ++i)
        for (int j = 0; j < c; ++j) {
          double s = 0;
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
              s += f.value().at4(0, i, y, x) * f.value().at4(0, j, y, x);
          s /= c * h * w;
          double got = m.value()[static_cast<int64_t>(i) * c + j];
          if (corrupt == "gram") got += 1e-3;  // test hook
          if (std::abs(got - s) > 1e-9) {
            detail = "gram mismatch vs triple-loop oracle";
            return false;
          }
        }
    }
    return true;
  }});

  checks.push_back({"power_iteration_svd", false, [&corrupt](std::string& detail) {
    RandomStream rng(102);
    for (int trial = 0; trial < 5; ++trial) {
      Tensor<double> w = random_tensor({16, 32}, rng);
      SpectralNormState<double> st;
      Tensor<double> u(Shape{16});
      for (int i = 0; i < 16; ++i) u[i] = rng.gaussian();
      double n = 0;
      for (int i = 0; i < 16; ++i) n += u[i] * u[i];
      for (int i = 0; i < 16; ++i) u[i] /= std::sqrt(n);
      st.u = std::move(u);
      st.n_power_iterations = 50;
      auto [what, next] = spectral_normalize(w, st);
      double est = w[0] / what[0];
      if (corrupt == "power_iteration") est *= 1.02;
      double oracle = svd_sigma_max(w);
      if (std::abs(est - oracle) / oracle > 1e-3) {
        detail = "power iteration disagrees with SVD oracle";
        return false;
      }
    }
    return true;
  }});

  checks.push_back({"entropy_oracle", true, [&corrupt](std::string& detail) {
    RandomStream rng(103);
    Tensor<double> f = random_tensor({16, 8}, rng);
    Tensor<double> h = attention_entropy(f);
    for (int i = 0; i < 16; ++i) {
      std::vector<double> logits(16);
      for (int j = 0; j < 16; ++j) {
        double s = 0;
        for (int k = 0; k < 8; ++k) s += f.at2(i, k) * f.at2(j, k);
        logits[static_cast<size_t>(j)] = s / std::sqrt(8.0);
      }
      double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0;
      for (double l : logits) z += std::exp(l - mx);
      double ent = 0;
      for (double l : logits) {
        double p = std::exp(l - mx) / z;
        ent -= p * std::log(p);
      }
      double got = h[i];
      if (corrupt == "entropy") got += 1e-3;
      if (std::abs(got - ent) > 1e-6) {
        detail = "entropy mismatch vs double-loop oracle";
        return false;
      }
    }
    return true;
  }});

  checks.push_back({"loss_closed_forms", true, [&corrupt](std::string& detail) {
    Var<double> zeros(Tensor<double>(Shape{1, 1, 2, 2}));
    double d_at_half = adversarial_loss(zeros, zeros, GanMode::kLogistic,
                                        GanSide::kDiscriminator)
                           .value()
                           .item();
    if (corrupt == "losses") d_at_half += 1e-3;
    if (std::abs(d_at_half - 2 * std::log(2.0)) > 1e-6) {
      detail = "logistic D loss at sigma=1/2 is not 2 log 2";
      return false;
    }
    Var<double> half(Tensor<double>::full(Shape{1, 1, 2, 2}, 0.5));
    if (std::abs(adversarial_loss(half, half, GanMode::kLeastSquares,
                                  GanSide::kDiscriminator)
                     .value()
                     .item() -
                 0.25) > 1e-9) {
      detail = "least-squares D loss at 0.5 logits is not 0.25";
      return false;
    }
    // PatchNCE: equal similarities -> log N; strong positive -> ~6.2e-7.
    Tensor<double> e1(Shape{2});
    e1[0] = 1.0;
    Tensor<double> negs(Shape{3, 2});
    for (int i = 0; i < 3; ++i) negs.at2(i, 0) = 1.0;
    double uniform = patch_nce(Var<double>(e1), Var<double>(e1),
                               Var<double>(negs), 0.07)
                         .value()
                         .item();
    if (std::abs(uniform - std::log(4.0)) > 1e-9) {
      detail = "uniform patch_nce is not log(4)";
      return false;
    }
    Tensor<double> orth(Shape{1, 2});
    orth.at2(0, 1) = 1.0;
    double tiny = patch_nce(Var<double>(e1), Var<double>(e1),
                            Var<double>(orth), 0.07)
                      .value()
                      .item();
    if (std::abs(tiny - std::log1p(std::exp(-1.0 / 0.07))) > 1e-9) {
      detail = "patch_nce at tau=0.07 deviates from log1p(exp(-1/tau))";
      return false;
    }
    // Semantic loss: ratio 1/2 per layer -> 0.5 * 31/16.
    VggTaps<double> gx, p, n;
    for (int layer : {1, 3, 5, 9, 13}) {
      gx.taps.emplace(layer, Var<double>(Tensor<double>(Shape{1, 1, 1, 1})));
      p.taps.emplace(layer,
                     Var<double>(Tensor<double>::full(Shape{1, 1, 1, 1},
                                                      (4.0 + 1e-7) / 2.0)));
      n.taps.emplace(layer, Var<double>(Tensor<double>::full(Shape{1, 1, 1, 1}, 4.0)));
    }
    if (std::abs(semantic_loss(gx, p, n).value().item() - 0.96875) > 1e-9) {
      detail = "semantic loss at ratio 1/2 is not 0.96875";
      return false;
    }
    // Style margin tie case.
    VggTaps<double> sp;
    for (int layer : {1, 3, 5, 9, 13})
      sp.taps.emplace(layer,
                      Var<double>(Tensor<double>::full(Shape{1, 1, 1, 1}, 0.5)));
    if (std::abs(style_loss(gx, sp, sp, 0.04).value().item() - 0.04) > 1e-12) {
      detail = "style loss tie case is not alpha";
      return false;
    }
    return true;
  }});

  checks.push_back({"gradient_checks", false, [&corrupt](std::string& detail) {
    RandomStream rng(104);
    Var<double> real(random_tensor({1, 1, 3, 3}, rng));
    Var<double> fake(random_tensor({1, 1, 3, 3}, rng));
    double worst = 0;
    for (GanMode mode : {GanMode::kLogistic, GanMode::kLeastSquares}) {
      worst = std::max(
          worst, gradcheck([&] {
            return adversarial_loss(real, fake, mode, GanSide::kDiscriminator);
          }, {real, fake}));
    }
    Var<double> q(random_tensor({4}, rng));
    Var<double> kpos(random_tensor({4}, rng));
    Var<double> knegs(random_tensor({3, 4}, rng));
    worst = std::max(worst, gradcheck([&] {
      return patch_nce(q, kpos, knegs, 0.5);
    }, {q, kpos, knegs}));

    VggTaps<double> gx, p, n;
    for (int layer : {1, 3, 5, 9, 13}) {
      gx.taps.emplace(layer, Var<double>(random_tensor({1, 2, 2, 2}, rng), true));
      p.taps.emplace(layer, Var<double>(random_tensor({1, 2, 2, 2}, rng, 0.3)));
      n.taps.emplace(layer, Var<double>(random_tensor({1, 2, 2, 2}, rng, 0.3)));
    }
    std::vector<Var<double>> sem_inputs;
    for (auto& [l, v] : gx.taps) sem_inputs.push_back(v);
    worst = std::max(worst, gradcheck([&] {
      return semantic_loss(gx, p, n);
    }, sem_inputs));
    worst = std::max(worst, gradcheck([&] {
      return style_loss(gx, p, n, 0.04);
    }, sem_inputs));

    RandomStream brng(105);
    SnResBlock<double> block("sc.res", 3, brng);
    Var<double> x(random_tensor({1, 3, 5, 5}, rng, 0.5));
    Var<double> probe(random_tensor({1, 3, 5, 5}, rng));
    worst = std::max(worst, gradcheck([&] {
      return sum_all(mul(block.forward(x, false), probe));
    }, {x, block.conv1.weight.var, block.norm1.gamma.var}));

    if (corrupt == "gradients") worst += 1.0;
    if (worst > 1e-3) {
      detail = "finite-difference mismatch, max rel err " + std::to_string(worst);
      return false;
    }
    detail = "max rel err " + std::to_string(worst);
    return true;
  }});

  checks.push_back({"architecture_arithmetic", true, [&corrupt](std::string& detail) {
    RandomStream rng(106);
    GeneratorConfig gc;
    gc.input_size = 256;
    ResnetGenerator<float> gen(gc, rng);
    Tensor<float> x(Shape{1, 3, 256, 256});
    auto r = gen.forward(Var<float>(x), false, false);
    Shape want_b{1, 256, 64, 64};
    if (corrupt == "architecture") want_b[1] = 255;
    if (!(r.bottleneck.shape() == want_b)) {
      detail = "bottleneck is not [1, 256, 64, 64]";
      return false;
    }
    PatchDiscriminator<float> d(64, rng);
    if (!(d.forward(Var<float>(x)).shape() == Shape{1, 1, 30, 30})) {
      detail = "discriminator grid is not 30x30 for 256 input";
      return false;
    }
    return true;
  }});

  checks.push_back({"lr_schedule", true, [&corrupt](std::string& detail) {
    TrainConfig cfg;
    double v200 = lr_at(200, cfg);
    if (corrupt == "lr_schedule") v200 *= 2;
    if (v200 != 2e-4 || std::abs(lr_at(300, cfg) - 1e-4) > 1e-18 ||
        lr_at(400, cfg) != 0.0) {
      detail = "schedule points (200, 300, 400) deviate";
      return false;
    }
    return true;
  }});

  checks.push_back({"instance_norm_stats", true, [&corrupt](std::string& detail) {
    RandomStream rng(107);
    Var<double> x(random_tensor({1, 2, 8, 8}, rng, 3.0));
    Var<double> y = instance_norm(x, Var<double>(), Var<double>());
    for (int c = 0; c < 2; ++c) {
      double mu = 0, var = 0;
      for (int i = 0; i < 64; ++i) mu += y.value()[c * 64 + i];
      mu /= 64;
      for (int i = 0; i < 64; ++i) {
        double d = y.value()[c * 64 + i] - mu;
        var += d * d;
      }
      var /= 64;
      if (corrupt == "instance_norm") mu += 1e-3;
      if (std::abs(mu) > 1e-6 || std::abs(var - 1.0) > 1e-4) {
        detail = "post-norm statistics off";
        return false;
      }
    }
    return true;
  }});

  checks.push_back({"buffer_invariants", false, [&corrupt](std::string& detail) {
    ImageBuffer<float> buf(50, RandomStream(derive_seed(108, "buffer")));
    Tensor<float> img(Shape{1, 1, 2, 2});
    for (int i = 0; i < 50; ++i) buf.query(img);
    int64_t before = buf.swaps();
    const int queries = 2000;
    for (int i = 0; i < queries; ++i) {
      buf.query(img);
      if (buf.size() > 50) {
        detail = "pool exceeded capacity";
        return false;
      }
    }
    double freq = static_cast<double>(buf.swaps() - before) / queries;
    if (corrupt == "buffer") freq += 0.5;
    if (freq < 0.45 || freq > 0.55) {
      detail = "swap frequency " + std::to_string(freq);
      return false;
    }
    return true;
  }});

  checks.push_back({"fid_trivial", true, [&corrupt](std::string& detail) {
    RandomStream rng(109);
    Tensor<double> f(Shape{16, 4});
    for (int64_t i = 0; i < f.numel(); ++i) f[i] = rng.gaussian();
    double self_fid = fid(f, f);
    if (corrupt == "fid") self_fid += 1.0;
    if (std::abs(self_fid) > 1e-6) {
      detail = "FID(A, A) is not 0";
      return false;
    }
    Tensor<double> a(Shape{2, 2}), b(Shape{2, 2});
    for (int i = 0; i < 2; ++i) b.at2(i, 0) = 3.0;
    if (std::abs(fid(a, b) - 9.0) > 1e-9) {
      detail = "point-mass FID is not d^2";
      return false;
    }
    return true;
  }});

  std::vector<SelfCheckResult> results;
  bool all = true;
  for (auto& check : checks) {
    if (opts.quick && !check.in_quick) continue;
    SelfCheckResult r;
    r.name = check.name;
    try {
      r.passed = check.fn(r.detail);
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = e.what();
    }
    all = all && r.passed;
    out << (r.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(26)
        << r.name << (r.detail.empty() ? "" : "  " + r.detail) << "\n";
    results.push_back(std::move(r));
  }
  out << (all ? "selfcheck: all checks passed\n"
              : "selfcheck: FAILURES present\n");
  return results;
}

}  // namespace sndcr
